//! Global lighting jitter: contrast, brightness, and per-pixel noise.

use ndarray::Array3;

use crate::tensor::ImageTensor;

/// Parameters of one lighting application.
#[derive(Debug, Clone)]
pub struct LightingParams {
    pub contrast: f64,
    pub brightness: f64,
    /// Per-pixel additive noise, same shape as the image; `None` means zero.
    pub noise: Option<ImageTensor>,
}

impl LightingParams {
    pub fn identity() -> Self {
        LightingParams {
            contrast: 1.0,
            brightness: 0.0,
            noise: None,
        }
    }

    pub fn is_identity(&self) -> bool {
        self.contrast == 1.0 && self.brightness == 0.0 && self.noise.is_none()
    }
}

/// Cached clamp state for the gradient pass.
#[derive(Debug, Clone)]
pub struct LightingTrace {
    contrast: f64,
    /// 1.0 where the pre-clamp value stayed strictly inside (0, 1).
    pass: ImageTensor,
}

impl LightingTrace {
    pub fn backward(&self, grad_out: &ImageTensor) -> ImageTensor {
        let mut g = grad_out * &self.pass;
        g.mapv_inplace(|v| v * self.contrast);
        g
    }
}

/// `clamp(contrast * img + brightness + noise, 0, 1)`.
pub fn lighting_transform(img: &ImageTensor, params: &LightingParams) -> ImageTensor {
    lighting_traced(img, params).0
}

pub fn lighting_traced(img: &ImageTensor, params: &LightingParams) -> (ImageTensor, LightingTrace) {
    if params.is_identity() {
        let pass = Array3::ones(img.dim());
        return (
            img.clone(),
            LightingTrace {
                contrast: 1.0,
                pass,
            },
        );
    }
    let mut out = img.mapv(|v| params.contrast * v + params.brightness);
    if let Some(noise) = &params.noise {
        out += noise;
    }
    let mut pass = Array3::zeros(img.dim());
    ndarray::Zip::from(&mut pass).and(&out).for_each(|p, o| {
        if *o > 0.0 && *o < 1.0 {
            *p = 1.0;
        }
    });
    out.mapv_inplace(|v| v.clamp(0.0, 1.0));
    (
        out,
        LightingTrace {
            contrast: params.contrast,
            pass,
        },
    )
}
