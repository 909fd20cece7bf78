//! The patch-to-image transformation pipeline.
//!
//! Per person box the patch goes through TPS warp, then distance blur, then
//! rotated/translated placement; boxes composite in label order (later boxes
//! over earlier ones) and a global lighting pass finishes the image. Every
//! stage is linear or pointwise in the patch pixels, and each caches enough
//! to run the exact adjoint, so `d(output)/d(patch)` is available without an
//! autodiff framework.

pub mod blur;
pub mod draw;
pub mod lighting;
pub mod place;
pub mod sampling;
pub mod tps;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::dataset::LabeledImage;
use crate::error::{Error, Result};
use crate::patch::Patch;
use crate::tensor::ImageTensor;

pub use draw::{BoxDraw, RandomDraw};
pub use lighting::{lighting_transform, LightingParams};
pub use place::{place_patch, PlacedPatch};
pub use sampling::{resize_map, SampleMap};
pub use tps::tps_warp;

/// Stochastic-stage configuration for expectation-over-transformation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TransformConfig {
    /// Rotation range in degrees (uniform in `[-r, r]`).
    pub rotation_deg: f64,
    /// Translation range as a fraction of box size.
    pub translate_frac: f64,
    /// Patch width as a fraction of box height.
    pub patch_scale: f64,
    /// TPS control grid side.
    pub tps_grid: usize,
    /// Max TPS control offset as a fraction of patch size.
    pub tps_sigma: f64,
    /// Additive brightness range.
    pub brightness_range: f64,
    /// Multiplicative contrast range `[lo, hi]`.
    pub contrast_range: (f64, f64),
    /// Std of additive Gaussian pixel noise.
    pub noise_std: f64,
    /// Maps box size to blur width; see [`blur::blur_sigma`].
    pub blur_gain: f64,
    pub enable_tps: bool,
    pub enable_blur: bool,
    pub enable_perspective: bool,
    pub enable_lighting: bool,
}

impl Default for TransformConfig {
    fn default() -> Self {
        TransformConfig {
            rotation_deg: 20.0,
            translate_frac: 0.1,
            patch_scale: 0.30,
            tps_grid: 5,
            tps_sigma: 0.05,
            brightness_range: 0.1,
            contrast_range: (0.8, 1.2),
            noise_std: 0.02,
            blur_gain: 1.5,
            enable_tps: true,
            enable_blur: true,
            enable_perspective: true,
            enable_lighting: true,
        }
    }
}

impl TransformConfig {
    pub fn validate(&self) -> Result<()> {
        let finite = self.rotation_deg.is_finite()
            && self.translate_frac.is_finite()
            && self.patch_scale.is_finite()
            && self.tps_sigma.is_finite()
            && self.brightness_range.is_finite()
            && self.contrast_range.0.is_finite()
            && self.contrast_range.1.is_finite()
            && self.noise_std.is_finite()
            && self.blur_gain.is_finite();
        if !finite {
            return Err(Error::argument("transform ranges must be finite"));
        }
        if !(self.patch_scale > 0.0 && self.patch_scale <= 1.0) {
            return Err(Error::argument(format!(
                "patch_scale must lie in (0, 1], got {}",
                self.patch_scale
            )));
        }
        if self.tps_grid < 2 {
            return Err(Error::argument("tps_grid must be at least 2"));
        }
        if self.contrast_range.0 > self.contrast_range.1 || self.contrast_range.0 < 0.0 {
            return Err(Error::argument("bad contrast range"));
        }
        if self.noise_std < 0.0 || self.blur_gain < 0.0 || self.translate_frac < 0.0 {
            return Err(Error::argument("negative transform range"));
        }
        Ok(())
    }

    /// An all-identity configuration with every stochastic stage off.
    pub fn disabled() -> Self {
        TransformConfig {
            enable_tps: false,
            enable_blur: false,
            enable_perspective: false,
            enable_lighting: false,
            noise_std: 0.0,
            ..TransformConfig::default()
        }
    }
}

struct BoxTrace {
    tps: Option<SampleMap>,
    blur_kernel: Option<Vec<f64>>,
    place: PlacedPatch,
}

/// Cached forward state; runs the exact gradient pass for one application.
pub struct ApplyTrace {
    boxes: Vec<BoxTrace>,
    /// Which box (by processing order) owns each pixel; -1 = background.
    owner: Array2<i32>,
    lighting: lighting::LightingTrace,
}

impl ApplyTrace {
    /// Propagates `d(loss)/d(composited image)` back to `d(loss)/d(patch)`.
    pub fn backward(&self, grad_image: &ImageTensor) -> ImageTensor {
        let g = self.lighting.backward(grad_image);
        let (h, w, _) = g.dim();
        let mut grad_patch: Option<ImageTensor> = None;
        for (k, bt) in self.boxes.iter().enumerate() {
            // keep only gradients at pixels this box still owns after later
            // boxes composited over it
            let mut g_owned = g.clone();
            for y in 0..h {
                for x in 0..w {
                    if self.owner[[y, x]] != k as i32 {
                        for c in 0..3 {
                            g_owned[[y, x, c]] = 0.0;
                        }
                    }
                }
            }
            let mut gp = bt.place.backward(&g_owned);
            if let Some(kernel) = &bt.blur_kernel {
                gp = blur::blur_backward(&gp, kernel);
            }
            if let Some(map) = &bt.tps {
                gp = map.backward(&gp);
            }
            match &mut grad_patch {
                Some(acc) => *acc += &gp,
                None => grad_patch = Some(gp),
            }
        }
        grad_patch.unwrap_or_else(|| ImageTensor::zeros((0, 0, 3)))
    }

    pub fn has_boxes(&self) -> bool {
        !self.boxes.is_empty()
    }

    /// Union mask over all placed patches.
    pub fn union_mask(&self) -> Array2<f64> {
        let mut m = Array2::zeros(self.owner.dim());
        ndarray::Zip::from(&mut m).and(&self.owner).for_each(|m, o| {
            if *o >= 0 {
                *m = 1.0;
            }
        });
        m
    }
}

/// Applies the patch to every person box of `sample` and returns the
/// composited image plus the gradient trace.
pub fn apply_patch_traced(
    patch: &Patch,
    sample: &LabeledImage,
    cfg: &TransformConfig,
    draw: &RandomDraw,
    person_class_id: u32,
) -> Result<(LabeledImage, ApplyTrace)> {
    cfg.validate()?;
    let (ih, iw) = sample.dims();
    let mut image = sample.image.clone();
    let mut owner = Array2::from_elem((ih, iw), -1i32);
    let mut boxes = Vec::new();

    for (bi, bbox) in sample
        .boxes
        .iter()
        .filter(|b| b.class_id == person_class_id)
        .enumerate()
    {
        let bd = draw.box_draw(bi);
        let mut current = patch.clone();

        let tps = match (cfg.enable_tps, &bd.tps_offsets) {
            (true, Some(offsets)) => {
                let map = tps::tps_map(patch.height(), patch.width(), offsets)?;
                current = Patch::new({
                    let mut t = map.forward(current.pixels());
                    crate::tensor::clamp01(&mut t);
                    t
                })?;
                Some(map)
            }
            _ => None,
        };

        let blur_kernel = if cfg.enable_blur {
            let sigma = blur::blur_sigma(bbox.h.min(1.0).max(f64::MIN_POSITIVE), cfg.blur_gain)?;
            let kernel = blur::gaussian_kernel(sigma);
            if kernel.len() > 1 {
                current = Patch::new({
                    let mut t = blur::blur_forward(current.pixels(), &kernel);
                    crate::tensor::clamp01(&mut t);
                    t
                })?;
                Some(kernel)
            } else {
                None
            }
        } else {
            None
        };

        let place = place::place_map(
            (patch.height(), patch.width()),
            bbox,
            (ih, iw),
            bd.rotation_rad,
            bd.translate,
            cfg.patch_scale,
        );
        if !place.is_empty() {
            let layer = place.layer(current.pixels());
            for (idx, _) in &place.covered {
                let i = *idx as usize;
                let (y, x) = (i / iw, i % iw);
                for c in 0..3 {
                    image[[y, x, c]] = layer[[y, x, c]];
                }
                owner[[y, x]] = boxes.len() as i32;
            }
        }
        boxes.push(BoxTrace {
            tps,
            blur_kernel,
            place,
        });
    }

    let params = if cfg.enable_lighting {
        draw.lighting_params((ih, iw))
    } else {
        LightingParams::identity()
    };
    let (image, lighting) = lighting::lighting_traced(&image, &params);

    Ok((
        LabeledImage {
            image,
            boxes: sample.boxes.clone(),
        },
        ApplyTrace {
            boxes,
            owner,
            lighting,
        },
    ))
}

/// [`apply_patch_traced`] without the gradient trace.
pub fn apply_patch(
    patch: &Patch,
    sample: &LabeledImage,
    cfg: &TransformConfig,
    draw: &RandomDraw,
    person_class_id: u32,
) -> Result<LabeledImage> {
    apply_patch_traced(patch, sample, cfg, draw, person_class_id).map(|(img, _)| img)
}
