//! Gradient-weighted class activation maps.

use ndarray::{Array2, Array3};

use crate::detect::{CamBackbone, CamCapture, CamTarget};
use crate::error::{Error, Result};
use crate::tensor::ImageTensor;
use crate::transform::resize_map;

/// Normalized attention map: values in `[0, 1]`, max 1 unless all-zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    pub values: Array2<f64>,
}

impl Heatmap {
    pub fn new(mut values: Array2<f64>) -> Self {
        let max = values.iter().copied().fold(0.0f64, f64::max);
        if max > 0.0 {
            values.mapv_inplace(|v| (v / max).clamp(0.0, 1.0));
        }
        Heatmap { values }
    }

    pub fn dims(&self) -> (usize, usize) {
        self.values.dim()
    }

    /// Grayscale PNG export.
    pub fn save_png(&self, path: &std::path::Path) -> Result<()> {
        let (h, w) = self.dims();
        let rgb = Array3::from_shape_fn((h, w, 3), |(y, x, _)| self.values[[y, x]]);
        crate::tensor::save_png(&rgb, path)
    }
}

/// Computes the Grad-CAM heatmap for `target` at the named layer.
///
/// Per activation map `A^k`, the weight is the spatial mean of the target's
/// gradient on `A^k`; the map is `ReLU(sum_k alpha_k A^k)` upsampled
/// bilinearly to image size and max-normalized.
pub fn grad_cam(
    backbone: &dyn CamBackbone,
    image: &ImageTensor,
    target: &CamTarget,
    layer: &str,
) -> Result<Heatmap> {
    let CamCapture { activations, grads } = backbone.cam_capture(image, layer, target)?;
    if activations.dim() != grads.dim() {
        return Err(Error::argument(
            "activation and gradient shapes disagree in CAM capture",
        ));
    }
    let (k, h, w) = activations.dim();
    let mut cam = Array2::<f64>::zeros((h, w));
    for f in 0..k {
        let alpha = grads
            .index_axis(ndarray::Axis(0), f)
            .mean()
            .unwrap_or(0.0);
        if alpha == 0.0 {
            continue;
        }
        for y in 0..h {
            for x in 0..w {
                cam[[y, x]] += alpha * activations[[f, y, x]];
            }
        }
    }
    cam.mapv_inplace(|v| v.max(0.0));

    let (ih, iw, _) = image.dim();
    if (h, w) != (ih, iw) {
        let map = resize_map((h, w), (ih, iw));
        let as3 = Array3::from_shape_fn((h, w, 1), |(y, x, _)| cam[[y, x]]);
        let up = map.forward(&as3);
        cam = Array2::from_shape_fn((ih, iw), |(y, x)| up[[y, x, 0]]);
    }
    Ok(Heatmap::new(cam))
}

/// A single-linear-layer model: its "activations" are the raw input channels
/// and its score is a weighted sum of per-channel means. The Grad-CAM of
/// this model has a closed form, which makes it the reference backbone for
/// metric tests.
#[derive(Debug, Clone)]
pub struct LinearCamModel {
    pub channel_weights: [f64; 3],
}

impl CamBackbone for LinearCamModel {
    fn cam_layers(&self) -> Vec<String> {
        vec!["input".to_string()]
    }

    fn cam_capture(
        &self,
        image: &ImageTensor,
        layer: &str,
        _target: &CamTarget,
    ) -> Result<CamCapture> {
        if layer != "input" {
            return Err(Error::argument(format!(
                "unknown layer '{layer}'; available: input"
            )));
        }
        let (h, w, _) = image.dim();
        let activations = Array3::from_shape_fn((3, h, w), |(c, y, x)| image[[y, x, c]]);
        // score = sum_c w_c * mean(channel c) => dScore/dA[c][y][x] = w_c / (h w)
        let grads = Array3::from_shape_fn((3, h, w), |(c, _, _)| {
            self.channel_weights[c] / (h * w) as f64
        });
        Ok(CamCapture { activations, grads })
    }
}
