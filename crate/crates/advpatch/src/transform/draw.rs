//! Replayable per-application transform draws.
//!
//! One [`RandomDraw`] freezes every stochastic parameter used when a patch is
//! applied to an image: per-box rotation, translation and TPS offsets, plus
//! the global lighting jitter. Draws derive from `(seed, step, image index,
//! box index)` streams, so any sample from any run can be reconstructed.

use ndarray::Array3;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::rng::{stream, StreamTag};
use crate::tensor::ImageTensor;
use crate::transform::lighting::LightingParams;
use crate::transform::TransformConfig;

/// Per-box stochastic parameters.
#[derive(Debug, Clone)]
pub struct BoxDraw {
    pub rotation_rad: f64,
    /// Offsets as fractions of the box width/height.
    pub translate: (f64, f64),
    /// TPS control offsets in patch pixels, `(g, g, 2)`; `None` disables TPS.
    pub tps_offsets: Option<Array3<f64>>,
}

impl BoxDraw {
    pub fn identity() -> Self {
        BoxDraw {
            rotation_rad: 0.0,
            translate: (0.0, 0.0),
            tps_offsets: None,
        }
    }
}

/// All stochastic parameters for one patch application to one image.
#[derive(Debug, Clone)]
pub struct RandomDraw {
    pub boxes: Vec<BoxDraw>,
    pub contrast: f64,
    pub brightness: f64,
    pub noise_std: f64,
    noise_key: Option<(u64, u64, u64)>,
}

impl RandomDraw {
    /// Deterministic draw for `(seed, step, image_index)` with `n_boxes`
    /// per-box sub-draws. Disabled stages sample identity values.
    pub fn sample(
        cfg: &TransformConfig,
        patch_dims: (usize, usize),
        seed: u64,
        step: u64,
        image_index: u64,
        n_boxes: usize,
    ) -> RandomDraw {
        let (ph, pw) = patch_dims;
        let mut boxes = Vec::with_capacity(n_boxes);
        for b in 0..n_boxes {
            let mut rng = stream(seed, StreamTag::BoxDraw, &[step, image_index, b as u64]);
            let mut draw = BoxDraw::identity();
            if cfg.enable_perspective {
                if cfg.rotation_deg > 0.0 {
                    draw.rotation_rad = rng
                        .random_range(-cfg.rotation_deg..=cfg.rotation_deg)
                        .to_radians();
                }
                if cfg.translate_frac > 0.0 {
                    draw.translate = (
                        rng.random_range(-cfg.translate_frac..=cfg.translate_frac),
                        rng.random_range(-cfg.translate_frac..=cfg.translate_frac),
                    );
                }
            }
            if cfg.enable_tps && cfg.tps_sigma > 0.0 {
                let g = cfg.tps_grid;
                let max_dx = cfg.tps_sigma * pw as f64;
                let max_dy = cfg.tps_sigma * ph as f64;
                let mut offsets = Array3::zeros((g, g, 2));
                for iy in 0..g {
                    for ix in 0..g {
                        offsets[[iy, ix, 0]] = rng.random_range(-max_dx..=max_dx);
                        offsets[[iy, ix, 1]] = rng.random_range(-max_dy..=max_dy);
                    }
                }
                draw.tps_offsets = Some(offsets);
            }
            boxes.push(draw);
        }

        let mut contrast = 1.0;
        let mut brightness = 0.0;
        let mut noise_std = 0.0;
        if cfg.enable_lighting {
            let mut rng = stream(seed, StreamTag::Lighting, &[step, image_index]);
            contrast = rng.random_range(cfg.contrast_range.0..=cfg.contrast_range.1);
            if cfg.brightness_range > 0.0 {
                brightness = rng.random_range(-cfg.brightness_range..=cfg.brightness_range);
            }
            noise_std = cfg.noise_std;
        }
        RandomDraw {
            boxes,
            contrast,
            brightness,
            noise_std,
            noise_key: Some((seed, step, image_index)),
        }
    }

    /// All-identity draw: zero rotation/translation/offsets, unit lighting.
    pub fn identity(n_boxes: usize) -> RandomDraw {
        RandomDraw {
            boxes: (0..n_boxes).map(|_| BoxDraw::identity()).collect(),
            contrast: 1.0,
            brightness: 0.0,
            noise_std: 0.0,
            noise_key: None,
        }
    }

    pub fn box_draw(&self, i: usize) -> BoxDraw {
        self.boxes.get(i).cloned().unwrap_or_else(BoxDraw::identity)
    }

    /// Materializes the lighting parameters at a given image size. The i.i.d.
    /// Gaussian noise field regenerates identically for the same draw.
    pub fn lighting_params(&self, image_dims: (usize, usize)) -> LightingParams {
        let noise = if self.noise_std > 0.0 {
            let (seed, step, image_index) = self
                .noise_key
                .expect("noise requires a sampled draw");
            let mut rng = stream(seed, StreamTag::NoiseField, &[step, image_index]);
            let normal = Normal::new(0.0, self.noise_std).expect("valid std");
            let (h, w) = image_dims;
            Some(ImageTensor::from_shape_simple_fn((h, w, 3), || {
                normal.sample(&mut rng)
            }))
        } else {
            None
        };
        LightingParams {
            contrast: self.contrast,
            brightness: self.brightness,
            noise,
        }
    }
}
