//! The trainable patch parameter.

use std::path::Path;

use ndarray::Array3;
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::{stream, StreamTag};
use crate::tensor::{self, ImageTensor};

/// How to fill a freshly created patch.
#[derive(Debug, Clone, PartialEq)]
pub enum InitMode {
    /// I.i.d. `U[0, 1]` per channel under the given seed.
    RandomUniform,
    /// Constant 0.5 everywhere.
    Gray,
    /// Decode an existing PNG; it must match the requested dimensions.
    FromFile(std::path::PathBuf),
}

/// The optimized `H x W x 3` image, every channel in `[0, 1]`.
///
/// This is the sole trainable parameter set. Dimensions are at least 2x2 so
/// the smoothness loss always has neighbor pairs to look at.
#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    pixels: ImageTensor,
}

impl Patch {
    /// Builds a patch, validating dimensions and value range.
    pub fn new(pixels: ImageTensor) -> Result<Self> {
        let (h, w, c) = pixels.dim();
        if c != 3 {
            return Err(Error::argument(format!("patch needs 3 channels, got {c}")));
        }
        if h < 2 || w < 2 {
            return Err(Error::argument(format!(
                "patch must be at least 2x2, got {h}x{w}"
            )));
        }
        if !tensor::in_unit_range(&pixels) {
            return Err(Error::argument("patch values must lie in [0, 1]"));
        }
        Ok(Patch { pixels })
    }

    pub fn init(height: usize, width: usize, mode: InitMode, seed: u64) -> Result<Self> {
        if height < 2 || width < 2 {
            return Err(Error::argument(format!(
                "patch must be at least 2x2, got {height}x{width}"
            )));
        }
        let pixels = match mode {
            InitMode::Gray => Array3::from_elem((height, width, 3), 0.5),
            InitMode::RandomUniform => {
                let mut rng = stream(seed, StreamTag::PatchInit, &[height as u64, width as u64]);
                Array3::from_shape_simple_fn((height, width, 3), || rng.random_range(0.0..1.0))
            }
            InitMode::FromFile(path) => {
                let img = tensor::load_png(&path)?;
                let (h, w, _) = img.dim();
                if h != height || w != width {
                    return Err(Error::input(format!(
                        "patch file {} is {h}x{w}, expected {height}x{width}",
                        path.display()
                    )));
                }
                img
            }
        };
        Patch::new(pixels)
    }

    pub fn height(&self) -> usize {
        self.pixels.dim().0
    }

    pub fn width(&self) -> usize {
        self.pixels.dim().1
    }

    pub fn pixels(&self) -> &ImageTensor {
        &self.pixels
    }

    /// Mutable pixel access for optimizer updates. Callers must re-clamp.
    pub fn pixels_mut(&mut self) -> &mut ImageTensor {
        &mut self.pixels
    }

    /// Clips every channel into `[0, 1]`; values already in range are untouched.
    pub fn clamp(&mut self) {
        tensor::clamp01(&mut self.pixels);
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        tensor::save_png(&self.pixels, path)
    }

    pub fn load_png(path: &Path) -> Result<Self> {
        Patch::new(tensor::load_png(path)?)
    }
}
