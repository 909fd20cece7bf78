//! Image tensors and PNG round-tripping.
//!
//! Images and patches are `H x W x 3` arrays of `f64` intensities in `[0, 1]`.
//! PNG storage is 8-bit RGB: a value `v` is written as `round(v * 255)` and
//! read back as `byte / 255`.

use std::path::Path;

use ndarray::Array3;

use crate::error::{Error, Result};

/// `H x W x 3` image in `[0, 1]`.
pub type ImageTensor = Array3<f64>;

/// Clips every channel into `[0, 1]` in place.
pub fn clamp01(t: &mut ImageTensor) {
    t.mapv_inplace(|v| v.clamp(0.0, 1.0));
}

/// True when every value sits inside `[0, 1]` (NaN fails).
pub fn in_unit_range(t: &ImageTensor) -> bool {
    t.iter().all(|v| *v >= 0.0 && *v <= 1.0)
}

pub fn to_bytes(t: &ImageTensor) -> Vec<u8> {
    t.iter()
        .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect()
}

pub fn from_bytes(height: usize, width: usize, bytes: &[u8]) -> ImageTensor {
    let data: Vec<f64> = bytes.iter().map(|b| f64::from(*b) / 255.0).collect();
    Array3::from_shape_vec((height, width, 3), data).expect("byte length matches dimensions")
}

/// Writes the tensor as an 8-bit RGB PNG.
pub fn save_png(t: &ImageTensor, path: &Path) -> Result<()> {
    let (h, w, c) = t.dim();
    if c != 3 {
        return Err(Error::argument(format!("expected 3 channels, got {c}")));
    }
    let img = image::RgbImage::from_raw(w as u32, h as u32, to_bytes(t))
        .expect("raw buffer sized from dimensions");
    img.save(path).map_err(|e| Error::Image {
        path: path.to_path_buf(),
        source: e,
    })
}

/// Reads an 8-bit RGB PNG into a unit-range tensor.
pub fn load_png(path: &Path) -> Result<ImageTensor> {
    let img = image::open(path)
        .map_err(|e| Error::Image {
            path: path.to_path_buf(),
            source: e,
        })?
        .to_rgb8();
    let (w, h) = img.dimensions();
    Ok(from_bytes(h as usize, w as usize, img.as_raw()))
}
