//! Patch placement: scale to the person box, rotate, translate, composite.

use ndarray::{Array2, Array3};

use crate::bbox::BoundingBox;
use crate::patch::Patch;
use crate::tensor::ImageTensor;
use crate::transform::sampling::{bilinear_taps, Taps};

/// Geometry of one placed patch: which image pixels it owns and where each
/// one samples the (blurred, warped) patch.
#[derive(Debug, Clone)]
pub struct PlacedPatch {
    pub patch_dims: (usize, usize),
    pub image_dims: (usize, usize),
    /// `(flattened image pixel index, patch-space bilinear taps)`
    pub covered: Vec<(u32, Taps)>,
}

impl PlacedPatch {
    pub fn is_empty(&self) -> bool {
        self.covered.is_empty()
    }

    /// Binary mask, 1 exactly where patch pixels land.
    pub fn mask(&self) -> Array2<f64> {
        let (h, w) = self.image_dims;
        let mut m = Array2::zeros((h, w));
        for (idx, _) in &self.covered {
            let i = *idx as usize;
            m[[i / w, i % w]] = 1.0;
        }
        m
    }

    /// Samples the patch into an image-sized layer (zero outside the mask).
    pub fn layer(&self, patch: &ImageTensor) -> ImageTensor {
        let (h, w) = self.image_dims;
        let flat = patch.as_slice().expect("contiguous patch");
        let mut out = Array3::zeros((h, w, 3));
        for (idx, taps) in &self.covered {
            let i = *idx as usize;
            let (y, x) = (i / w, i % w);
            for c in 0..3 {
                let mut acc = 0.0;
                for (t, wgt) in taps {
                    acc += flat[*t as usize * 3 + c] * wgt;
                }
                out[[y, x, c]] = acc;
            }
        }
        out
    }

    /// Scatters image-space gradients at covered pixels back onto the patch.
    pub fn backward(&self, grad_image: &ImageTensor) -> ImageTensor {
        let (ph, pw) = self.patch_dims;
        let (_, w) = self.image_dims;
        let mut out = Array3::zeros((ph, pw, 3));
        let flat = out.as_slice_mut().expect("contiguous grad");
        for (idx, taps) in &self.covered {
            let i = *idx as usize;
            let (y, x) = (i / w, i % w);
            for c in 0..3 {
                let g = grad_image[[y, x, c]];
                if g != 0.0 {
                    for (t, wgt) in taps {
                        flat[*t as usize * 3 + c] += g * wgt;
                    }
                }
            }
        }
        out
    }
}

/// Computes placement geometry for one box.
///
/// The patch is scaled so its width covers `patch_scale` of the box height
/// (in pixels), rotated by `rotation_rad`, and shifted from the box center by
/// `translate` fractions of the box size. Coverage is decided half-open in
/// the patch's local frame, so an axis-aligned placement owns exactly
/// `target_w * target_h` pixels. Degenerate boxes yield an empty placement.
pub fn place_map(
    patch_dims: (usize, usize),
    bbox: &BoundingBox,
    image_dims: (usize, usize),
    rotation_rad: f64,
    translate: (f64, f64),
    patch_scale: f64,
) -> PlacedPatch {
    let (ph, pw) = patch_dims;
    let (ih, iw) = image_dims;
    let empty = PlacedPatch {
        patch_dims,
        image_dims,
        covered: Vec::new(),
    };

    let bw = bbox.w * iw as f64;
    let bh = bbox.h * ih as f64;
    if bw < 1.0 || bh < 1.0 {
        return empty;
    }
    let target_w = (patch_scale * bh).round().max(0.0) as i64;
    if target_w < 1 {
        return empty;
    }
    let target_h = ((target_w as f64) * ph as f64 / pw as f64).round().max(1.0) as i64;
    let (tw, th) = (target_w as f64, target_h as f64);

    let cx = bbox.cx * iw as f64 + translate.0 * bw;
    let cy = bbox.cy * ih as f64 + translate.1 * bh;
    let (s, c) = rotation_rad.sin_cos();

    // bounding rectangle of the rotated target rect
    let half_x = 0.5 * (tw * c.abs() + th * s.abs());
    let half_y = 0.5 * (tw * s.abs() + th * c.abs());
    let x0 = ((cx - half_x).floor() as i64).max(0);
    let x1 = ((cx + half_x).ceil() as i64).min(iw as i64);
    let y0 = ((cy - half_y).floor() as i64).max(0);
    let y1 = ((cy + half_y).ceil() as i64).min(ih as i64);

    let mut covered = Vec::new();
    for iy in y0..y1 {
        for ix in x0..x1 {
            let px = ix as f64 + 0.5 - cx;
            let py = iy as f64 + 0.5 - cy;
            // rotate back into the patch's local frame
            let rx = c * px + s * py;
            let ry = -s * px + c * py;
            if rx < -tw / 2.0 || rx >= tw / 2.0 || ry < -th / 2.0 || ry >= th / 2.0 {
                continue;
            }
            let sx = (rx + tw / 2.0) / tw * pw as f64 - 0.5;
            let sy = (ry + th / 2.0) / th * ph as f64 - 0.5;
            covered.push((
                (iy as usize * iw + ix as usize) as u32,
                bilinear_taps(sx, sy, ph, pw),
            ));
        }
    }
    PlacedPatch {
        patch_dims,
        image_dims,
        covered,
    }
}

/// Spec-level operation: returns the image-sized patch layer and its mask.
pub fn place_patch(
    patch: &Patch,
    bbox: &BoundingBox,
    image_dims: (usize, usize),
    rotation_rad: f64,
    translate: (f64, f64),
    patch_scale: f64,
) -> (ImageTensor, Array2<f64>) {
    let map = place_map(
        (patch.height(), patch.width()),
        bbox,
        image_dims,
        rotation_rad,
        translate,
        patch_scale,
    );
    (map.layer(patch.pixels()), map.mask())
}
