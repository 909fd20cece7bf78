//! Bilinear sampling maps shared by the warp, placement, and resize stages.
//!
//! Each stage precomputes, per output pixel, four taps into the input image.
//! Applying a map is then a sparse linear operation, and the gradient pass is
//! its exact transpose — no numerical daylight between forward and backward.

use ndarray::Array3;

use crate::tensor::ImageTensor;

/// Four bilinear taps: `(flattened input index, weight)`.
pub type Taps = [(u32, f64); 4];

/// Computes edge-clamped bilinear taps at continuous pixel-center
/// coordinates `(sx, sy)` of an `h x w` grid.
pub fn bilinear_taps(sx: f64, sy: f64, h: usize, w: usize) -> Taps {
    let x0f = sx.floor();
    let y0f = sy.floor();
    let fx = sx - x0f;
    let fy = sy - y0f;
    let clamp = |v: f64, hi: usize| -> usize {
        if v < 0.0 {
            0
        } else if v as usize >= hi {
            hi - 1
        } else {
            v as usize
        }
    };
    let x0 = clamp(x0f, w);
    let x1 = clamp(x0f + 1.0, w);
    let y0 = clamp(y0f, h);
    let y1 = clamp(y0f + 1.0, h);
    let idx = |y: usize, x: usize| (y * w + x) as u32;
    [
        (idx(y0, x0), (1.0 - fx) * (1.0 - fy)),
        (idx(y0, x1), fx * (1.0 - fy)),
        (idx(y1, x0), (1.0 - fx) * fy),
        (idx(y1, x1), fx * fy),
    ]
}

/// A dense per-output-pixel sampling map (one taps entry per output pixel).
#[derive(Debug, Clone)]
pub struct SampleMap {
    pub in_dims: (usize, usize),
    pub out_dims: (usize, usize),
    taps: Vec<Taps>,
}

impl SampleMap {
    pub fn new(in_dims: (usize, usize), out_dims: (usize, usize), taps: Vec<Taps>) -> Self {
        debug_assert_eq!(taps.len(), out_dims.0 * out_dims.1);
        SampleMap {
            in_dims,
            out_dims,
            taps,
        }
    }

    /// Identity map (single unit tap per pixel); forward copies bit-for-bit.
    pub fn identity(dims: (usize, usize)) -> Self {
        let (h, w) = dims;
        let taps = (0..h * w)
            .map(|i| [(i as u32, 1.0), (0, 0.0), (0, 0.0), (0, 0.0)])
            .collect();
        SampleMap::new(dims, dims, taps)
    }

    pub fn forward(&self, input: &ImageTensor) -> ImageTensor {
        let (ih, iw, c) = input.dim();
        debug_assert_eq!((ih, iw), self.in_dims);
        let (oh, ow) = self.out_dims;
        let flat = input.as_slice().expect("contiguous input");
        let mut out = Array3::zeros((oh, ow, c));
        {
            let out_flat = out.as_slice_mut().expect("contiguous output");
            for (o, taps) in self.taps.iter().enumerate() {
                for ch in 0..c {
                    let mut acc = 0.0;
                    for (idx, wgt) in taps {
                        acc += flat[*idx as usize * c + ch] * wgt;
                    }
                    out_flat[o * c + ch] = acc;
                }
            }
        }
        out
    }

    /// Transpose: scatters output-pixel gradients back onto input pixels.
    pub fn backward(&self, grad_out: &ImageTensor) -> ImageTensor {
        let (oh, ow, c) = grad_out.dim();
        debug_assert_eq!((oh, ow), self.out_dims);
        let (ih, iw) = self.in_dims;
        let g = grad_out.as_slice().expect("contiguous grad");
        let mut out = Array3::zeros((ih, iw, c));
        {
            let out_flat = out.as_slice_mut().expect("contiguous output");
            for (o, taps) in self.taps.iter().enumerate() {
                for ch in 0..c {
                    let go = g[o * c + ch];
                    if go != 0.0 {
                        for (idx, wgt) in taps {
                            out_flat[*idx as usize * c + ch] += go * wgt;
                        }
                    }
                }
            }
        }
        out
    }
}

/// Bilinear resize map from `in_dims` to `out_dims` (half-pixel centers).
pub fn resize_map(in_dims: (usize, usize), out_dims: (usize, usize)) -> SampleMap {
    if in_dims == out_dims {
        return SampleMap::identity(in_dims);
    }
    let (ih, iw) = in_dims;
    let (oh, ow) = out_dims;
    let sy_scale = ih as f64 / oh as f64;
    let sx_scale = iw as f64 / ow as f64;
    let mut taps = Vec::with_capacity(oh * ow);
    for oy in 0..oh {
        let sy = (oy as f64 + 0.5) * sy_scale - 0.5;
        for ox in 0..ow {
            let sx = (ox as f64 + 0.5) * sx_scale - 0.5;
            taps.push(bilinear_taps(sx, sy, ih, iw));
        }
    }
    SampleMap::new(in_dims, out_dims, taps)
}
