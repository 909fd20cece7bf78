//! Distance-dependent Gaussian blur.
//!
//! Smaller (farther) people get a wider kernel: `sigma = gain * (1/h - 1)`
//! where `h` is the box height as a fraction of the image. A full-height box
//! (`h >= 1`) is left untouched. Borders reflect symmetrically.

use ndarray::Array3;

use crate::error::{Error, Result};
use crate::patch::Patch;
use crate::tensor::ImageTensor;

/// Blur width for a box occupying `box_height_frac` of the image height.
pub fn blur_sigma(box_height_frac: f64, gain: f64) -> Result<f64> {
    if !(box_height_frac > 0.0) {
        return Err(Error::argument(format!(
            "box height fraction must be positive, got {box_height_frac}"
        )));
    }
    if box_height_frac >= 1.0 {
        return Ok(0.0);
    }
    Ok(gain * (1.0 / box_height_frac - 1.0))
}

/// Normalized 1-D Gaussian taps; length `2 * ceil(3 sigma) + 1`, or `[1]`
/// when sigma is zero.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    if sigma <= 0.0 {
        return vec![1.0];
    }
    let r = (3.0 * sigma).ceil() as usize;
    let mut k: Vec<f64> = (0..=2 * r)
        .map(|i| {
            let d = i as f64 - r as f64;
            (-d * d / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let sum: f64 = k.iter().sum();
    for v in &mut k {
        *v /= sum;
    }
    k
}

fn reflect(mut i: i64, n: i64) -> usize {
    // symmetric reflection: -1 -> 0, -2 -> 1, n -> n-1, ...
    loop {
        if i < 0 {
            i = -i - 1;
        } else if i >= n {
            i = 2 * n - 1 - i;
        } else {
            return i as usize;
        }
    }
}

fn convolve_axis(img: &ImageTensor, kernel: &[f64], axis: usize) -> ImageTensor {
    let (h, w, c) = img.dim();
    let r = (kernel.len() / 2) as i64;
    let mut out = Array3::zeros((h, w, c));
    let n = if axis == 0 { h as i64 } else { w as i64 };
    for y in 0..h {
        for x in 0..w {
            for ch in 0..c {
                let mut acc = 0.0;
                for (k, wgt) in kernel.iter().enumerate() {
                    let off = k as i64 - r;
                    let (sy, sx) = if axis == 0 {
                        (reflect(y as i64 + off, n), x)
                    } else {
                        (y, reflect(x as i64 + off, n))
                    };
                    acc += img[[sy, sx, ch]] * wgt;
                }
                out[[y, x, ch]] = acc;
            }
        }
    }
    out
}

fn convolve_axis_adjoint(grad: &ImageTensor, kernel: &[f64], axis: usize) -> ImageTensor {
    let (h, w, c) = grad.dim();
    let r = (kernel.len() / 2) as i64;
    let mut out = Array3::zeros((h, w, c));
    let n = if axis == 0 { h as i64 } else { w as i64 };
    for y in 0..h {
        for x in 0..w {
            for ch in 0..c {
                let g = grad[[y, x, ch]];
                if g == 0.0 {
                    continue;
                }
                for (k, wgt) in kernel.iter().enumerate() {
                    let off = k as i64 - r;
                    let (sy, sx) = if axis == 0 {
                        (reflect(y as i64 + off, n), x)
                    } else {
                        (y, reflect(x as i64 + off, n))
                    };
                    out[[sy, sx, ch]] += g * wgt;
                }
            }
        }
    }
    out
}

/// Separable Gaussian blur (rows, then columns).
pub fn blur_forward(img: &ImageTensor, kernel: &[f64]) -> ImageTensor {
    if kernel.len() == 1 {
        return img.clone();
    }
    let rows = convolve_axis(img, kernel, 1);
    convolve_axis(&rows, kernel, 0)
}

/// Exact adjoint of [`blur_forward`] (columns, then rows, transposed).
pub fn blur_backward(grad: &ImageTensor, kernel: &[f64]) -> ImageTensor {
    if kernel.len() == 1 {
        return grad.clone();
    }
    let cols = convolve_axis_adjoint(grad, kernel, 0);
    convolve_axis_adjoint(&cols, kernel, 1)
}

/// Blurs the patch as seen at the distance implied by the box height.
pub fn distance_blur(patch: &Patch, box_height_frac: f64, gain: f64) -> Result<Patch> {
    let sigma = blur_sigma(box_height_frac, gain)?;
    let kernel = gaussian_kernel(sigma);
    if kernel.len() == 1 {
        return Ok(patch.clone());
    }
    let mut out = blur_forward(patch.pixels(), &kernel);
    crate::tensor::clamp01(&mut out);
    Patch::new(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::patch::InitMode;
    use crate::rng::{stream, StreamTag};
    use ndarray::Array3;
    use rand::Rng;

    #[test]
    fn full_height_box_is_identity() {
        let p = Patch::init(6, 6, InitMode::RandomUniform, 2).unwrap();
        let q = distance_blur(&p, 1.0, 1.5).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn smaller_boxes_blur_more() {
        let s1 = blur_sigma(0.5, 1.5).unwrap();
        let s2 = blur_sigma(0.25, 1.5).unwrap();
        let s3 = blur_sigma(0.1, 1.5).unwrap();
        assert!(s1 < s2 && s2 < s3);
        assert!(blur_sigma(0.0, 1.5).is_err());
        assert!(blur_sigma(-0.2, 1.5).is_err());
    }

    #[test]
    fn constant_patch_unchanged() {
        let p = Patch::init(5, 5, InitMode::Gray, 0).unwrap();
        let q = distance_blur(&p, 0.3, 1.5).unwrap();
        for v in q.pixels().iter() {
            assert!((v - 0.5).abs() < 1e-12);
        }
    }

    // Brute-force 2-D convolution with the same symmetric reflection.
    fn conv2d_oracle(img: &ImageTensor, kernel: &[f64]) -> ImageTensor {
        let (h, w, c) = img.dim();
        let r = (kernel.len() / 2) as i64;
        let mut out = Array3::zeros((h, w, c));
        for y in 0..h {
            for x in 0..w {
                for ch in 0..c {
                    let mut acc = 0.0;
                    for ky in 0..kernel.len() {
                        for kx in 0..kernel.len() {
                            let sy = reflect(y as i64 + ky as i64 - r, h as i64);
                            let sx = reflect(x as i64 + kx as i64 - r, w as i64);
                            acc += img[[sy, sx, ch]] * kernel[ky] * kernel[kx];
                        }
                    }
                    out[[y, x, ch]] = acc;
                }
            }
        }
        out
    }

    #[test]
    fn impulse_matches_direct_convolution_oracle() {
        let mut v = Array3::zeros((5, 5, 3));
        v[[2, 2, 0]] = 1.0;
        v[[2, 2, 1]] = 1.0;
        v[[2, 2, 2]] = 1.0;
        let p = Patch::new(v).unwrap();
        let sigma = blur_sigma(0.5, 1.5).unwrap();
        let kernel = gaussian_kernel(sigma);
        let got = blur_forward(p.pixels(), &kernel);
        let want = conv2d_oracle(p.pixels(), &kernel);
        for (a, b) in got.iter().zip(want.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn backward_is_the_transpose() {
        let mut rng = stream(8, StreamTag::Synthetic, &[2]);
        let kernel = gaussian_kernel(1.2);
        let u = Array3::from_shape_simple_fn((6, 7, 3), || rng.random_range(-1.0..1.0));
        let v = Array3::from_shape_simple_fn((6, 7, 3), || rng.random_range(-1.0..1.0));
        let au = blur_forward(&u, &kernel);
        let atv = blur_backward(&v, &kernel);
        let lhs: f64 = au.iter().zip(v.iter()).map(|(a, b)| a * b).sum();
        let rhs: f64 = u.iter().zip(atv.iter()).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12, "{lhs} vs {rhs}");
    }

    #[test]
    fn kernel_is_normalized_and_odd() {
        for sigma in [0.0, 0.4, 1.0, 3.7] {
            let k = gaussian_kernel(sigma);
            assert_eq!(k.len() % 2, 1);
            let sum: f64 = k.iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
        }
    }
}
