//! Thin-plate-spline warping of the patch.
//!
//! A square control grid is laid over the patch; each control point is nudged
//! by a small offset and the spline interpolates the displacement everywhere
//! else, which is a decent stand-in for cloth folds. The warp resamples with
//! edge-clamped bilinear taps, so out-of-support pixels replicate the border.

use nalgebra::DMatrix;
use ndarray::Array3;

use crate::error::{Error, Result};
use crate::patch::Patch;
use crate::transform::sampling::{bilinear_taps, SampleMap};

fn kernel(r2: f64) -> f64 {
    // U(r) = r^2 ln r, continuously extended by 0 at r = 0.
    if r2 <= 0.0 {
        0.0
    } else {
        0.5 * r2 * r2.ln()
    }
}

/// Builds the backward sampling map for a TPS warp of an `h x w` patch.
///
/// `offsets` has shape `(g, g, 2)` holding `(dx, dy)` in pixels per control
/// point. The spline is fitted on displaced landmarks so that sampling roves
/// from output coordinates back into the source patch.
pub fn tps_map(h: usize, w: usize, offsets: &Array3<f64>) -> Result<SampleMap> {
    let (gy, gx, two) = offsets.dim();
    if gy != gx || two != 2 || gy < 2 {
        return Err(Error::argument(format!(
            "control offsets must be g x g x 2 with g >= 2, got {gy} x {gx} x {two}"
        )));
    }
    if offsets.iter().any(|v| !v.is_finite()) {
        return Err(Error::argument("control offsets must be finite"));
    }
    if offsets.iter().all(|v| *v == 0.0) {
        return Ok(SampleMap::identity((h, w)));
    }

    let g = gy;
    let n = g * g;
    // source landmarks on the pixel-center grid, targets displaced by offsets
    let mut src = Vec::with_capacity(n);
    let mut dst = Vec::with_capacity(n);
    for iy in 0..g {
        for ix in 0..g {
            let sx = ix as f64 * (w as f64 - 1.0) / (g as f64 - 1.0);
            let sy = iy as f64 * (h as f64 - 1.0) / (g as f64 - 1.0);
            src.push((sx, sy));
            dst.push((sx + offsets[[iy, ix, 0]], sy + offsets[[iy, ix, 1]]));
        }
    }

    // Fit f with f(dst_k) = src_k: [K P; P^T 0] [c; a] = [src; 0]
    let dim = n + 3;
    let mut a = DMatrix::<f64>::zeros(dim, dim);
    let mut rhs = DMatrix::<f64>::zeros(dim, 2);
    for i in 0..n {
        for j in 0..n {
            let dx = dst[i].0 - dst[j].0;
            let dy = dst[i].1 - dst[j].1;
            a[(i, j)] = kernel(dx * dx + dy * dy);
        }
        a[(i, n)] = 1.0;
        a[(i, n + 1)] = dst[i].0;
        a[(i, n + 2)] = dst[i].1;
        a[(n, i)] = 1.0;
        a[(n + 1, i)] = dst[i].0;
        a[(n + 2, i)] = dst[i].1;
        rhs[(i, 0)] = src[i].0;
        rhs[(i, 1)] = src[i].1;
    }
    let lu = a.lu();
    let sol = lu
        .solve(&rhs)
        .ok_or_else(|| Error::argument("degenerate TPS control configuration"))?;

    let mut taps = Vec::with_capacity(h * w);
    for oy in 0..h {
        for ox in 0..w {
            let (qx, qy) = (ox as f64, oy as f64);
            let mut sx = sol[(n, 0)] + sol[(n + 1, 0)] * qx + sol[(n + 2, 0)] * qy;
            let mut sy = sol[(n, 1)] + sol[(n + 1, 1)] * qx + sol[(n + 2, 1)] * qy;
            for (k, d) in dst.iter().enumerate() {
                let dx = qx - d.0;
                let dy = qy - d.1;
                let u = kernel(dx * dx + dy * dy);
                sx += sol[(k, 0)] * u;
                sy += sol[(k, 1)] * u;
            }
            taps.push(bilinear_taps(sx, sy, h, w));
        }
    }
    Ok(SampleMap::new((h, w), (h, w), taps))
}

/// Warps the patch by the control offsets. Zero offsets copy bit-for-bit.
pub fn tps_warp(patch: &Patch, offsets: &Array3<f64>) -> Result<Patch> {
    let map = tps_map(patch.height(), patch.width(), offsets)?;
    let mut out = map.forward(patch.pixels());
    crate::tensor::clamp01(&mut out);
    Patch::new(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::patch::InitMode;
    use ndarray::Array3;

    #[test]
    fn zero_offsets_are_identity_bit_for_bit() {
        let p = Patch::init(16, 16, InitMode::RandomUniform, 9).unwrap();
        let offsets = Array3::zeros((5, 5, 2));
        let q = tps_warp(&p, &offsets).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn constant_patch_stays_constant() {
        let p = Patch::init(12, 12, InitMode::Gray, 0).unwrap();
        let mut offsets = Array3::zeros((4, 4, 2));
        offsets[[1, 1, 0]] = 0.7;
        offsets[[2, 2, 1]] = -0.9;
        let q = tps_warp(&p, &offsets).unwrap();
        for v in q.pixels().iter() {
            assert!((v - 0.5).abs() < 1e-12);
        }
    }

    // Constant offsets make the fitted spline an exact translation; compare
    // against a dense edge-clamped bilinear resampling oracle.
    #[test]
    fn constant_offsets_translate_with_edge_fill() {
        let p = Patch::init(10, 10, InitMode::RandomUniform, 33).unwrap();
        let (tx, ty) = (1.25, -0.75);
        let mut offsets = Array3::zeros((5, 5, 2));
        for iy in 0..5 {
            for ix in 0..5 {
                offsets[[iy, ix, 0]] = tx;
                offsets[[iy, ix, 1]] = ty;
            }
        }
        let q = tps_warp(&p, &offsets).unwrap();
        let src = p.pixels();
        let (h, w, _) = src.dim();
        for oy in 0..h {
            for ox in 0..w {
                let taps = bilinear_taps(ox as f64 - tx, oy as f64 - ty, h, w);
                for c in 0..3 {
                    let flat = src.as_slice().unwrap();
                    let mut want = 0.0;
                    for (idx, wgt) in taps {
                        want += flat[idx as usize * 3 + c] * wgt;
                    }
                    let got = q.pixels()[[oy, ox, c]];
                    assert!(
                        (got - want).abs() < 1e-9,
                        "({oy},{ox},{c}): {got} vs {want}"
                    );
                }
            }
        }
    }

    #[test]
    fn rejects_bad_grids() {
        let p = Patch::init(8, 8, InitMode::Gray, 0).unwrap();
        assert!(tps_warp(&p, &Array3::zeros((1, 1, 2))).is_err());
        assert!(tps_warp(&p, &Array3::zeros((3, 4, 2))).is_err());
        assert!(tps_warp(&p, &Array3::zeros((3, 3, 3))).is_err());
        let mut bad = Array3::zeros((3, 3, 2));
        bad[[0, 0, 0]] = f64::NAN;
        assert!(tps_warp(&p, &bad).is_err());
    }
}
