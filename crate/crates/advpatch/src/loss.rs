//! Patch-intrinsic losses: printability, smoothness, and the total-energy
//! combiner.

use ndarray::Array3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::palette::PrintPalette;
use crate::patch::Patch;
use crate::tensor::ImageTensor;

/// Weights for the two patch-intrinsic loss terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    /// Printability weight.
    pub alpha: f64,
    /// Smoothness weight.
    pub beta: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            alpha: 0.01,
            beta: 0.165,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        if self.alpha < 0.0 || self.beta < 0.0 || !self.alpha.is_finite() || !self.beta.is_finite()
        {
            return Err(Error::argument(format!(
                "loss weights must be finite and nonnegative, got alpha={} beta={}",
                self.alpha, self.beta
            )));
        }
        Ok(())
    }
}

/// Non-printability score: per pixel, the Euclidean RGB distance to the
/// nearest palette color, summed over the patch.
///
/// Zero exactly when every pixel equals some palette color. Ties in the
/// nearest-color minimum resolve to the first color in palette order.
pub fn nps_loss(patch: &Patch, palette: &PrintPalette) -> Result<f64> {
    if palette.is_empty() {
        return Err(Error::argument("palette must be nonempty"));
    }
    Ok(nps_loss_grad(patch, palette)?.0)
}

/// NPS value plus its gradient w.r.t. patch pixels.
pub fn nps_loss_grad(patch: &Patch, palette: &PrintPalette) -> Result<(f64, ImageTensor)> {
    if palette.is_empty() {
        return Err(Error::argument("palette must be nonempty"));
    }
    let p = patch.pixels();
    let (h, w, _) = p.dim();
    let mut grad = Array3::zeros((h, w, 3));
    let mut total = 0.0;
    for y in 0..h {
        for x in 0..w {
            let px = [p[[y, x, 0]], p[[y, x, 1]], p[[y, x, 2]]];
            let mut best = f64::INFINITY;
            let mut best_color = palette.colors()[0];
            for c in palette.colors() {
                let d0 = px[0] - c[0];
                let d1 = px[1] - c[1];
                let d2 = px[2] - c[2];
                let d = (d0 * d0 + d1 * d1 + d2 * d2).sqrt();
                if d < best {
                    best = d;
                    best_color = *c;
                }
            }
            total += best;
            if best > 0.0 {
                for ch in 0..3 {
                    grad[[y, x, ch]] = (px[ch] - best_color[ch]) / best;
                }
            }
        }
    }
    Ok((total, grad))
}

/// Smoothness (total-variation style) loss.
///
/// Per channel, sums `sqrt(d_down^2 + d_right^2)` over all pixels, where a
/// difference whose neighbor falls outside the patch contributes zero. Zero
/// for constant patches and invariant under a global intensity shift.
pub fn smoothness_loss(patch: &Patch) -> f64 {
    smoothness_loss_grad(patch).0
}

/// Smoothness value plus its gradient w.r.t. patch pixels.
///
/// Where both neighbor differences vanish the term is non-differentiable;
/// the zero subgradient is used there.
pub fn smoothness_loss_grad(patch: &Patch) -> (f64, ImageTensor) {
    let p = patch.pixels();
    let (h, w, c) = p.dim();
    let mut grad = Array3::zeros((h, w, c));
    let mut total = 0.0;
    for ch in 0..c {
        for y in 0..h {
            for x in 0..w {
                let v = p[[y, x, ch]];
                let dd = if y + 1 < h { v - p[[y + 1, x, ch]] } else { 0.0 };
                let dr = if x + 1 < w { v - p[[y, x + 1, ch]] } else { 0.0 };
                let r = (dd * dd + dr * dr).sqrt();
                total += r;
                if r > 0.0 {
                    grad[[y, x, ch]] += (dd + dr) / r;
                    if y + 1 < h {
                        grad[[y + 1, x, ch]] -= dd / r;
                    }
                    if x + 1 < w {
                        grad[[y, x + 1, ch]] -= dr / r;
                    }
                }
            }
        }
    }
    (total, grad)
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    (s, err)
}

/// Total training energy: `l_patch + alpha * l_nps + beta * l_smooth`.
///
/// The three terms are combined with a compensated sum so the result is the
/// correctly rounded value of the exact triple sum.
pub fn total_energy(l_patch: f64, l_nps: f64, l_smooth: f64, w: &LossWeights) -> f64 {
    let a = w.alpha * l_nps;
    let b = w.beta * l_smooth;
    let (s1, e1) = two_sum(a, b);
    let (s2, e2) = two_sum(l_patch, s1);
    s2 + (e1 + e2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::patch::InitMode;
    use ndarray::Array3;

    fn patch_from(values: Array3<f64>) -> Patch {
        Patch::new(values).unwrap()
    }

    #[test]
    fn nps_zero_on_palette_membership() {
        let palette = PrintPalette::new(vec![[0.2, 0.4, 0.6], [1.0, 0.0, 0.0]]).unwrap();
        let mut v = Array3::zeros((2, 2, 3));
        for y in 0..2 {
            for x in 0..2 {
                let c = if (y + x) % 2 == 0 {
                    [0.2, 0.4, 0.6]
                } else {
                    [1.0, 0.0, 0.0]
                };
                for ch in 0..3 {
                    v[[y, x, ch]] = c[ch];
                }
            }
        }
        assert_eq!(nps_loss(&patch_from(v), &palette).unwrap(), 0.0);
    }

    #[test]
    fn nps_equidistant_gray_case() {
        // Every pixel (0.5, 0.5, 0.5) against {black, white}: distance per
        // pixel is sqrt(3 * 0.25) either way; four pixels total.
        let palette = PrintPalette::new(vec![[0.0; 3], [1.0; 3]]).unwrap();
        let p = Patch::init(2, 2, InitMode::Gray, 0).unwrap();
        let got = nps_loss(&p, &palette).unwrap();
        let expected = 4.0 * (3.0f64 * 0.25).sqrt();
        assert!((got - expected).abs() < 1e-12, "{got} vs {expected}");
        assert!((expected - 3.4641016151377544).abs() < 1e-12);
    }

    #[test]
    fn nps_grad_matches_finite_differences() {
        let palette =
            PrintPalette::new(vec![[0.1, 0.9, 0.3], [0.8, 0.2, 0.7], [0.5, 0.5, 0.1]]).unwrap();
        let p = Patch::init(4, 4, InitMode::RandomUniform, 11).unwrap();
        let (_, grad) = nps_loss_grad(&p, &palette).unwrap();
        let h = 1e-4;
        for &(y, x, c) in &[(0usize, 0usize, 0usize), (1, 2, 1), (3, 3, 2), (2, 1, 0)] {
            let mut plus = p.clone();
            plus.pixels_mut()[[y, x, c]] += h;
            let mut minus = p.clone();
            minus.pixels_mut()[[y, x, c]] -= h;
            let fd = (nps_loss(&plus, &palette).unwrap() - nps_loss(&minus, &palette).unwrap())
                / (2.0 * h);
            let g = grad[[y, x, c]];
            let denom = fd.abs().max(1e-8);
            assert!(
                ((g - fd) / denom).abs() <= 1e-3,
                "grad {g} vs fd {fd} at ({y},{x},{c})"
            );
        }
    }

    #[test]
    fn smoothness_zero_on_constant() {
        for v in [0.0, 0.3, 1.0] {
            let p = patch_from(Array3::from_elem((5, 7, 3), v));
            assert_eq!(smoothness_loss(&p), 0.0);
        }
    }

    // Brute-force double-loop oracle with the same boundary convention.
    fn smoothness_oracle(p: &Patch) -> f64 {
        let t = p.pixels();
        let (h, w, c) = t.dim();
        let mut total = 0.0;
        for ch in 0..c {
            for i in 0..h {
                for j in 0..w {
                    let dd = if i + 1 < h {
                        t[[i, j, ch]] - t[[i + 1, j, ch]]
                    } else {
                        0.0
                    };
                    let dr = if j + 1 < w {
                        t[[i, j, ch]] - t[[i, j + 1, ch]]
                    } else {
                        0.0
                    };
                    total += (dd * dd + dr * dr).sqrt();
                }
            }
        }
        total
    }

    #[test]
    fn smoothness_matches_double_loop_oracle() {
        // Single-channel-style 2x2 grid [[0,1],[0,1]] replicated on all
        // channels; the oracle computes 2.0 per channel.
        let mut v = Array3::zeros((2, 2, 3));
        for ch in 0..3 {
            v[[0, 1, ch]] = 1.0;
            v[[1, 1, ch]] = 1.0;
        }
        let p = patch_from(v);
        let expected = smoothness_oracle(&p);
        assert_eq!(expected, 6.0);
        assert_eq!(smoothness_loss(&p), expected);

        let q = Patch::init(7, 5, InitMode::RandomUniform, 3).unwrap();
        let got = smoothness_loss(&q);
        let want = smoothness_oracle(&q);
        assert!((got - want).abs() < 1e-12);
    }

    #[test]
    fn smoothness_is_shift_invariant() {
        let base = Patch::init(6, 6, InitMode::RandomUniform, 21).unwrap();
        let scaled = patch_from(base.pixels().mapv(|v| v * 0.9));
        let shifted = patch_from(scaled.pixels().mapv(|v| v + 0.1));
        assert!((smoothness_loss(&scaled) - smoothness_loss(&shifted)).abs() < 1e-9);
    }

    #[test]
    fn smoothness_grad_matches_finite_differences() {
        let p = Patch::init(5, 5, InitMode::RandomUniform, 17).unwrap();
        let (_, grad) = smoothness_loss_grad(&p);
        let h = 1e-4;
        for &(y, x, c) in &[(0usize, 0usize, 0usize), (2, 3, 1), (4, 4, 2), (1, 1, 0)] {
            let mut plus = p.clone();
            plus.pixels_mut()[[y, x, c]] += h;
            let mut minus = p.clone();
            minus.pixels_mut()[[y, x, c]] -= h;
            let fd = (smoothness_loss(&plus) - smoothness_loss(&minus)) / (2.0 * h);
            let g = grad[[y, x, c]];
            let denom = fd.abs().max(1e-8);
            assert!(
                ((g - fd) / denom).abs() <= 1e-3,
                "grad {g} vs fd {fd} at ({y},{x},{c})"
            );
        }
    }

    #[test]
    fn total_energy_combines_exactly() {
        let w = LossWeights::default();
        assert_eq!(total_energy(1.0, 0.0, 0.0, &w), 1.0);
        assert_eq!(total_energy(1.0, 2.0, 3.0, &w), 1.515);
        let off = LossWeights {
            alpha: 0.0,
            beta: 0.0,
        };
        assert_eq!(total_energy(0.7, 9.0, 9.0, &off), 0.7);
    }
}
