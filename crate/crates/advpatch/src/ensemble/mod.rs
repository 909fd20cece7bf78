//! Min-max weighting of the detector ensemble.
//!
//! Detector weights live on the probability simplex. Between patch updates a
//! single projected-gradient-ascent step moves weight toward the models with
//! the highest objective energy, with a concave regularizer pulling back
//! toward the uniform point. The regularizer strength interpolates between
//! worst-case attack (`gamma = 0`) and plain averaging (`gamma -> inf`).

mod adam;
pub mod train;

pub use adam::AdamState;
pub use train::{
    train, write_checkpoint, write_log_csv, TrainConfig, TrainLogRow, TrainMode, TrainResult,
};

use crate::error::{Error, Result};

/// Weights over `K` detectors; sums to one, entries in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleWeights {
    w: Vec<f64>,
}

impl EnsembleWeights {
    /// Validates simplex membership (sum within 1e-9 of one).
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.is_empty() {
            return Err(Error::argument("weights must be nonempty"));
        }
        let sum: f64 = w.iter().sum();
        if (sum - 1.0).abs() > 1e-9 || w.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::argument(format!(
                "weights {w:?} are not on the probability simplex"
            )));
        }
        Ok(EnsembleWeights { w })
    }

    pub fn uniform(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::argument("need at least one detector"));
        }
        Ok(EnsembleWeights {
            w: vec![1.0 / k as f64; k],
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.w
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    /// Weighted combination of per-model losses.
    pub fn combine(&self, losses: &[f64]) -> Result<f64> {
        if losses.len() != self.w.len() {
            return Err(Error::argument(format!(
                "{} losses for {} weights",
                losses.len(),
                self.w.len()
            )));
        }
        Ok(self.w.iter().zip(losses).map(|(w, l)| w * l).sum())
    }
}

/// Euclidean projection onto the probability simplex (sorted-threshold
/// algorithm). Idempotent; already-feasible points pass through unchanged.
pub fn simplex_project(v: &[f64]) -> Result<EnsembleWeights> {
    if v.is_empty() {
        return Err(Error::argument("cannot project an empty vector"));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::argument("cannot project non-finite entries"));
    }
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.partial_cmp(a).expect("finite entries"));
    let mut cssv = 0.0;
    let mut rho = 0usize;
    let mut theta = 0.0;
    for (i, ui) in u.iter().enumerate() {
        cssv += ui;
        let t = (cssv - 1.0) / (i as f64 + 1.0);
        if ui - t > 0.0 {
            rho = i + 1;
            theta = t;
        }
    }
    debug_assert!(rho > 0);
    let mut w: Vec<f64> = v.iter().map(|x| (x - theta).max(0.0)).collect();
    // renormalize the active set to kill rounding drift in the sum
    let sum: f64 = w.iter().sum();
    if sum > 0.0 && (sum - 1.0).abs() > 0.0 {
        for x in &mut w {
            *x /= sum;
        }
    }
    EnsembleWeights::new(w)
}

/// Concave pull toward the uniform point: `gamma/2 * ||w - 1/K||^2`.
pub fn regularizer(w: &EnsembleWeights, gamma: f64) -> Result<f64> {
    if gamma < 0.0 || !gamma.is_finite() {
        return Err(Error::argument("gamma must be finite and nonnegative"));
    }
    let k = w.len() as f64;
    Ok(gamma / 2.0
        * w.values()
            .iter()
            .map(|wi| (wi - 1.0 / k) * (wi - 1.0 / k))
            .sum::<f64>())
}

/// The regularized inner objective `sum w_i L_i - gamma/2 ||w - 1/K||^2`.
pub fn inner_objective(w: &EnsembleWeights, losses: &[f64], gamma: f64) -> Result<f64> {
    Ok(w.combine(losses)? - regularizer(w, gamma)?)
}

/// One projected-gradient-ascent step on the weights:
/// `proj(w + nu * (L - gamma * (w - 1/K)))`.
///
/// An infinite `gamma` short-circuits to the limit maximizer, the uniform
/// point, which is exactly the average-ensemble behavior.
pub fn inner_max_step(
    w: &EnsembleWeights,
    losses: &[f64],
    nu: f64,
    gamma: f64,
) -> Result<EnsembleWeights> {
    if losses.len() != w.len() {
        return Err(Error::argument(format!(
            "{} losses for {} weights",
            losses.len(),
            w.len()
        )));
    }
    if losses.iter().any(|l| !l.is_finite()) {
        return Err(Error::argument("losses must be finite"));
    }
    if !(nu > 0.0) {
        return Err(Error::argument("nu must be positive"));
    }
    if gamma.is_infinite() && gamma > 0.0 {
        return EnsembleWeights::uniform(w.len());
    }
    if gamma < 0.0 || gamma.is_nan() {
        return Err(Error::argument("gamma must be nonnegative"));
    }
    let k = w.len() as f64;
    let stepped: Vec<f64> = w
        .values()
        .iter()
        .zip(losses)
        .map(|(wi, li)| wi + nu * (li - gamma * (wi - 1.0 / k)))
        .collect();
    simplex_project(&stepped)
}

/// Step size below which one ascent step provably cannot decrease the
/// regularized objective: `1 / (gamma + ||L||_2)`.
pub fn safe_inner_step(gamma: f64, losses: &[f64]) -> f64 {
    let norm = losses.iter().map(|l| l * l).sum::<f64>().sqrt();
    1.0 / (gamma + norm).max(f64::MIN_POSITIVE)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, StreamTag};
    use rand::Rng;

    #[test]
    fn k1_simplex_is_a_point() {
        let w = simplex_project(&[1.0]).unwrap();
        assert_eq!(w.values(), &[1.0]);
        let w = simplex_project(&[-5.3]).unwrap();
        assert_eq!(w.values(), &[1.0]);
    }

    #[test]
    fn symmetric_shift_case() {
        let w = simplex_project(&[0.6, 0.6]).unwrap();
        assert!((w.values()[0] - 0.5).abs() < 1e-12);
        assert!((w.values()[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn vertex_case() {
        let w = simplex_project(&[2.0, 0.0, 0.0]).unwrap();
        assert!((w.values()[0] - 1.0).abs() < 1e-12);
        assert_eq!(w.values()[1], 0.0);
        assert_eq!(w.values()[2], 0.0);
    }

    #[test]
    fn projection_is_idempotent_and_feasible() {
        let mut rng = stream(3, StreamTag::Synthetic, &[10]);
        for _ in 0..200 {
            let k = rng.random_range(1..5usize);
            let v: Vec<f64> = (0..k).map(|_| rng.random_range(-3.0..3.0)).collect();
            let w = simplex_project(&v).unwrap();
            let sum: f64 = w.values().iter().sum();
            assert!((sum - 1.0).abs() <= 1e-9);
            assert!(w.values().iter().all(|x| (0.0..=1.0).contains(x)));
            let again = simplex_project(w.values()).unwrap();
            for (a, b) in w.values().iter().zip(again.values()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
        assert!(simplex_project(&[]).is_err());
        assert!(simplex_project(&[f64::NAN, 0.0]).is_err());
    }

    // Dense-grid brute force: minimize ||x - w||^2 over the simplex grid.
    pub(crate) fn brute_force_project(v: &[f64], res: f64) -> Vec<f64> {
        let steps = (1.0 / res).round() as usize;
        match v.len() {
            1 => vec![1.0],
            2 => {
                let mut best = (f64::INFINITY, vec![0.0, 0.0]);
                for i in 0..=steps {
                    let w0 = i as f64 * res;
                    let w1 = 1.0 - w0;
                    let d = (w0 - v[0]).powi(2) + (w1 - v[1]).powi(2);
                    if d < best.0 {
                        best = (d, vec![w0, w1]);
                    }
                }
                best.1
            }
            3 => {
                let mut best = (f64::INFINITY, vec![0.0; 3]);
                for i in 0..=steps {
                    let w0 = i as f64 * res;
                    for j in 0..=(steps - i) {
                        let w1 = j as f64 * res;
                        let w2 = 1.0 - w0 - w1;
                        let d = (w0 - v[0]).powi(2) + (w1 - v[1]).powi(2) + (w2 - v[2]).powi(2);
                        if d < best.0 {
                            best = (d, vec![w0, w1, w2]);
                        }
                    }
                }
                best.1
            }
            _ => unreachable!("oracle supports K <= 3"),
        }
    }

    #[test]
    fn projection_matches_brute_force_grid() {
        let mut rng = stream(17, StreamTag::Synthetic, &[11]);
        let res = 1e-3;
        for _ in 0..60 {
            let k = rng.random_range(1..4usize);
            let v: Vec<f64> = (0..k).map(|_| rng.random_range(-3.0..3.0)).collect();
            let exact = simplex_project(&v).unwrap();
            let grid = brute_force_project(&v, res);
            for (a, b) in exact.values().iter().zip(&grid) {
                assert!((a - b).abs() <= res, "{exact:?} vs grid {grid:?}");
            }
        }
    }

    #[test]
    fn regularizer_values() {
        let uniform = EnsembleWeights::uniform(3).unwrap();
        assert_eq!(regularizer(&uniform, 0.7).unwrap(), 0.0);
        let w = EnsembleWeights::new(vec![1.0, 0.0]).unwrap();
        let r = regularizer(&w, 0.1).unwrap();
        assert!((r - 0.025).abs() < 1e-15);
        assert_eq!(regularizer(&w, 0.0).unwrap(), 0.0);
        assert!(regularizer(&w, -1.0).is_err());
    }

    #[test]
    fn inner_step_hand_case() {
        let w = EnsembleWeights::new(vec![0.5, 0.5]).unwrap();
        let next = inner_max_step(&w, &[1.0, 0.0], 0.1, 0.0).unwrap();
        assert!((next.values()[0] - 0.55).abs() < 1e-9);
        assert!((next.values()[1] - 0.45).abs() < 1e-9);
    }

    #[test]
    fn equal_losses_fix_uniform_weights() {
        let w = EnsembleWeights::uniform(4).unwrap();
        let next = inner_max_step(&w, &[2.5; 4], 0.78, 0.1).unwrap();
        for x in next.values() {
            assert!((x - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn huge_gamma_pulls_to_uniform_under_safe_step() {
        let losses = [1.0, 0.0];
        let gamma = 1e6;
        let nu = safe_inner_step(gamma, &losses);
        for start in [[0.9, 0.1], [0.5, 0.5], [0.0, 1.0]] {
            let w = EnsembleWeights::new(start.to_vec()).unwrap();
            let next = inner_max_step(&w, &losses, nu, gamma).unwrap();
            for x in next.values() {
                assert!((x - 0.5).abs() < 1e-3, "{next:?}");
            }
        }
    }

    #[test]
    fn infinite_gamma_is_exact_averaging() {
        let w = EnsembleWeights::new(vec![0.7, 0.2, 0.1]).unwrap();
        let next = inner_max_step(&w, &[9.0, 1.0, 0.0], 0.78, f64::INFINITY).unwrap();
        assert_eq!(next.values(), EnsembleWeights::uniform(3).unwrap().values());
    }

    #[test]
    fn ascent_never_decreases_objective_under_safe_step() {
        let mut rng = stream(23, StreamTag::Synthetic, &[1]);
        for _ in 0..200 {
            let k = rng.random_range(2..5usize);
            let mut v: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..1.0)).collect();
            let s: f64 = v.iter().sum();
            v.iter_mut().for_each(|x| *x /= s);
            let w = EnsembleWeights::new(v).unwrap();
            let losses: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..5.0)).collect();
            let gamma = rng.random_range(0.0..2.0);
            let nu = safe_inner_step(gamma, &losses);
            let next = inner_max_step(&w, &losses, nu, gamma).unwrap();
            let before = inner_objective(&w, &losses, gamma).unwrap();
            let after = inner_objective(&next, &losses, gamma).unwrap();
            assert!(
                after >= before - 1e-12,
                "objective dropped: {before} -> {after}"
            );
        }
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let w = EnsembleWeights::uniform(2).unwrap();
        assert!(inner_max_step(&w, &[1.0], 0.1, 0.0).is_err());
        assert!(w.combine(&[1.0, 2.0, 3.0]).is_err());
    }
}
