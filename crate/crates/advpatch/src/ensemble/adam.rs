//! Adaptive-moment optimizer state for the outer patch minimization.

use ndarray::Array3;

use crate::error::{Error, Result};
use crate::patch::Patch;
use crate::tensor::ImageTensor;

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPS: f64 = 1e-8;

/// First/second moment estimates plus the step counter.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: ImageTensor,
    v: ImageTensor,
    t: u64,
    lr: f64,
}

impl AdamState {
    pub fn new(height: usize, width: usize, lr: f64) -> Self {
        AdamState {
            m: Array3::zeros((height, width, 3)),
            v: Array3::zeros((height, width, 3)),
            t: 0,
            lr,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    /// One descent step followed by the `[0, 1]` box clamp.
    pub fn step(&mut self, patch: &mut Patch, grad: &ImageTensor) -> Result<()> {
        if grad.dim() != patch.pixels().dim() {
            return Err(Error::argument(format!(
                "gradient shape {:?} does not match patch {:?}",
                grad.dim(),
                patch.pixels().dim()
            )));
        }
        self.t += 1;
        let bc1 = 1.0 - BETA1.powi(self.t as i32);
        let bc2 = 1.0 - BETA2.powi(self.t as i32);
        let px = patch.pixels_mut();
        ndarray::Zip::from(px)
            .and(&mut self.m)
            .and(&mut self.v)
            .and(grad)
            .for_each(|p, m, v, g| {
                *m = BETA1 * *m + (1.0 - BETA1) * g;
                *v = BETA2 * *v + (1.0 - BETA2) * g * g;
                let mhat = *m / bc1;
                let vhat = *v / bc2;
                *p -= self.lr * mhat / (vhat.sqrt() + EPS);
            });
        patch.clamp();
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::patch::InitMode;

    #[test]
    fn zero_gradient_leaves_patch_unchanged() {
        let mut p = Patch::init(4, 4, InitMode::RandomUniform, 1).unwrap();
        let before = p.clone();
        let mut opt = AdamState::new(4, 4, 0.03);
        opt.step(&mut p, &Array3::zeros((4, 4, 3))).unwrap();
        assert_eq!(before, p);
    }

    #[test]
    fn positive_gradient_descends() {
        let mut p = Patch::init(4, 4, InitMode::Gray, 0).unwrap();
        let mut opt = AdamState::new(4, 4, 0.03);
        opt.step(&mut p, &Array3::from_elem((4, 4, 3), 0.5)).unwrap();
        for v in p.pixels().iter() {
            assert!(*v < 0.5 && *v >= 0.0);
        }
    }

    // Reference implementation of the update rule, stepped by hand.
    #[test]
    fn single_step_matches_reference_update() {
        let mut p = Patch::init(2, 2, InitMode::RandomUniform, 8).unwrap();
        let reference = p.clone();
        let grad = Array3::from_shape_fn((2, 2, 3), |(y, x, c)| {
            0.3 * (y as f64 + 1.0) - 0.2 * x as f64 + 0.05 * c as f64
        });
        let lr = 0.03;
        let mut opt = AdamState::new(2, 2, lr);
        opt.step(&mut p, &grad).unwrap();

        for ((y, x, c), g) in grad.indexed_iter() {
            let m = (1.0 - BETA1) * g;
            let v = (1.0 - BETA2) * g * g;
            let mhat = m / (1.0 - BETA1);
            let vhat = v / (1.0 - BETA2);
            let expect =
                (reference.pixels()[[y, x, c]] - lr * mhat / (vhat.sqrt() + EPS)).clamp(0.0, 1.0);
            let got = p.pixels()[[y, x, c]];
            assert!((got - expect).abs() < 1e-7, "{got} vs {expect}");
        }
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let mut p = Patch::init(4, 4, InitMode::Gray, 0).unwrap();
        let mut opt = AdamState::new(4, 4, 0.03);
        assert!(opt.step(&mut p, &Array3::zeros((2, 2, 3))).is_err());
    }
}
