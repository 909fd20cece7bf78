//! Uniform differentiable interface over object detectors.
//!
//! Adapters expose raw (pre-NMS) candidates with gradients flowing from
//! person confidences back to input pixels. Real one-stage / two-stage
//! detectors plug in behind the [`Detector`] trait; the test suite and the
//! desk-scale benchmarks run on the toy convolutional detector.

pub mod toy;

use ndarray::Array3;
use serde::{Deserialize, Serialize};

use crate::bbox::BoundingBox;
use crate::error::{Error, Result};
use crate::tensor::ImageTensor;

pub use toy::{make_toy_detector, ToyDetector, ToyDetectorConfig};

/// Family of the underlying detector; decides how a candidate's person
/// confidence is read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DetectorKind {
    /// Dense single-pass detectors (YOLO family): objectness times class
    /// score.
    OneStage,
    /// Proposal-based detectors (Faster R-CNN family): the RPN foreground
    /// score is attacked directly.
    TwoStage,
    /// The built-in toy convnet; scores read like a one-stage model.
    Toy,
}

/// One raw candidate box before non-maximum suppression.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub bbox: BoundingBox,
    /// Objectness (one-stage) or proposal foreground score (two-stage).
    pub objectness: f64,
    pub class_scores: Vec<f64>,
}

/// Differentiable detector adapter.
pub trait Detector {
    fn name(&self) -> &str;
    fn kind(&self) -> DetectorKind;
    fn person_class_index(&self) -> usize;
    fn class_count(&self) -> usize;
    /// Expected input dimensions `(height, width)`.
    fn input_size(&self) -> (usize, usize);

    /// Evaluation-mode forward pass: all raw candidates, deterministic.
    fn forward(&self, image: &ImageTensor) -> Result<Vec<Candidate>>;

    /// Forward pass that also returns a handle for the gradient pass.
    fn forward_traced(&self, image: &ImageTensor)
        -> Result<(Vec<Candidate>, Box<dyn DetectorTrace>)>;
}

/// Backpropagates per-candidate person-confidence gradients to the input.
pub trait DetectorTrace {
    fn backward(&self, grad_person_confidence: &[f64]) -> ImageTensor;
}

/// Runs the adapter over a batch, one candidate list per image.
pub fn forward_batch(
    detector: &dyn Detector,
    images: &[ImageTensor],
) -> Result<Vec<Vec<Candidate>>> {
    images.iter().map(|img| detector.forward(img)).collect()
}

/// Confidence that a candidate is a person.
///
/// One-stage (and toy) adapters multiply objectness with the person class
/// score; two-stage adapters attack the proposal score itself.
pub fn person_confidence(c: &Candidate, kind: DetectorKind, person_class_index: usize) -> f64 {
    match kind {
        DetectorKind::OneStage | DetectorKind::Toy => {
            c.objectness * c.class_scores.get(person_class_index).copied().unwrap_or(0.0)
        }
        DetectorKind::TwoStage => c.objectness,
    }
}

/// Candidates whose person confidence exceeds the threshold `mu`.
pub fn active_set(
    candidates: &[Candidate],
    kind: DetectorKind,
    person_class_index: usize,
    mu: f64,
) -> Vec<bool> {
    candidates
        .iter()
        .map(|c| person_confidence(c, kind, person_class_index) > mu)
        .collect()
}

/// Per-model objective energy: the summed person confidence of all
/// candidates above the threshold `mu`.
///
/// Summing `max(s_j, mu)` over every box differs from this thresholded sum
/// only by a constant with zero gradient, so the optimization dynamics are
/// identical and the energy bottoms out at exactly zero.
pub fn obj_energy(
    candidates: &[Candidate],
    kind: DetectorKind,
    person_class_index: usize,
    mu: f64,
) -> f64 {
    candidates
        .iter()
        .map(|c| person_confidence(c, kind, person_class_index))
        .filter(|s| *s > mu)
        .sum()
}

/// Energy restricted to a frozen active set; used by gradient probes so the
/// set does not flip between finite-difference evaluations.
pub fn obj_energy_masked(
    candidates: &[Candidate],
    kind: DetectorKind,
    person_class_index: usize,
    mask: &[bool],
) -> f64 {
    candidates
        .iter()
        .zip(mask)
        .filter(|(_, m)| **m)
        .map(|(c, _)| person_confidence(c, kind, person_class_index))
        .sum()
}

/// Energy plus its gradient w.r.t. each candidate's person confidence.
pub fn obj_energy_grad(
    candidates: &[Candidate],
    kind: DetectorKind,
    person_class_index: usize,
    mu: f64,
) -> (f64, Vec<f64>) {
    let mut energy = 0.0;
    let grads = candidates
        .iter()
        .map(|c| {
            let s = person_confidence(c, kind, person_class_index);
            if s > mu {
                energy += s;
                1.0
            } else {
                0.0
            }
        })
        .collect();
    (energy, grads)
}

/// Per-step energy bookkeeping for one training step.
#[derive(Debug, Clone, Serialize)]
pub struct EnergyReport {
    /// Per-model objective energies.
    pub per_model_obj: Vec<f64>,
    /// Weighted combination entering the total loss.
    pub combined: f64,
    pub nps: f64,
    pub smooth: f64,
    pub total: f64,
}

impl EnergyReport {
    pub fn validate(&self) -> Result<()> {
        let finite = self.per_model_obj.iter().all(|v| v.is_finite())
            && self.combined.is_finite()
            && self.nps.is_finite()
            && self.smooth.is_finite()
            && self.total.is_finite();
        if !finite {
            return Err(Error::Diverged {
                step: 0,
                message: "non-finite energy".to_string(),
            });
        }
        Ok(())
    }
}

/// Interface for Grad-CAM style introspection of an adapter's trunk.
pub trait CamBackbone {
    /// Names of layers whose activation maps can be captured.
    fn cam_layers(&self) -> Vec<String>;

    /// Runs the model and captures `(activations, d target / d activations)`
    /// at the named layer. Shapes are `(maps, h, w)`.
    fn cam_capture(
        &self,
        image: &ImageTensor,
        layer: &str,
        target: &CamTarget,
    ) -> Result<CamCapture>;
}

/// Differentiable scalar the CAM explains.
#[derive(Debug, Clone, Copy)]
pub enum CamTarget {
    /// Thresholded person energy (the training objective).
    PersonEnergy { mu: f64 },
    /// Sum of one class's scores over all candidates.
    ClassScoreSum { class: usize },
}

/// Activation maps and their gradients at one layer.
pub struct CamCapture {
    pub activations: Array3<f64>,
    pub grads: Array3<f64>,
}
