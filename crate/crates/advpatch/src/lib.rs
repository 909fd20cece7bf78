//! Universal adversarial patch synthesis against object-detector ensembles.
//!
//! The crate optimizes a printable patch that suppresses person detections
//! across several detectors at once. Detector weights live on the probability
//! simplex and are re-balanced by projected gradient ascent while the patch
//! descends the combined energy, so no single model dominates training.
//! Evaluation utilities (AP, ASR, Grad-CAM based disruption metrics, print-
//! fidelity scores) and a small CLI round out the toolkit.
//!
//! See the book under `book/` for a guided tour; every snippet there runs as
//! a doctest.

pub mod bbox;
pub mod config;
pub mod dataset;
pub mod detect;
pub mod ensemble;
pub mod error;
pub mod eval;
pub mod loss;
pub mod palette;
pub mod patch;
pub mod rng;
pub mod synth;
pub mod tensor;
pub mod transform;

pub use bbox::BoundingBox;
pub use config::{AdapterRegistry, DetectorEntry, RunConfig};
pub use dataset::{export_adv_dataset, load_dataset, DatasetIndex, LabeledImage};
pub use detect::{
    make_toy_detector, obj_energy, person_confidence, Candidate, Detector, DetectorKind,
    EnergyReport, ToyDetector,
};
pub use ensemble::{
    inner_max_step, regularizer, simplex_project, train, EnsembleWeights, TrainConfig,
    TrainLogRow, TrainMode,
};
pub use error::{Error, Result};
pub use eval::{
    compute_ap, compute_asr, disruption_area_ratio, evaluate, grad_cam, hue_similarity, nms,
    Detection, EvalParams, EvalReport, Heatmap,
};
pub use loss::{nps_loss, smoothness_loss, total_energy, LossWeights};
pub use palette::{build_palette, PrintPalette};
pub use patch::{InitMode, Patch};
pub use tensor::ImageTensor;
pub use transform::{apply_patch, RandomDraw, TransformConfig};
