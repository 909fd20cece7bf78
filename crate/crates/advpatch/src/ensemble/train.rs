//! The min-max training loop.
//!
//! Outer loop: adversarial samples are built for a mini-batch, the weighted
//! per-model energies plus printability and smoothness terms are combined,
//! and the patch takes one adaptive-moment descent step (with weights frozen
//! at their previous value). Inner loop: one projected-gradient-ascent step
//! re-balances the ensemble weights on the detached per-model energies.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::LabeledImage;
use crate::detect::{obj_energy_grad, Detector, EnergyReport};
use crate::error::{Error, Result};
use crate::loss::{nps_loss_grad, smoothness_loss_grad, total_energy, LossWeights};
use crate::palette::PrintPalette;
use crate::patch::Patch;
use crate::rng::state_digest;
use crate::tensor::ImageTensor;
use crate::transform::{apply_patch_traced, resize_map, RandomDraw, SampleMap, TransformConfig};

use super::{inner_max_step, AdamState, EnsembleWeights};

/// How ensemble weights evolve during training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrainMode {
    /// Projected-gradient ascent on the weights each step.
    Dynamic,
    /// Weights pinned at uniform.
    Average,
    /// Weights pinned at a user-supplied simplex point.
    Fixed(Vec<f64>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    /// Outer (patch) learning rate.
    pub patch_lr: f64,
    /// Inner ascent step size.
    pub nu: f64,
    /// Regularizer strength pulling weights toward uniform.
    pub gamma: f64,
    /// Person-confidence threshold selecting attack targets.
    pub mu: f64,
    pub loss_weights: LossWeights,
    pub mode: TrainMode,
    pub seed: u64,
    pub transform: TransformConfig,
    pub person_class_id: u32,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 1,
            batch_size: 8,
            patch_lr: 0.03,
            nu: 0.78,
            gamma: 0.1,
            mu: 0.4,
            loss_weights: LossWeights::default(),
            mode: TrainMode::Dynamic,
            seed: 0,
            transform: TransformConfig::default(),
            person_class_id: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self, k: usize) -> Result<()> {
        if self.epochs < 1 {
            return Err(Error::argument("epochs must be at least 1"));
        }
        if self.batch_size < 1 {
            return Err(Error::argument("batch_size must be at least 1"));
        }
        if !(self.patch_lr > 0.0) {
            return Err(Error::argument("patch_lr must be positive"));
        }
        if !(self.nu > 0.0) {
            return Err(Error::argument("nu must be positive"));
        }
        if self.gamma < 0.0 || self.gamma.is_nan() {
            return Err(Error::argument("gamma must be nonnegative"));
        }
        if !(0.0..=1.0).contains(&self.mu) {
            return Err(Error::argument("mu must lie in [0, 1]"));
        }
        self.loss_weights.validate()?;
        self.transform.validate()?;
        if let TrainMode::Fixed(w) = &self.mode {
            let fixed = EnsembleWeights::new(w.clone())?;
            if fixed.len() != k {
                return Err(Error::argument(format!(
                    "fixed weights have {} entries for {k} detectors",
                    fixed.len()
                )));
            }
        }
        Ok(())
    }
}

/// One optimization step's bookkeeping.
#[derive(Debug, Clone, Serialize)]
pub struct TrainLogRow {
    pub epoch: usize,
    pub step: usize,
    pub per_model_obj: Vec<f64>,
    /// Weights after this step's inner update.
    pub weights: Vec<f64>,
    pub nps: f64,
    pub smooth: f64,
    pub total: f64,
}

#[derive(Debug)]
pub struct TrainResult {
    pub patch: Patch,
    pub log: Vec<TrainLogRow>,
    pub weights: EnsembleWeights,
}

/// Trains the patch against the adapter ensemble.
///
/// Per batch step: adversarial samples via one transform draw per image,
/// per-model energies (batch means), a weighted patch descent step at frozen
/// weights, then the mode's weight update on the detached energies.
pub fn train(
    dataset: &[LabeledImage],
    adapters: &[&dyn Detector],
    palette: Option<&PrintPalette>,
    init: Patch,
    cfg: &TrainConfig,
) -> Result<TrainResult> {
    if adapters.is_empty() {
        return Err(Error::argument("need at least one detector adapter"));
    }
    if dataset.is_empty() {
        return Err(Error::argument("dataset must be nonempty"));
    }
    cfg.validate(adapters.len())?;
    if cfg.loss_weights.alpha > 0.0 && palette.is_none() {
        return Err(Error::argument(
            "printability weight alpha > 0 requires a palette",
        ));
    }

    let k = adapters.len();
    let mut weights = match &cfg.mode {
        TrainMode::Dynamic | TrainMode::Average => EnsembleWeights::uniform(k)?,
        TrainMode::Fixed(w) => EnsembleWeights::new(w.clone())?,
    };
    let mut patch = init;
    let mut adam = AdamState::new(patch.height(), patch.width(), cfg.patch_lr);
    let mut log = Vec::new();
    let mut resize_cache: HashMap<((usize, usize), (usize, usize)), SampleMap> = HashMap::new();

    let mut step = 0usize;
    for epoch in 0..cfg.epochs {
        let mut start = 0usize;
        while start < dataset.len() {
            let end = (start + cfg.batch_size).min(dataset.len());
            let batch = &dataset[start..end];
            let n = batch.len() as f64;

            let mut energies = vec![0.0; k];
            let mut grad_patch: ImageTensor =
                ImageTensor::zeros((patch.height(), patch.width(), 3));

            for (offset, sample) in batch.iter().enumerate() {
                let image_index = (start + offset) as u64;
                let n_boxes = sample.person_boxes(cfg.person_class_id).len();
                let draw = RandomDraw::sample(
                    &cfg.transform,
                    (patch.height(), patch.width()),
                    cfg.seed,
                    step as u64,
                    image_index,
                    n_boxes,
                );
                let (adv, trace) =
                    apply_patch_traced(&patch, sample, &cfg.transform, &draw, cfg.person_class_id)?;

                let (ih, iw) = adv.dims();
                let mut grad_image = ImageTensor::zeros((ih, iw, 3));
                for (i, adapter) in adapters.iter().enumerate() {
                    let target = adapter.input_size();
                    let needs_resize = (ih, iw) != target;
                    let map = if needs_resize {
                        Some(
                            resize_cache
                                .entry(((ih, iw), target))
                                .or_insert_with(|| resize_map((ih, iw), target)),
                        )
                    } else {
                        None
                    };
                    let input = match &map {
                        Some(m) => m.forward(&adv.image),
                        None => adv.image.clone(),
                    };
                    let (cands, dtrace) =
                        adapter.forward_traced(&input).map_err(|e| Error::Adapter {
                            name: adapter.name().to_string(),
                            step,
                            message: e.to_string(),
                        })?;
                    let (energy, grad_conf) = obj_energy_grad(
                        &cands,
                        adapter.kind(),
                        adapter.person_class_index(),
                        cfg.mu,
                    );
                    energies[i] += energy;
                    let g_input = dtrace.backward(&grad_conf);
                    let g_adv = match &map {
                        Some(m) => m.backward(&g_input),
                        None => g_input,
                    };
                    let wi = weights.values()[i];
                    grad_image
                        .iter_mut()
                        .zip(g_adv.iter())
                        .for_each(|(a, b)| *a += wi * b);
                }
                if trace.has_boxes() {
                    let gp = trace.backward(&grad_image);
                    grad_patch += &gp;
                }
            }

            for e in &mut energies {
                *e /= n;
            }
            grad_patch.mapv_inplace(|v| v / n);

            let (nps, g_nps) = match palette {
                Some(p) if cfg.loss_weights.alpha > 0.0 => nps_loss_grad(&patch, p)?,
                _ => (0.0, ImageTensor::zeros(grad_patch.dim())),
            };
            let (smooth, g_smooth) = if cfg.loss_weights.beta > 0.0 {
                smoothness_loss_grad(&patch)
            } else {
                (crate::loss::smoothness_loss(&patch), ImageTensor::zeros(grad_patch.dim()))
            };

            let combined = weights.combine(&energies)?;
            let total = total_energy(combined, nps, smooth, &cfg.loss_weights);
            let report = EnergyReport {
                per_model_obj: energies.clone(),
                combined,
                nps,
                smooth,
                total,
            };
            report.validate().map_err(|_| Error::Diverged {
                step,
                message: format!("non-finite energy report: {energies:?}"),
            })?;

            ndarray::Zip::from(&mut grad_patch)
                .and(&g_nps)
                .and(&g_smooth)
                .for_each(|g, a, b| {
                    *g += cfg.loss_weights.alpha * a + cfg.loss_weights.beta * b;
                });
            if grad_patch.iter().any(|g| !g.is_finite()) {
                return Err(Error::Diverged {
                    step,
                    message: "non-finite patch gradient".to_string(),
                });
            }

            adam.step(&mut patch, &grad_patch)?;

            weights = match &cfg.mode {
                TrainMode::Dynamic => inner_max_step(&weights, &energies, cfg.nu, cfg.gamma)?,
                TrainMode::Average => EnsembleWeights::uniform(k)?,
                TrainMode::Fixed(w) => EnsembleWeights::new(w.clone())?,
            };

            log.push(TrainLogRow {
                epoch,
                step,
                per_model_obj: energies,
                weights: weights.values().to_vec(),
                nps,
                smooth,
                total,
            });
            step += 1;
            start = end;
        }
    }

    Ok(TrainResult {
        patch,
        log,
        weights,
    })
}

/// Writes the training log as CSV with the standard header.
pub fn write_log_csv(log: &[TrainLogRow], k: usize, path: &Path) -> Result<()> {
    let mut out = String::new();
    out.push_str("epoch,step");
    for i in 0..k {
        out.push_str(&format!(",model_{i}_loss"));
    }
    for i in 0..k {
        out.push_str(&format!(",w_{i}"));
    }
    out.push_str(",nps,smooth,total\n");
    for row in log {
        out.push_str(&format!("{},{}", row.epoch, row.step));
        for v in &row.per_model_obj {
            out.push_str(&format!(",{v}"));
        }
        for v in &row.weights {
            out.push_str(&format!(",{v}"));
        }
        out.push_str(&format!(",{},{},{}\n", row.nps, row.smooth, row.total));
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Writes a checkpoint: the patch PNG plus a small sidecar text file with
/// the step count, an RNG-state digest, and the current weights.
pub fn write_checkpoint(
    patch: &Patch,
    steps: usize,
    seed: u64,
    weights: &EnsembleWeights,
    dir: &Path,
    stem: &str,
) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    patch.save_png(&dir.join(format!("{stem}.png")))?;
    let w_text: Vec<String> = weights.values().iter().map(|v| v.to_string()).collect();
    let meta = format!(
        "steps: {steps}\nrng_state: {}\nweights: {}\n",
        state_digest(seed, steps),
        w_text.join(",")
    );
    let meta_path = dir.join(format!("{stem}.meta.txt"));
    std::fs::write(&meta_path, meta).map_err(|e| Error::io(meta_path, e))
}
