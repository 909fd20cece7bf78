//! Run configuration: one TOML file drives the CLI.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::detect::{Detector, DetectorKind, ToyDetector, ToyDetectorConfig};
use crate::ensemble::{TrainConfig, TrainMode};
use crate::error::{Error, Result};
use crate::eval::EvalParams;
use crate::loss::LossWeights;
use crate::palette::PrintPalette;
use crate::patch::{InitMode, Patch};
use crate::transform::TransformConfig;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetSection {
    pub images_dir: PathBuf,
    pub labels_dir: PathBuf,
    #[serde(default)]
    pub person_class_id: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct PatchSection {
    pub height: usize,
    pub width: usize,
    /// `random-uniform`, `gray`, or `from-file`.
    pub init: String,
    pub init_file: Option<PathBuf>,
}

impl Default for PatchSection {
    fn default() -> Self {
        PatchSection {
            height: 300,
            width: 300,
            init: "random-uniform".to_string(),
            init_file: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainSection {
    pub epochs: usize,
    pub batch_size: usize,
    pub patch_lr: f64,
    pub nu: f64,
    pub gamma: f64,
    pub mu: f64,
    /// `dynamic`, `average`, or `fixed`.
    pub mode: String,
    pub fixed_weights: Option<Vec<f64>>,
}

impl Default for TrainSection {
    fn default() -> Self {
        TrainSection {
            epochs: 10,
            batch_size: 8,
            patch_lr: 0.03,
            nu: 0.78,
            gamma: 0.1,
            mu: 0.4,
            mode: "dynamic".to_string(),
            fixed_weights: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalSection {
    pub conf_thresh: f64,
    pub nms_iou: f64,
    pub match_iou: f64,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection {
            conf_thresh: 0.5,
            nms_iou: 0.4,
            match_iou: 0.5,
        }
    }
}

/// One adapter-registry row.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DetectorEntry {
    pub name: String,
    pub kind: DetectorKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_grid")]
    pub grid: usize,
    #[serde(default = "default_classes")]
    pub classes: usize,
    #[serde(default)]
    pub person_class_index: usize,
    #[serde(default = "default_input")]
    pub input_size: (usize, usize),
    /// Weights path for external (non-toy) adapters.
    #[serde(default)]
    pub weights: Option<PathBuf>,
    #[serde(default)]
    pub objectness_bias: f64,
    #[serde(default = "default_gain")]
    pub weight_gain: f64,
}

fn default_grid() -> usize {
    4
}
fn default_classes() -> usize {
    3
}
fn default_input() -> (usize, usize) {
    (64, 64)
}
fn default_gain() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    pub output_dir: PathBuf,
    pub dataset: DatasetSection,
    #[serde(default)]
    pub patch: PatchSection,
    /// Printable-palette file; required when `loss.alpha > 0`.
    #[serde(default)]
    pub palette: Option<PathBuf>,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub transform: TransformConfig,
    #[serde(default)]
    pub loss: LossWeights,
    #[serde(default)]
    pub eval: EvalSection,
    #[serde(default, rename = "detector")]
    pub detectors: Vec<DetectorEntry>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg = Self::parse(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if !self.dataset.images_dir.is_dir() {
            return Err(Error::Config(format!(
                "images_dir {} is not a directory",
                self.dataset.images_dir.display()
            )));
        }
        if !self.dataset.labels_dir.is_dir() {
            return Err(Error::Config(format!(
                "labels_dir {} is not a directory",
                self.dataset.labels_dir.display()
            )));
        }
        if let Some(p) = &self.palette {
            if !p.is_file() {
                return Err(Error::Config(format!(
                    "palette file {} does not exist",
                    p.display()
                )));
            }
        }
        if self.loss.alpha > 0.0 && self.palette.is_none() {
            return Err(Error::Config(
                "loss.alpha > 0 requires a palette file".to_string(),
            ));
        }
        if self.patch.init == "from-file" {
            match &self.patch.init_file {
                Some(f) if f.is_file() => {}
                _ => {
                    return Err(Error::Config(
                        "patch.init = \"from-file\" requires an existing init_file".to_string(),
                    ))
                }
            }
        }
        if self.detectors.is_empty() {
            return Err(Error::Config("no [[detector]] entries".to_string()));
        }
        self.transform.validate()?;
        self.loss.validate()?;
        self.train_config().validate(self.detectors.len())?;
        Ok(())
    }

    pub fn init_mode(&self) -> Result<InitMode> {
        match self.patch.init.as_str() {
            "random-uniform" => Ok(InitMode::RandomUniform),
            "gray" => Ok(InitMode::Gray),
            "from-file" => self
                .patch
                .init_file
                .clone()
                .map(InitMode::FromFile)
                .ok_or_else(|| Error::Config("missing patch.init_file".to_string())),
            other => Err(Error::Config(format!("unknown patch init mode '{other}'"))),
        }
    }

    pub fn init_patch(&self) -> Result<Patch> {
        Patch::init(
            self.patch.height,
            self.patch.width,
            self.init_mode()?,
            self.seed,
        )
    }

    pub fn load_palette(&self) -> Result<Option<PrintPalette>> {
        match &self.palette {
            Some(path) => Ok(Some(PrintPalette::load(path)?)),
            None => Ok(None),
        }
    }

    pub fn train_mode(&self) -> TrainMode {
        match self.train.mode.as_str() {
            "average" => TrainMode::Average,
            "fixed" => TrainMode::Fixed(self.train.fixed_weights.clone().unwrap_or_default()),
            _ => TrainMode::Dynamic,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.train.epochs,
            batch_size: self.train.batch_size,
            patch_lr: self.train.patch_lr,
            nu: self.train.nu,
            gamma: self.train.gamma,
            mu: self.train.mu,
            loss_weights: self.loss,
            mode: self.train_mode(),
            seed: self.seed,
            transform: self.transform.clone(),
            person_class_id: self.dataset.person_class_id,
        }
    }

    pub fn eval_params(&self) -> EvalParams {
        EvalParams {
            conf_thresh: self.eval.conf_thresh,
            nms_iou: self.eval.nms_iou,
            match_iou: self.eval.match_iou,
            person_class_id: self.dataset.person_class_id,
            seed: self.seed,
        }
    }
}

type Factory = Box<dyn Fn(&DetectorEntry) -> Result<Box<dyn Detector>>>;

/// Builds adapters from config entries. Toy detectors are built in; real
/// one-stage / two-stage adapters register a factory under their kind.
pub struct AdapterRegistry {
    factories: HashMap<DetectorKind, Factory>,
}

impl Default for AdapterRegistry {
    fn default() -> Self {
        let mut reg = AdapterRegistry {
            factories: HashMap::new(),
        };
        reg.register(
            DetectorKind::Toy,
            Box::new(|entry: &DetectorEntry| {
                Ok(Box::new(ToyDetector::new(ToyDetectorConfig {
                    name: entry.name.clone(),
                    seed: entry.seed,
                    grid: entry.grid,
                    classes: entry.classes,
                    person_class_index: entry.person_class_index,
                    input_size: entry.input_size,
                    objectness_bias: entry.objectness_bias,
                    weight_gain: entry.weight_gain,
                })?) as Box<dyn Detector>)
            }),
        );
        reg
    }
}

impl AdapterRegistry {
    pub fn register(&mut self, kind: DetectorKind, factory: Factory) {
        self.factories.insert(kind, factory);
    }

    pub fn build(&self, entry: &DetectorEntry) -> Result<Box<dyn Detector>> {
        match self.factories.get(&entry.kind) {
            Some(f) => f(entry),
            None => Err(Error::Config(format!(
                "no adapter factory registered for kind {:?} (detector '{}'); \
                 external detectors must be plugged in by the embedding application",
                entry.kind, entry.name
            ))),
        }
    }

    pub fn build_all(&self, entries: &[DetectorEntry]) -> Result<Vec<Box<dyn Detector>>> {
        entries.iter().map(|e| self.build(e)).collect()
    }
}
