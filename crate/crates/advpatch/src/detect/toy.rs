//! A desk-scale stand-in detector.
//!
//! One 3x3 conv layer with tanh, average pooling onto a `grid x grid` cell
//! lattice, and a per-cell linear head emitting objectness plus class logits
//! through sigmoids. Small enough that forward and gradient passes are exact
//! hand-written code, expressive enough that a patch can actually move its
//! scores.

use ndarray::{Array1, Array2, Array3, Array4};
use rand::Rng;

use crate::bbox::BoundingBox;
use crate::error::{Error, Result};
use crate::rng::{stream, StreamTag};
use crate::tensor::ImageTensor;

use super::{
    person_confidence, CamBackbone, CamCapture, CamTarget, Candidate, Detector, DetectorKind,
    DetectorTrace,
};

const FEATURES: usize = 8;

#[derive(Debug, Clone)]
pub struct ToyDetectorConfig {
    pub name: String,
    pub seed: u64,
    pub grid: usize,
    pub classes: usize,
    pub person_class_index: usize,
    pub input_size: (usize, usize),
    /// Added to the objectness logit; positive values make the detector fire
    /// more readily on everything (a "sensitive" model).
    pub objectness_bias: f64,
    /// Scales the random init; larger values give livelier score fields.
    pub weight_gain: f64,
    /// Extra multiplier on the head weights only. Scales how hard the score
    /// field reacts to input changes without touching the trunk features, so
    /// detectors of very different sensitivity can share an architecture.
    pub head_gain: f64,
}

impl Default for ToyDetectorConfig {
    fn default() -> Self {
        ToyDetectorConfig {
            name: "toy".to_string(),
            seed: 0,
            grid: 4,
            classes: 3,
            person_class_index: 0,
            input_size: (64, 64),
            objectness_bias: 0.0,
            weight_gain: 1.0,
            head_gain: 1.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ToyDetector {
    cfg: ToyDetectorConfig,
    conv_w: Array4<f64>, // (F, 3, 3, 3): feature, channel, ky, kx
    conv_b: Array1<f64>,
    head_w: Array2<f64>, // (1 + classes, F)
    head_b: Array1<f64>,
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

impl ToyDetector {
    pub fn new(cfg: ToyDetectorConfig) -> Result<Self> {
        if cfg.grid < 1 {
            return Err(Error::argument("grid must be at least 1"));
        }
        if cfg.classes < 2 {
            return Err(Error::argument("need at least 2 classes"));
        }
        if cfg.person_class_index >= cfg.classes {
            return Err(Error::argument(format!(
                "person class index {} outside class count {}",
                cfg.person_class_index, cfg.classes
            )));
        }
        let mut rng = stream(cfg.seed, StreamTag::DetectorWeights, &[]);
        let a_conv = cfg.weight_gain * (1.0f64 / (3.0 * 9.0)).sqrt();
        let conv_w =
            Array4::from_shape_simple_fn((FEATURES, 3, 3, 3), || rng.random_range(-a_conv..a_conv));
        let conv_b = Array1::from_shape_simple_fn(FEATURES, || rng.random_range(-0.1..0.1));
        let a_head = cfg.weight_gain * cfg.head_gain * (1.0f64 / FEATURES as f64).sqrt();
        let head_w = Array2::from_shape_simple_fn((1 + cfg.classes, FEATURES), || {
            rng.random_range(-a_head..a_head)
        });
        let head_b = Array1::from_shape_simple_fn(1 + cfg.classes, || rng.random_range(-0.1..0.1));
        Ok(ToyDetector {
            cfg,
            conv_w,
            conv_b,
            head_w,
            head_b,
        })
    }

    /// Overrides the head weights; meant for closed-form tests.
    pub fn set_head(&mut self, w: Array2<f64>, b: Array1<f64>) {
        assert_eq!(w.dim(), (1 + self.cfg.classes, FEATURES));
        assert_eq!(b.len(), 1 + self.cfg.classes);
        self.head_w = w;
        self.head_b = b;
    }

    /// Overrides the conv weights; meant for closed-form tests.
    pub fn set_conv(&mut self, w: Array4<f64>, b: Array1<f64>) {
        assert_eq!(w.dim(), (FEATURES, 3, 3, 3));
        assert_eq!(b.len(), FEATURES);
        self.conv_w = w;
        self.conv_b = b;
    }

    pub fn config(&self) -> &ToyDetectorConfig {
        &self.cfg
    }

    fn check_input(&self, image: &ImageTensor) -> Result<()> {
        let (h, w, c) = image.dim();
        if (h, w) != self.cfg.input_size || c != 3 {
            return Err(Error::argument(format!(
                "input {h}x{w}x{c} does not match adapter input size {:?}",
                self.cfg.input_size
            )));
        }
        Ok(())
    }

    fn cell_bounds(&self, g: usize, len: usize) -> Vec<(usize, usize)> {
        (0..g)
            .map(|i| (i * len / g, ((i + 1) * len / g).max(i * len / g + 1)))
            .collect()
    }

    fn run(&self, image: &ImageTensor) -> ToyTrace {
        let (h, w, _) = image.dim();
        let g = self.cfg.grid;

        // conv 3x3, zero padding, tanh
        let mut act = Array3::zeros((FEATURES, h, w));
        for f in 0..FEATURES {
            for y in 0..h {
                for x in 0..w {
                    let mut z = self.conv_b[f];
                    for ky in 0..3 {
                        let sy = y as i64 + ky as i64 - 1;
                        if sy < 0 || sy >= h as i64 {
                            continue;
                        }
                        for kx in 0..3 {
                            let sx = x as i64 + kx as i64 - 1;
                            if sx < 0 || sx >= w as i64 {
                                continue;
                            }
                            for c in 0..3 {
                                z += self.conv_w[[f, c, ky, kx]]
                                    * image[[sy as usize, sx as usize, c]];
                            }
                        }
                    }
                    act[[f, y, x]] = z.tanh();
                }
            }
        }

        // average pool per cell
        let rows = self.cell_bounds(g, h);
        let cols = self.cell_bounds(g, w);
        let mut feats = Array3::zeros((FEATURES, g, g));
        for f in 0..FEATURES {
            for (gy, (r0, r1)) in rows.iter().enumerate() {
                for (gx, (c0, c1)) in cols.iter().enumerate() {
                    let mut acc = 0.0;
                    for y in *r0..*r1 {
                        for x in *c0..*c1 {
                            acc += act[[f, y, x]];
                        }
                    }
                    feats[[f, gy, gx]] = acc / ((r1 - r0) * (c1 - c0)) as f64;
                }
            }
        }

        // per-cell linear head
        let k = 1 + self.cfg.classes;
        let mut logits = Array3::zeros((k, g, g));
        for ki in 0..k {
            for gy in 0..g {
                for gx in 0..g {
                    let mut z = self.head_b[ki];
                    for f in 0..FEATURES {
                        z += self.head_w[[ki, f]] * feats[[f, gy, gx]];
                    }
                    logits[[ki, gy, gx]] = z;
                }
            }
        }

        ToyTrace {
            detector: self.clone(),
            image_dims: (h, w),
            act,
            logits,
        }
    }

    fn candidates_from(&self, logits: &Array3<f64>) -> Vec<Candidate> {
        let g = self.cfg.grid;
        let mut cands = Vec::with_capacity(g * g);
        for gy in 0..g {
            for gx in 0..g {
                let objectness = sigmoid(logits[[0, gy, gx]] + self.cfg.objectness_bias);
                let class_scores: Vec<f64> = (0..self.cfg.classes)
                    .map(|c| sigmoid(logits[[1 + c, gy, gx]]))
                    .collect();
                let side = 1.0 / g as f64;
                let bbox = BoundingBox::new(
                    self.cfg.person_class_index as u32,
                    (gx as f64 + 0.5) * side,
                    (gy as f64 + 0.5) * side,
                    side,
                    side,
                )
                .expect("grid cell box is valid");
                cands.push(Candidate {
                    bbox,
                    objectness,
                    class_scores,
                });
            }
        }
        cands
    }
}

/// Cached forward state of one toy-detector evaluation.
pub struct ToyTrace {
    detector: ToyDetector,
    image_dims: (usize, usize),
    act: Array3<f64>,    // (F, H, W) post-tanh
    logits: Array3<f64>, // (1 + classes, G, G)
}

impl ToyTrace {
    /// Backprop from per-cell logit gradients to the input image. Also
    /// returns the gradient at the conv activation maps (pre pooling) for
    /// CAM capture.
    fn backward_from_logits(&self, dlogits: &Array3<f64>) -> (ImageTensor, Array3<f64>) {
        let det = &self.detector;
        let g = det.cfg.grid;
        let (h, w) = self.image_dims;
        let k = 1 + det.cfg.classes;

        // head backward
        let mut dfeats = Array3::zeros((FEATURES, g, g));
        for f in 0..FEATURES {
            for gy in 0..g {
                for gx in 0..g {
                    let mut acc = 0.0;
                    for ki in 0..k {
                        acc += dlogits[[ki, gy, gx]] * det.head_w[[ki, f]];
                    }
                    dfeats[[f, gy, gx]] = acc;
                }
            }
        }

        // pool backward: uniform scatter over each cell
        let rows = det.cell_bounds(g, h);
        let cols = det.cell_bounds(g, w);
        let mut dact = Array3::zeros((FEATURES, h, w));
        for f in 0..FEATURES {
            for (gy, (r0, r1)) in rows.iter().enumerate() {
                for (gx, (c0, c1)) in cols.iter().enumerate() {
                    let share = dfeats[[f, gy, gx]] / ((r1 - r0) * (c1 - c0)) as f64;
                    if share == 0.0 {
                        continue;
                    }
                    for y in *r0..*r1 {
                        for x in *c0..*c1 {
                            dact[[f, y, x]] += share;
                        }
                    }
                }
            }
        }

        // tanh' then conv transpose
        let mut dimg = Array3::zeros((h, w, 3));
        for f in 0..FEATURES {
            for y in 0..h {
                for x in 0..w {
                    let da = dact[[f, y, x]];
                    if da == 0.0 {
                        continue;
                    }
                    let a = self.act[[f, y, x]];
                    let dpre = da * (1.0 - a * a);
                    for ky in 0..3 {
                        let sy = y as i64 + ky as i64 - 1;
                        if sy < 0 || sy >= h as i64 {
                            continue;
                        }
                        for kx in 0..3 {
                            let sx = x as i64 + kx as i64 - 1;
                            if sx < 0 || sx >= w as i64 {
                                continue;
                            }
                            for c in 0..3 {
                                dimg[[sy as usize, sx as usize, c]] +=
                                    dpre * det.conv_w[[f, c, ky, kx]];
                            }
                        }
                    }
                }
            }
        }
        (dimg, dact)
    }

    /// Converts per-candidate person-confidence gradients into logit grads.
    fn logit_grads_for_person(&self, grad_conf: &[f64]) -> Array3<f64> {
        let det = &self.detector;
        let g = det.cfg.grid;
        let p = det.cfg.person_class_index;
        let mut dlogits = Array3::zeros((1 + det.cfg.classes, g, g));
        for gy in 0..g {
            for gx in 0..g {
                let i = gy * g + gx;
                let gc = grad_conf.get(i).copied().unwrap_or(0.0);
                if gc == 0.0 {
                    continue;
                }
                let obj = sigmoid(self.logits[[0, gy, gx]] + det.cfg.objectness_bias);
                let cls = sigmoid(self.logits[[1 + p, gy, gx]]);
                dlogits[[0, gy, gx]] = gc * obj * (1.0 - obj) * cls;
                dlogits[[1 + p, gy, gx]] = gc * obj * cls * (1.0 - cls);
            }
        }
        dlogits
    }
}

impl DetectorTrace for ToyTrace {
    fn backward(&self, grad_person_confidence: &[f64]) -> ImageTensor {
        let dlogits = self.logit_grads_for_person(grad_person_confidence);
        self.backward_from_logits(&dlogits).0
    }
}

impl Detector for ToyDetector {
    fn name(&self) -> &str {
        &self.cfg.name
    }

    fn kind(&self) -> DetectorKind {
        DetectorKind::Toy
    }

    fn person_class_index(&self) -> usize {
        self.cfg.person_class_index
    }

    fn class_count(&self) -> usize {
        self.cfg.classes
    }

    fn input_size(&self) -> (usize, usize) {
        self.cfg.input_size
    }

    fn forward(&self, image: &ImageTensor) -> Result<Vec<Candidate>> {
        self.check_input(image)?;
        let trace = self.run(image);
        Ok(self.candidates_from(&trace.logits))
    }

    fn forward_traced(
        &self,
        image: &ImageTensor,
    ) -> Result<(Vec<Candidate>, Box<dyn DetectorTrace>)> {
        self.check_input(image)?;
        let trace = self.run(image);
        let cands = self.candidates_from(&trace.logits);
        Ok((cands, Box::new(trace)))
    }
}

impl CamBackbone for ToyDetector {
    fn cam_layers(&self) -> Vec<String> {
        vec!["conv1".to_string()]
    }

    fn cam_capture(
        &self,
        image: &ImageTensor,
        layer: &str,
        target: &CamTarget,
    ) -> Result<CamCapture> {
        if layer != "conv1" {
            return Err(Error::argument(format!(
                "unknown layer '{layer}'; available: conv1"
            )));
        }
        self.check_input(image)?;
        let trace = self.run(image);
        let cands = self.candidates_from(&trace.logits);
        let dlogits = match target {
            CamTarget::PersonEnergy { mu } => {
                let grads: Vec<f64> = cands
                    .iter()
                    .map(|c| {
                        if person_confidence(c, DetectorKind::Toy, self.cfg.person_class_index)
                            > *mu
                        {
                            1.0
                        } else {
                            0.0
                        }
                    })
                    .collect();
                trace.logit_grads_for_person(&grads)
            }
            CamTarget::ClassScoreSum { class } => {
                if *class >= self.cfg.classes {
                    return Err(Error::argument(format!(
                        "class {class} outside class count {}",
                        self.cfg.classes
                    )));
                }
                let g = self.cfg.grid;
                let mut dlogits = Array3::zeros((1 + self.cfg.classes, g, g));
                for gy in 0..g {
                    for gx in 0..g {
                        let cls = sigmoid(trace.logits[[1 + class, gy, gx]]);
                        dlogits[[1 + class, gy, gx]] = cls * (1.0 - cls);
                    }
                }
                dlogits
            }
        };
        let (_, dact) = trace.backward_from_logits(&dlogits);
        Ok(CamCapture {
            activations: trace.act,
            grads: dact,
        })
    }
}

/// Builds a toy detector with default geometry from `(seed, grid, classes)`.
pub fn make_toy_detector(seed: u64, grid: usize, classes: usize) -> Result<ToyDetector> {
    ToyDetector::new(ToyDetectorConfig {
        name: format!("toy-{seed}"),
        seed,
        grid,
        classes,
        ..ToyDetectorConfig::default()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detect::{active_set, obj_energy, obj_energy_masked};
    use ndarray::Array3;

    fn test_image(seed: u64, h: usize, w: usize) -> ImageTensor {
        let mut rng = stream(seed, StreamTag::Synthetic, &[h as u64, w as u64]);
        Array3::from_shape_simple_fn((h, w, 3), || rng.random_range(0.0..1.0))
    }

    #[test]
    fn grid_contract_and_determinism() {
        let det = make_toy_detector(3, 4, 3).unwrap();
        let img = test_image(1, 64, 64);
        let c1 = det.forward(&img).unwrap();
        let c2 = det.forward(&img).unwrap();
        assert_eq!(c1.len(), 16);
        assert_eq!(c1, c2);
        assert!(c1
            .iter()
            .all(|c| c.objectness.is_finite() && c.class_scores.len() == 3));
    }

    #[test]
    fn all_zero_image_yields_finite_scores() {
        let det = make_toy_detector(5, 2, 2).unwrap();
        let img = Array3::zeros((64, 64, 3));
        let cands = det.forward(&img).unwrap();
        assert_eq!(cands.len(), 4);
        for c in cands {
            assert!(c.objectness > 0.0 && c.objectness < 1.0);
        }
    }

    #[test]
    fn different_seeds_differ() {
        let a = make_toy_detector(1, 4, 3).unwrap();
        let b = make_toy_detector(2, 4, 3).unwrap();
        let img = test_image(9, 64, 64);
        let ca = a.forward(&img).unwrap();
        let cb = b.forward(&img).unwrap();
        assert_ne!(ca[0].objectness, cb[0].objectness);
    }

    #[test]
    fn input_shape_is_checked() {
        let det = make_toy_detector(1, 4, 3).unwrap();
        let img = test_image(1, 32, 32);
        assert!(det.forward(&img).is_err());
    }

    // Closed-form check: zero conv weights make every activation tanh(b1),
    // so each cell's logits are exactly head_b + head_w . tanh(b1).
    #[test]
    fn hand_set_weights_give_analytic_scores() {
        let mut det = make_toy_detector(7, 2, 2).unwrap();
        let conv_b = Array1::from_vec((0..FEATURES).map(|i| 0.1 * i as f64 - 0.3).collect());
        det.set_conv(Array4::zeros((FEATURES, 3, 3, 3)), conv_b.clone());
        let mut head_w = Array2::zeros((3, FEATURES));
        for f in 0..FEATURES {
            head_w[[0, f]] = 0.25 * (f as f64 + 1.0) / FEATURES as f64;
            head_w[[1, f]] = -0.1;
            head_w[[2, f]] = 0.05 * f as f64;
        }
        let head_b = Array1::from_vec(vec![0.2, -0.1, 0.0]);
        det.set_head(head_w.clone(), head_b.clone());

        let img = test_image(4, 64, 64);
        let cands = det.forward(&img).unwrap();

        let feats: Vec<f64> = (0..FEATURES).map(|f| conv_b[f].tanh()).collect();
        let z0: f64 = head_b[0] + (0..FEATURES).map(|f| head_w[[0, f]] * feats[f]).sum::<f64>();
        let z1: f64 = head_b[1] + (0..FEATURES).map(|f| head_w[[1, f]] * feats[f]).sum::<f64>();
        for c in &cands {
            assert!((c.objectness - sigmoid(z0)).abs() < 1e-12);
            assert!((c.class_scores[0] - sigmoid(z1)).abs() < 1e-12);
        }
    }

    #[test]
    fn energy_gradient_matches_finite_differences() {
        let det = make_toy_detector(11, 3, 3).unwrap();
        let img = test_image(2, 64, 64);
        let mu = 0.0; // everything active; the set cannot flip under probes

        let (cands, trace) = det.forward_traced(&img).unwrap();
        let mask = active_set(&cands, DetectorKind::Toy, 0, mu);
        assert!(mask.iter().any(|m| *m));
        let grad_conf: Vec<f64> = mask.iter().map(|m| if *m { 1.0 } else { 0.0 }).collect();
        let grad = trace.backward(&grad_conf);

        let mut rng = stream(77, StreamTag::Synthetic, &[5]);
        let h = 1e-4;
        for _ in 0..20 {
            let y = rng.random_range(0..64usize);
            let x = rng.random_range(0..64usize);
            let c = rng.random_range(0..3usize);
            let mut plus = img.clone();
            plus[[y, x, c]] += h;
            let mut minus = img.clone();
            minus[[y, x, c]] -= h;
            let ep = obj_energy_masked(&det.forward(&plus).unwrap(), DetectorKind::Toy, 0, &mask);
            let em = obj_energy_masked(&det.forward(&minus).unwrap(), DetectorKind::Toy, 0, &mask);
            let fd = (ep - em) / (2.0 * h);
            let g = grad[[y, x, c]];
            let rel = ((g - fd) / fd.abs().max(1e-9)).abs();
            assert!(rel <= 1e-3, "({y},{x},{c}): grad {g} vs fd {fd}, rel {rel}");
        }
        // unmasked energy agrees with the masked one at the base point
        let e = obj_energy(&cands, DetectorKind::Toy, 0, mu);
        let em = obj_energy_masked(&cands, DetectorKind::Toy, 0, &mask);
        assert!((e - em).abs() < 1e-12);
    }

    #[test]
    fn objectness_bias_raises_sensitivity() {
        let base = ToyDetector::new(ToyDetectorConfig {
            seed: 21,
            ..ToyDetectorConfig::default()
        })
        .unwrap();
        let hot = ToyDetector::new(ToyDetectorConfig {
            seed: 21,
            objectness_bias: 2.0,
            ..ToyDetectorConfig::default()
        })
        .unwrap();
        let img = test_image(3, 64, 64);
        let eb = obj_energy(&base.forward(&img).unwrap(), DetectorKind::Toy, 0, 0.0);
        let eh = obj_energy(&hot.forward(&img).unwrap(), DetectorKind::Toy, 0, 0.0);
        assert!(eh > eb);
    }
}
