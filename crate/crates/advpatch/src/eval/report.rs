//! End-to-end evaluation of a patch against one detector.

use serde::Serialize;

use crate::dataset::LabeledImage;
use crate::detect::Detector;
use crate::error::{Error, Result};
use crate::eval::ap::{compute_ap, ImageDetections};
use crate::eval::asr::compute_asr;
use crate::eval::{detections_from, nms, Detection};
use crate::patch::Patch;
use crate::transform::{apply_patch, resize_map, RandomDraw, TransformConfig};

/// Inference-stage thresholds.
#[derive(Debug, Clone, Copy, Serialize, serde::Deserialize)]
#[serde(default)]
pub struct EvalParams {
    /// Output confidence threshold.
    pub conf_thresh: f64,
    /// NMS IoU threshold.
    pub nms_iou: f64,
    /// IoU for matching detections to ground truth.
    pub match_iou: f64,
    pub person_class_id: u32,
    pub seed: u64,
}

impl Default for EvalParams {
    fn default() -> Self {
        EvalParams {
            conf_thresh: 0.5,
            nms_iou: 0.4,
            match_iou: 0.5,
            person_class_id: 0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PerImageRow {
    pub id: u64,
    pub person_boxes: usize,
    pub clean_person_detections: usize,
    pub adv_person_detections: usize,
    /// True when no person box was matched in the adversarial image.
    pub attacked: bool,
}

/// AP/ASR summary for one detector, JSON-serializable.
#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub detector: String,
    pub ap_clean: f64,
    pub ap_adv: f64,
    pub ap_drop: f64,
    pub asr: f64,
    pub per_image: Vec<PerImageRow>,
}

fn detect_on(
    detector: &dyn Detector,
    image: &crate::tensor::ImageTensor,
    params: &EvalParams,
) -> Result<Vec<Detection>> {
    let (h, w, _) = image.dim();
    let input = if (h, w) != detector.input_size() {
        resize_map((h, w), detector.input_size()).forward(image)
    } else {
        image.clone()
    };
    let cands = detector.forward(&input)?;
    let dets = detections_from(&cands, detector.kind());
    Ok(nms(&dets, params.nms_iou, params.conf_thresh))
}

/// Runs clean and patched inference over the dataset and reports person AP
/// before/after plus the attack success rate.
pub fn evaluate(
    patch: &Patch,
    dataset: &[LabeledImage],
    detector: &dyn Detector,
    transform: &TransformConfig,
    params: &EvalParams,
) -> Result<EvalReport> {
    if dataset.is_empty() {
        return Err(Error::argument("dataset must be nonempty"));
    }
    let mut clean_images = Vec::with_capacity(dataset.len());
    let mut adv_images = Vec::with_capacity(dataset.len());
    let mut per_image = Vec::with_capacity(dataset.len());

    for (i, sample) in dataset.iter().enumerate() {
        let clean_dets = detect_on(detector, &sample.image, params)?;

        let n_boxes = sample.person_boxes(params.person_class_id).len();
        let draw = RandomDraw::sample(
            transform,
            (patch.height(), patch.width()),
            params.seed,
            0,
            i as u64,
            n_boxes,
        );
        let adv = apply_patch(patch, sample, transform, &draw, params.person_class_id)?;
        let adv_dets = detect_on(detector, &adv.image, params)?;

        clean_images.push(ImageDetections {
            id: i as u64,
            detections: clean_dets,
            ground_truth: sample.boxes.clone(),
        });
        adv_images.push(ImageDetections {
            id: i as u64,
            detections: adv_dets,
            ground_truth: sample.boxes.clone(),
        });
    }

    let ap_clean = compute_ap(&clean_images, params.person_class_id, params.match_iou)?;
    let ap_adv = compute_ap(&adv_images, params.person_class_id, params.match_iou)?;
    let asr = compute_asr(
        &adv_images,
        params.person_class_id,
        params.match_iou,
        params.conf_thresh,
    )?;

    for (clean, adv) in clean_images.iter().zip(&adv_images) {
        let person = |d: &Detection| d.class_id == params.person_class_id;
        let n_person = clean
            .ground_truth
            .iter()
            .filter(|b| b.class_id == params.person_class_id)
            .count();
        let single = [adv.clone()];
        let attacked = n_person > 0
            && compute_asr(&single, params.person_class_id, params.match_iou, params.conf_thresh)
                .map(|v| v == 1.0)
                .unwrap_or(false);
        per_image.push(PerImageRow {
            id: clean.id,
            person_boxes: n_person,
            clean_person_detections: clean.detections.iter().filter(|d| person(d)).count(),
            adv_person_detections: adv.detections.iter().filter(|d| person(d)).count(),
            attacked,
        });
    }

    Ok(EvalReport {
        detector: detector.name().to_string(),
        ap_clean,
        ap_adv,
        ap_drop: ap_clean - ap_adv,
        asr,
        per_image,
    })
}

/// Serializes reports (one per detector) as a single JSON document.
pub fn reports_to_json(reports: &[EvalReport]) -> String {
    serde_json::to_string_pretty(&serde_json::json!({ "detectors": reports }))
        .expect("reports serialize")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detect::make_toy_detector;
    use crate::patch::InitMode;
    use crate::synth;

    #[test]
    fn evaluate_produces_a_consistent_report() {
        let dataset: Vec<LabeledImage> =
            (0..4).map(|i| synth::toy_scene(40 + i, 64, 64, 1)).collect();
        let det = make_toy_detector(2, 4, 3).unwrap();
        let patch = Patch::init(12, 12, InitMode::RandomUniform, 3).unwrap();
        let params = EvalParams {
            conf_thresh: 0.1,
            ..EvalParams::default()
        };
        let report = evaluate(
            &patch,
            &dataset,
            &det,
            &TransformConfig::default(),
            &params,
        )
        .unwrap();
        assert_eq!(report.per_image.len(), 4);
        assert!((report.ap_drop - (report.ap_clean - report.ap_adv)).abs() < 1e-12);
        assert!((0.0..=100.0).contains(&report.ap_clean));
        assert!((0.0..=1.0).contains(&report.asr));
        let json = reports_to_json(&[report]);
        assert!(json.contains("ap_clean"));
    }
}
