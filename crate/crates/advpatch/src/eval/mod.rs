//! Attack-quality metrics and interpretability tools.

pub mod ap;
pub mod asr;
pub mod gradcam;
pub mod metrics;
pub mod report;

use crate::bbox::BoundingBox;
use crate::detect::{Candidate, DetectorKind};

pub use ap::compute_ap;
pub use asr::compute_asr;
pub use gradcam::{grad_cam, Heatmap, LinearCamModel};
pub use metrics::{category_box_histogram, disruption_area_ratio, hue_similarity, ClassCounts};
pub use report::{evaluate, EvalParams, EvalReport};

/// One post-NMS detection.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub bbox: BoundingBox,
    pub score: f64,
    pub class_id: u32,
}

/// Collapses raw candidates to class-labelled detections: predicted class is
/// the argmax class score (ties to the lowest index), confidence follows the
/// adapter kind.
pub fn detections_from(candidates: &[Candidate], kind: DetectorKind) -> Vec<Detection> {
    candidates
        .iter()
        .map(|c| {
            let (class_id, score) = match kind {
                DetectorKind::TwoStage => (c.bbox.class_id, c.objectness),
                DetectorKind::OneStage | DetectorKind::Toy => {
                    let mut best = 0usize;
                    let mut best_v = f64::NEG_INFINITY;
                    for (i, v) in c.class_scores.iter().enumerate() {
                        if *v > best_v {
                            best_v = *v;
                            best = i;
                        }
                    }
                    (best as u32, c.objectness * best_v.max(0.0))
                }
            };
            Detection {
                bbox: c.bbox,
                score,
                class_id,
            }
        })
        .collect()
}

/// Greedy per-class non-maximum suppression.
///
/// Detections below `conf_thresh` are dropped; the rest are visited in
/// descending score order (ties keep input order) and kept only if their IoU
/// with every kept detection of the same class stays at or below
/// `iou_thresh`.
pub fn nms(detections: &[Detection], iou_thresh: f64, conf_thresh: f64) -> Vec<Detection> {
    let mut order: Vec<usize> = (0..detections.len())
        .filter(|i| detections[*i].score >= conf_thresh)
        .collect();
    order.sort_by(|a, b| {
        detections[*b]
            .score
            .partial_cmp(&detections[*a].score)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(b))
    });
    let mut kept: Vec<Detection> = Vec::new();
    for i in order {
        let d = &detections[i];
        let suppressed = kept
            .iter()
            .any(|k| k.class_id == d.class_id && k.bbox.iou(&d.bbox) > iou_thresh);
        if !suppressed {
            kept.push(d.clone());
        }
    }
    kept
}
