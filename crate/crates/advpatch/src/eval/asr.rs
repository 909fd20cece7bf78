//! Attack success rate.

use crate::error::{Error, Result};
use crate::eval::ap::ImageDetections;

/// Fraction of person-bearing images whose every person box went undetected.
///
/// An image counts as successfully attacked when none of its person ground-
/// truth boxes is matched by any detection of the person class with score at
/// least `conf_thresh` and IoU at least `iou_thresh`. Images without person
/// boxes carry no one to attack and are excluded from the denominator.
pub fn compute_asr(
    images: &[ImageDetections],
    person_class: u32,
    iou_thresh: f64,
    conf_thresh: f64,
) -> Result<f64> {
    let mut eligible = 0usize;
    let mut successes = 0usize;
    for img in images {
        let gts: Vec<_> = img
            .ground_truth
            .iter()
            .filter(|b| b.class_id == person_class)
            .collect();
        if gts.is_empty() {
            continue;
        }
        eligible += 1;
        let mut matched = vec![false; gts.len()];
        let mut dets: Vec<_> = img
            .detections
            .iter()
            .filter(|d| d.class_id == person_class && d.score >= conf_thresh)
            .collect();
        dets.sort_by(|a, b| b.score.partial_cmp(&a.score).unwrap_or(std::cmp::Ordering::Equal));
        for det in dets {
            let mut best: Option<(usize, f64)> = None;
            for (gi, gt) in gts.iter().enumerate() {
                if matched[gi] {
                    continue;
                }
                let iou = det.bbox.iou(gt);
                if iou >= iou_thresh && best.map_or(true, |(_, b)| iou > b) {
                    best = Some((gi, iou));
                }
            }
            if let Some((gi, _)) = best {
                matched[gi] = true;
            }
        }
        if matched.iter().all(|m| !m) {
            successes += 1;
        }
    }
    if eligible == 0 {
        return Err(Error::argument(
            "attack success rate is undefined without person-bearing images",
        ));
    }
    Ok(successes as f64 / eligible as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bbox::BoundingBox;
    use crate::eval::Detection;

    fn person(cx: f64, cy: f64) -> BoundingBox {
        BoundingBox::new(0, cx, cy, 0.2, 0.3).unwrap()
    }

    fn hit(b: &BoundingBox, score: f64) -> Detection {
        Detection {
            bbox: *b,
            score,
            class_id: 0,
        }
    }

    #[test]
    fn everyone_detected_means_zero() {
        let images: Vec<ImageDetections> = (0..4)
            .map(|i| {
                let g = person(0.4, 0.5);
                ImageDetections {
                    id: i,
                    detections: vec![hit(&g, 0.9)],
                    ground_truth: vec![g],
                }
            })
            .collect();
        assert_eq!(compute_asr(&images, 0, 0.5, 0.5).unwrap(), 0.0);
    }

    #[test]
    fn no_detections_anywhere_means_one() {
        let images: Vec<ImageDetections> = (0..4)
            .map(|i| ImageDetections {
                id: i,
                detections: vec![],
                ground_truth: vec![person(0.4, 0.5)],
            })
            .collect();
        assert_eq!(compute_asr(&images, 0, 0.5, 0.5).unwrap(), 1.0);
    }

    #[test]
    fn low_confidence_detections_do_not_count_as_found() {
        let g = person(0.4, 0.5);
        let images = vec![ImageDetections {
            id: 0,
            detections: vec![hit(&g, 0.3)],
            ground_truth: vec![g],
        }];
        assert_eq!(compute_asr(&images, 0, 0.5, 0.5).unwrap(), 1.0);
    }

    #[test]
    fn boxless_images_are_excluded() {
        let g = person(0.4, 0.5);
        let images = vec![
            ImageDetections {
                id: 0,
                detections: vec![],
                ground_truth: vec![],
            },
            ImageDetections {
                id: 1,
                detections: vec![],
                ground_truth: vec![g],
            },
        ];
        assert_eq!(compute_asr(&images, 0, 0.5, 0.5).unwrap(), 1.0);
        let empty_only = vec![ImageDetections {
            id: 0,
            detections: vec![],
            ground_truth: vec![],
        }];
        assert!(compute_asr(&empty_only, 0, 0.5, 0.5).is_err());
    }

    // 20-image fixture with hand-counted outcomes: images 0..7 attacked
    // (no detection), 8..13 still detected, 14..19 detected via a second box
    // even though the first is missed -> 8 of 20 succeed.
    #[test]
    fn labeled_fixture_matches_hand_count() {
        let mut images = Vec::new();
        for i in 0..20u64 {
            let g1 = person(0.3, 0.4);
            let g2 = person(0.7, 0.6);
            let (dets, gts) = if i < 8 {
                (vec![], vec![g1, g2])
            } else if i < 14 {
                (vec![hit(&g1, 0.8)], vec![g1, g2])
            } else {
                (vec![hit(&g2, 0.6)], vec![g1, g2])
            };
            images.push(ImageDetections {
                id: i,
                detections: dets,
                ground_truth: gts,
            });
        }
        let asr = compute_asr(&images, 0, 0.5, 0.5).unwrap();
        assert_eq!(asr, 8.0 / 20.0);
    }
}
