//! Person-class average precision.

use crate::bbox::BoundingBox;
use crate::error::{Error, Result};
use crate::eval::Detection;

/// Post-NMS detections and ground truth for one image, under a stable id so
/// metric results do not depend on supply order.
#[derive(Debug, Clone)]
pub struct ImageDetections {
    pub id: u64,
    pub detections: Vec<Detection>,
    pub ground_truth: Vec<BoundingBox>,
}

/// All-point interpolated average precision (percent) for one class.
///
/// Detections are ranked by descending score (ties broken by image id, then
/// box content) and greedily matched: each takes the highest-IoU unmatched
/// ground-truth box in its image at `IoU >= iou_thresh`, one match per box.
/// The result is the exact area under the precision envelope.
pub fn compute_ap(
    images: &[ImageDetections],
    person_class: u32,
    iou_thresh: f64,
) -> Result<f64> {
    let gt_per_image: Vec<Vec<&BoundingBox>> = images
        .iter()
        .map(|img| {
            img.ground_truth
                .iter()
                .filter(|b| b.class_id == person_class)
                .collect()
        })
        .collect();
    let n_gt: usize = gt_per_image.iter().map(|g| g.len()).sum();
    if n_gt == 0 {
        return Err(Error::argument(
            "average precision is undefined without ground-truth boxes",
        ));
    }

    // rank all person detections globally
    let mut ranked: Vec<(usize, &Detection)> = Vec::new();
    for (ii, img) in images.iter().enumerate() {
        for d in img.detections.iter().filter(|d| d.class_id == person_class) {
            ranked.push((ii, d));
        }
    }
    ranked.sort_by(|(ia, da), (ib, db)| {
        db.score
            .partial_cmp(&da.score)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(images[*ia].id.cmp(&images[*ib].id))
            .then(
                (da.bbox.cx, da.bbox.cy, da.bbox.w, da.bbox.h)
                    .partial_cmp(&(db.bbox.cx, db.bbox.cy, db.bbox.w, db.bbox.h))
                    .unwrap_or(std::cmp::Ordering::Equal),
            )
    });

    let mut matched: Vec<Vec<bool>> = gt_per_image.iter().map(|g| vec![false; g.len()]).collect();
    let mut is_tp = Vec::with_capacity(ranked.len());
    for (ii, det) in &ranked {
        let mut best: Option<(usize, f64)> = None;
        for (gi, gt) in gt_per_image[*ii].iter().enumerate() {
            if matched[*ii][gi] {
                continue;
            }
            let iou = det.bbox.iou(gt);
            if iou >= iou_thresh && best.map_or(true, |(_, b)| iou > b) {
                best = Some((gi, iou));
            }
        }
        match best {
            Some((gi, _)) => {
                matched[*ii][gi] = true;
                is_tp.push(true);
            }
            None => is_tp.push(false),
        }
    }

    // precision/recall sequence and the right-to-left precision envelope
    let mut precisions = Vec::with_capacity(is_tp.len());
    let mut recalls = Vec::with_capacity(is_tp.len());
    let mut tp = 0usize;
    for (rank, hit) in is_tp.iter().enumerate() {
        if *hit {
            tp += 1;
        }
        precisions.push(tp as f64 / (rank + 1) as f64);
        recalls.push(tp as f64 / n_gt as f64);
    }
    let mut envelope = precisions.clone();
    for i in (0..envelope.len().saturating_sub(1)).rev() {
        if envelope[i + 1] > envelope[i] {
            envelope[i] = envelope[i + 1];
        }
    }

    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for i in 0..is_tp.len() {
        if is_tp[i] {
            ap += (recalls[i] - prev_recall) * envelope[i];
            prev_recall = recalls[i];
        }
    }
    Ok(100.0 * ap)
}
