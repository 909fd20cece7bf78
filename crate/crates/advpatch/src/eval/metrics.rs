//! Print-fidelity and interpretability metrics.

use crate::bbox::BoundingBox;
use crate::detect::{Candidate, DetectorKind};
use crate::error::{Error, Result};
use crate::eval::gradcam::Heatmap;
use crate::tensor::ImageTensor;

/// Fraction of the box where the binarized clean and adversarial heatmaps
/// disagree. Both maps binarize at `tau` times their own global maximum.
pub fn disruption_area_ratio(
    h_clean: &Heatmap,
    h_adv: &Heatmap,
    bbox: &BoundingBox,
    tau: f64,
) -> Result<f64> {
    if h_clean.dims() != h_adv.dims() {
        return Err(Error::argument("heatmap dimensions disagree"));
    }
    let (h, w) = h_clean.dims();
    let (x0f, y0f, x1f, y1f) = bbox.corners();
    let x0 = ((x0f * w as f64).floor().max(0.0)) as usize;
    let x1 = ((x1f * w as f64).ceil().min(w as f64)) as usize;
    let y0 = ((y0f * h as f64).floor().max(0.0)) as usize;
    let y1 = ((y1f * h as f64).ceil().min(h as f64)) as usize;
    if x1 <= x0 || y1 <= y0 {
        return Err(Error::argument("box denormalizes to an empty pixel region"));
    }
    let thresh_clean = tau * h_clean.values.iter().copied().fold(0.0f64, f64::max);
    let thresh_adv = tau * h_adv.values.iter().copied().fold(0.0f64, f64::max);
    let mut differing = 0usize;
    for y in y0..y1 {
        for x in x0..x1 {
            let a = h_clean.values[[y, x]] > thresh_clean;
            let b = h_adv.values[[y, x]] > thresh_adv;
            if a != b {
                differing += 1;
            }
        }
    }
    Ok(differing as f64 / ((x1 - x0) * (y1 - y0)) as f64)
}

fn hue_degrees(r: f64, g: f64, b: f64) -> f64 {
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    if delta <= 0.0 {
        return 0.0;
    }
    let h = if max == r {
        60.0 * (((g - b) / delta).rem_euclid(6.0))
    } else if max == g {
        60.0 * ((b - r) / delta + 2.0)
    } else {
        60.0 * ((r - g) / delta + 4.0)
    };
    h.rem_euclid(360.0)
}

/// 180-bin hue histogram over the HSV hue channel.
pub fn hue_histogram(img: &ImageTensor) -> [f64; 180] {
    let mut bins = [0.0f64; 180];
    let (h, w, _) = img.dim();
    for y in 0..h {
        for x in 0..w {
            let hue = hue_degrees(img[[y, x, 0]], img[[y, x, 1]], img[[y, x, 2]]);
            let bin = ((hue / 2.0) as usize).min(179);
            bins[bin] += 1.0;
        }
    }
    bins
}

/// Correlation of the two images' hue histograms, in `[-1, 1]`; exactly 1
/// for identical histograms.
pub fn hue_similarity(a: &ImageTensor, b: &ImageTensor) -> f64 {
    let ha = hue_histogram(a);
    let hb = hue_histogram(b);
    if ha == hb {
        return 1.0;
    }
    let mean = |h: &[f64; 180]| h.iter().sum::<f64>() / 180.0;
    let (ma, mb) = (mean(&ha), mean(&hb));
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for i in 0..180 {
        let da = ha[i] - ma;
        let db = hb[i] - mb;
        cov += da * db;
        va += da * da;
        vb += db * db;
    }
    if va <= 0.0 || vb <= 0.0 {
        return 0.0;
    }
    cov / (va.sqrt() * vb.sqrt())
}

/// Per-class candidate counts before and after the attack.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ClassCounts {
    pub class_id: u32,
    pub clean: usize,
    pub adv: usize,
}

fn count_per_class(cands: &[Candidate], kind: DetectorKind, conf_thresh: f64, counts: &mut [usize]) {
    for c in cands {
        match kind {
            DetectorKind::TwoStage => {
                if c.objectness >= conf_thresh {
                    let class = c.bbox.class_id as usize;
                    if class < counts.len() {
                        counts[class] += 1;
                    }
                }
            }
            DetectorKind::OneStage | DetectorKind::Toy => {
                let mut best = 0usize;
                let mut best_v = f64::NEG_INFINITY;
                for (i, v) in c.class_scores.iter().enumerate() {
                    if *v > best_v {
                        best_v = *v;
                        best = i;
                    }
                }
                if c.objectness * best_v.max(0.0) >= conf_thresh && best < counts.len() {
                    counts[best] += 1;
                }
            }
        }
    }
}

/// Counts post-threshold candidates per predicted class for the clean and
/// adversarial passes of the same detector; feeds the bar-chart export.
pub fn category_box_histogram(
    candidates_clean: &[Candidate],
    candidates_adv: &[Candidate],
    kind: DetectorKind,
    class_count: usize,
    conf_thresh: f64,
) -> Vec<ClassCounts> {
    let mut clean = vec![0usize; class_count];
    let mut adv = vec![0usize; class_count];
    count_per_class(candidates_clean, kind, conf_thresh, &mut clean);
    count_per_class(candidates_adv, kind, conf_thresh, &mut adv);
    (0..class_count)
        .map(|c| ClassCounts {
            class_id: c as u32,
            clean: clean[c],
            adv: adv[c],
        })
        .collect()
}
