//! Deterministic synthetic scenes for tests, benchmarks, and demos.

use std::path::Path;

use ndarray::Array3;
use rand::Rng;

use crate::bbox::BoundingBox;
use crate::dataset::LabeledImage;
use crate::error::{Error, Result};
use crate::rng::{stream, StreamTag};
use crate::tensor;

/// Builds a small scene: a textured background plus `n_boxes` person-shaped
/// figures with matching ground-truth boxes (class 0). Fully determined by
/// the seed.
pub fn toy_scene(seed: u64, height: usize, width: usize, n_boxes: usize) -> LabeledImage {
    let mut rng = stream(seed, StreamTag::Synthetic, &[height as u64, width as u64]);

    // low-frequency background
    let fx = rng.random_range(0.5..2.0);
    let fy = rng.random_range(0.5..2.0);
    let phase = rng.random_range(0.0..std::f64::consts::TAU);
    let base: [f64; 3] = [
        rng.random_range(0.2..0.8),
        rng.random_range(0.2..0.8),
        rng.random_range(0.2..0.8),
    ];
    let mut image = Array3::from_shape_fn((height, width, 3), |(y, x, c)| {
        let u = x as f64 / width as f64;
        let v = y as f64 / height as f64;
        let wave =
            0.15 * ((fx * u * std::f64::consts::TAU + phase).sin() * (fy * v * std::f64::consts::TAU).cos());
        (base[c] + wave + 0.05 * ((x + y + c) % 7) as f64 / 7.0).clamp(0.0, 1.0)
    });

    let mut boxes = Vec::with_capacity(n_boxes);
    for _ in 0..n_boxes {
        let bh = rng.random_range(0.45..0.7);
        let bw = bh * rng.random_range(0.35..0.5);
        let cx = rng.random_range(bw / 2.0..1.0 - bw / 2.0);
        let cy = rng.random_range(bh / 2.0..1.0 - bh / 2.0);
        let bbox = BoundingBox::new(0, cx, cy, bw, bh).expect("sampled box is valid");

        // torso
        let tone: [f64; 3] = [
            rng.random_range(0.1..0.9),
            rng.random_range(0.1..0.9),
            rng.random_range(0.1..0.9),
        ];
        let (x0, y0, x1, y1) = bbox.corners();
        let px0 = (x0 * width as f64) as usize;
        let px1 = ((x1 * width as f64) as usize).min(width);
        let py0 = (y0 * height as f64) as usize;
        let py1 = ((y1 * height as f64) as usize).min(height);
        for y in py0..py1 {
            for x in px0..px1 {
                let frac_y = (y - py0) as f64 / (py1 - py0).max(1) as f64;
                // head third is brighter, legs darken
                let shade = if frac_y < 0.25 { 0.25 } else { -0.1 * frac_y };
                for c in 0..3 {
                    image[[y, x, c]] = (tone[c] + shade).clamp(0.0, 1.0);
                }
            }
        }
        boxes.push(bbox);
    }
    LabeledImage { image, boxes }
}

/// Writes `count` synthetic scenes as PNG + label pairs, returning the
/// number written. Useful for exercising the CLI without a real dataset.
pub fn write_toy_dataset(
    images_dir: &Path,
    labels_dir: &Path,
    count: usize,
    seed: u64,
    height: usize,
    width: usize,
) -> Result<usize> {
    std::fs::create_dir_all(images_dir).map_err(|e| Error::io(images_dir, e))?;
    std::fs::create_dir_all(labels_dir).map_err(|e| Error::io(labels_dir, e))?;
    for i in 0..count {
        let scene = toy_scene(seed.wrapping_add(i as u64), height, width, 1);
        let name = format!("scene_{i:04}");
        tensor::save_png(&scene.image, &images_dir.join(format!("{name}.png")))?;
        let labels: String = scene
            .boxes
            .iter()
            .map(|b| b.to_label_line() + "\n")
            .collect();
        let label_path = labels_dir.join(format!("{name}.txt"));
        std::fs::write(&label_path, labels).map_err(|e| Error::io(label_path, e))?;
    }
    Ok(count)
}
