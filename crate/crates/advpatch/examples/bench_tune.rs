//! Scratch calibration for the toy min-max benchmark (not shipped).

use advpatch::bbox::BoundingBox;
use advpatch::dataset::LabeledImage;
use advpatch::detect::{Detector, ToyDetector, ToyDetectorConfig};
use advpatch::ensemble::{train, TrainConfig, TrainMode};
use advpatch::rng::{stream, StreamTag};
use advpatch::transform::TransformConfig;
use advpatch::{InitMode, LossWeights, Patch};
use ndarray::Array3;
use rand::Rng;

fn bench_scene(seed: u64) -> LabeledImage {
    let mut rng = stream(seed, StreamTag::Synthetic, &[64, 64]);
    let image = Array3::from_shape_fn((64, 64, 3), |(y, x, c)| {
        let v: f64 = ((y * 13 + x * 7 + c * 29 + seed as usize * 3) % 53) as f64 / 52.0;
        0.2 + 0.6 * v
    });
    let cx = rng.random_range(0.45..0.55);
    let cy = rng.random_range(0.45..0.55);
    let h = rng.random_range(0.8..0.88);
    let w = h * 0.45;
    let bbox = BoundingBox::new(0, cx, cy, w, h).unwrap();
    LabeledImage::new(image, vec![bbox]).unwrap()
}

fn bench_transform() -> TransformConfig {
    TransformConfig {
        rotation_deg: 10.0,
        translate_frac: 0.05,
        patch_scale: 0.8,
        tps_sigma: 0.03,
        noise_std: 0.0,
        ..TransformConfig::default()
    }
}

fn detectors() -> (ToyDetector, ToyDetector) {
    let a = ToyDetector::new(ToyDetectorConfig {
        name: "toy-hot".into(),
        seed: 101,
        grid: 2,
        classes: 3,
        objectness_bias: 2.2,
        weight_gain: 2.0,
        ..ToyDetectorConfig::default()
    })
    .unwrap();
    let b = ToyDetector::new(ToyDetectorConfig {
        name: "toy-cold".into(),
        seed: 202,
        grid: 2,
        classes: 3,
        objectness_bias: -2.1,
        weight_gain: 2.0,
        ..ToyDetectorConfig::default()
    })
    .unwrap();
    (a, b)
}

fn main() {
    let dataset: Vec<_> = (0..16).map(|i| bench_scene(500 + i)).collect();
    let (a, b) = detectors();
    let adapters: Vec<&dyn Detector> = vec![&a, &b];
    let init = Patch::init(32, 32, InitMode::RandomUniform, 7).unwrap();

    for mode in [TrainMode::Dynamic, TrainMode::Average] {
        let cfg = TrainConfig {
            epochs: 100,
            batch_size: 8,
            mu: 0.0,
            loss_weights: LossWeights {
                alpha: 0.0,
                beta: 0.0,
            },
            mode: mode.clone(),
            seed: 7,
            transform: bench_transform(),
            ..TrainConfig::default()
        };
        let t0 = std::time::Instant::now();
        let run = train(&dataset, &adapters, None, init.clone(), &cfg).unwrap();
        let first = &run.log[0];
        let last = run.log.last().unwrap();
        println!(
            "{mode:?}: steps {} time {:.1}s\n  step0 E=({:.4},{:.4}) ratio {:.2}\n  final E=({:.4},{:.4}) fracs=({:.3},{:.3}) gap {:.4} w={:?}",
            run.log.len(),
            t0.elapsed().as_secs_f64(),
            first.per_model_obj[0],
            first.per_model_obj[1],
            first.per_model_obj[0] / first.per_model_obj[1],
            last.per_model_obj[0],
            last.per_model_obj[1],
            last.per_model_obj[0] / first.per_model_obj[0],
            last.per_model_obj[1] / first.per_model_obj[1],
            (last.per_model_obj[0] - last.per_model_obj[1]).abs(),
            last.weights,
        );
        for s in [0, 25, 50, 100, 150, 199] {
            let r = &run.log[s];
            println!(
                "    step {s:3}: E=({:.4},{:.4}) w=({:.3},{:.3})",
                r.per_model_obj[0], r.per_model_obj[1], r.weights[0], r.weights[1]
            );
        }
    }
}
