//! Scratch gradient-norm tracing (not shipped).

use advpatch::detect::{obj_energy_grad, Detector, ToyDetector, ToyDetectorConfig};
use advpatch::transform::{apply_patch_traced, RandomDraw, TransformConfig};
use advpatch::{synth, InitMode, Patch};

fn main() {
    let sample = synth::toy_scene(500, 64, 64, 1);
    println!("boxes: {:?}", sample.boxes);
    let det = ToyDetector::new(ToyDetectorConfig {
        name: "hot".into(),
        seed: 101,
        grid: 2,
        classes: 3,
        objectness_bias: 2.5,
        ..ToyDetectorConfig::default()
    })
    .unwrap();
    let patch = Patch::init(32, 32, InitMode::RandomUniform, 7).unwrap();
    let cfg = TransformConfig {
        rotation_deg: 10.0,
        translate_frac: 0.05,
        patch_scale: 0.6,
        tps_sigma: 0.03,
        noise_std: 0.0,
        ..TransformConfig::default()
    };
    let draw = RandomDraw::sample(&cfg, (32, 32), 7, 0, 0, 1);
    let (adv, trace) = apply_patch_traced(&patch, &sample, &cfg, &draw, 0).unwrap();
    println!("mask px: {}", trace.union_mask().sum());

    let (cands, dtrace) = det.forward_traced(&adv.image).unwrap();
    let (energy, grad_conf) = obj_energy_grad(&cands, det.kind(), det.person_class_index(), 0.0);
    println!("energy {energy}, active {}", grad_conf.iter().sum::<f64>());
    let g_img = dtrace.backward(&grad_conf);
    let n1: f64 = g_img.iter().map(|v| v * v).sum::<f64>().sqrt();
    println!("|g_img| = {n1:.6e}");
    let g_patch = trace.backward(&g_img);
    let n2: f64 = g_patch.iter().map(|v| v * v).sum::<f64>().sqrt();
    println!("|g_patch| = {n2:.6e}, dims {:?}", g_patch.dim());

    // finite-difference sanity on one pixel with decent gradient
    let mut best = (0usize, 0usize, 0usize, 0.0f64);
    for ((y, x, c), g) in g_patch.indexed_iter() {
        if g.abs() > best.3.abs() {
            best = (y, x, c, *g);
        }
    }
    println!("max |g| at {:?}", best);
    let h = 1e-4;
    let eval = |p: &Patch| {
        let (adv, _) = apply_patch_traced(p, &sample, &cfg, &draw, 0).unwrap();
        let (cands, _) = det.forward_traced(&adv.image).unwrap();
        obj_energy_grad(&cands, det.kind(), det.person_class_index(), 0.0).0
    };
    let mut plus = patch.clone();
    plus.pixels_mut()[[best.0, best.1, best.2]] += h;
    let mut minus = patch.clone();
    minus.pixels_mut()[[best.0, best.1, best.2]] -= h;
    let fd = (eval(&plus) - eval(&minus)) / (2.0 * h);
    println!("fd {fd:.6e} vs analytic {:.6e}", best.3);
}
