//! End-to-end CLI runs on a generated toy dataset.

use std::path::Path;
use std::process::Command;

fn advpatch() -> Command {
    Command::new(env!("CARGO_BIN_EXE_advpatch"))
}

fn write_config(dir: &Path) -> std::path::PathBuf {
    let images = dir.join("images");
    let labels = dir.join("labels");
    advpatch::synth::write_toy_dataset(&images, &labels, 4, 77, 64, 64).unwrap();
    let palette = dir.join("printable.txt");
    std::fs::write(&palette, "0, 0, 0\n1, 1, 1\n0.8, 0.1, 0.1\n0.1, 0.6, 0.8\n").unwrap();

    let config = dir.join("run.toml");
    std::fs::write(
        &config,
        format!(
            r#"
seed = 5
output_dir = "{out}"
palette = "{pal}"

[dataset]
images_dir = "{img}"
labels_dir = "{lbl}"

[patch]
height = 16
width = 16
init = "random-uniform"

[train]
epochs = 2
batch_size = 2
mode = "dynamic"

[transform]
noise_std = 0.0

[loss]
alpha = 0.01
beta = 0.165

[eval]
conf_thresh = 0.1

[[detector]]
name = "toy-a"
kind = "toy"
seed = 11
grid = 4
classes = 3

[[detector]]
name = "toy-b"
kind = "toy"
seed = 12
grid = 4
classes = 3
"#,
            out = dir.join("out").display(),
            img = images.display(),
            lbl = labels.display(),
            pal = palette.display(),
        ),
    )
    .unwrap();
    config
}

#[test]
fn train_eval_preview_palette_export_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path());
    let out = dir.path().join("out");

    // train
    let status = advpatch()
        .args(["train", "--config"])
        .arg(&config)
        .status()
        .unwrap();
    assert!(status.success());
    assert!(out.join("patch.png").exists());
    assert!(out.join("patch.meta.txt").exists());
    let log = std::fs::read_to_string(out.join("log.csv")).unwrap();
    assert!(log.starts_with("epoch,step,model_0_loss,model_1_loss,w_0,w_1,nps,smooth,total"));
    assert_eq!(log.lines().count(), 1 + 4); // header + 2 epochs x 2 steps

    // eval
    let status = advpatch()
        .args(["eval", "--config"])
        .arg(&config)
        .arg("--patch")
        .arg(out.join("patch.png"))
        .status()
        .unwrap();
    assert!(status.success());
    let report = std::fs::read_to_string(out.join("report.json")).unwrap();
    assert!(report.contains("ap_clean") && report.contains("toy-b"));

    // preview
    let status = advpatch()
        .args(["preview", "--count", "3", "--config"])
        .arg(&config)
        .status()
        .unwrap();
    assert!(status.success());
    for i in 0..3 {
        assert!(out.join(format!("preview_{i:04}.png")).exists());
    }

    // palette reduction on a measured-colors file
    let measured = dir.path().join("measured.txt");
    let mut text = String::new();
    for i in 0..40 {
        let v = i as f64 / 39.0;
        text.push_str(&format!("{v}, {}, {}\n", 1.0 - v, (v * 0.5)));
    }
    std::fs::write(&measured, text).unwrap();
    let status = advpatch()
        .args(["palette", "--count", "10", "--measured"])
        .arg(&measured)
        .arg("--config")
        .arg(&config)
        .status()
        .unwrap();
    assert!(status.success());
    let palette = std::fs::read_to_string(out.join("palette.txt")).unwrap();
    assert_eq!(palette.lines().count(), 10);

    // export-adv
    let status = advpatch()
        .args(["export-adv", "--config"])
        .arg(&config)
        .arg("--patch")
        .arg(out.join("patch.png"))
        .status()
        .unwrap();
    assert!(status.success());
    let adv_images = out.join("adv_dataset").join("images");
    assert_eq!(std::fs::read_dir(&adv_images).unwrap().count(), 4);
    assert_eq!(
        std::fs::read_dir(out.join("adv_dataset").join("labels"))
            .unwrap()
            .count(),
        4
    );
}

#[test]
fn unknown_subcommand_fails_with_usage() {
    let output = advpatch().arg("frobnicate").output().unwrap();
    assert!(!output.status.success());
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.to_lowercase().contains("usage"), "{stderr}");
}

#[test]
fn missing_config_is_a_clean_error() {
    let output = advpatch()
        .args(["train", "--config", "/nonexistent/nope.toml"])
        .env_remove("ADVPATCH_CONFIG")
        .output()
        .unwrap();
    assert!(!output.status.success());
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("nope.toml"), "{stderr}");
}

#[test]
fn env_var_supplies_the_config_path() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path());
    let status = advpatch()
        .args(["preview", "--count", "1"])
        .env("ADVPATCH_CONFIG", &config)
        .status()
        .unwrap();
    assert!(status.success());
}

#[test]
fn seed_override_changes_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path());
    let out = dir.path().join("out");

    let run = |seed: &str, name: &str| {
        let status = advpatch()
            .args(["train", "--seed", seed, "--config"])
            .arg(&config)
            .status()
            .unwrap();
        assert!(status.success());
        let bytes = std::fs::read(out.join("patch.png")).unwrap();
        std::fs::write(out.join(name), &bytes).unwrap();
        bytes
    };
    let a = run("9", "a.png");
    let b = run("9", "b.png");
    let c = run("10", "c.png");
    assert_eq!(a, b);
    assert_ne!(a, c);
}
