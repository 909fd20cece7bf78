//! `advpatch` — train, evaluate, and export adversarial patches.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};

use advpatch::config::AdapterRegistry;
use advpatch::ensemble::{train, write_checkpoint, write_log_csv};
use advpatch::eval::{evaluate, report::reports_to_json};
use advpatch::transform::{apply_patch, RandomDraw};
use advpatch::{build_palette, Detector, Patch, PrintPalette, RunConfig};

#[derive(Parser)]
#[command(name = "advpatch", version, about = "Adversarial patch toolkit")]
struct Cli {
    /// Run configuration (TOML); falls back to $ADVPATCH_CONFIG.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimize a patch against the configured detector ensemble.
    Train,
    /// Measure AP before/after patching plus the attack success rate.
    Eval {
        /// Patch PNG to evaluate.
        #[arg(long)]
        patch: PathBuf,
        /// Report file; defaults to <output_dir>/report.json.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write composited sample images for visual inspection.
    Preview {
        /// Number of samples to write.
        #[arg(long, default_value_t = 3)]
        count: usize,
        /// Patch PNG; defaults to a freshly initialized patch.
        #[arg(long)]
        patch: Option<PathBuf>,
    },
    /// Reduce a measured-colors file to a printable palette.
    Palette {
        /// Measured colors, one `r, g, b` triple per line.
        #[arg(long)]
        measured: PathBuf,
        /// Number of palette entries to keep.
        #[arg(long, default_value_t = 30)]
        count: usize,
        /// Output path; defaults to <output_dir>/palette.txt.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Composite the patch onto the whole dataset and write it out.
    ExportAdv {
        /// Patch PNG to composite.
        #[arg(long)]
        patch: PathBuf,
        /// Output directory; defaults to <output_dir>/adv_dataset.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_config(cli: &Cli) -> anyhow::Result<RunConfig> {
    let path = match &cli.config {
        Some(p) => p.clone(),
        None => match std::env::var_os("ADVPATCH_CONFIG") {
            Some(v) => PathBuf::from(v),
            None => bail!("no --config given and ADVPATCH_CONFIG is unset"),
        },
    };
    let mut cfg = RunConfig::load(&path)
        .with_context(|| format!("loading config {}", path.display()))?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn ensure_out_dir(cfg: &RunConfig) -> anyhow::Result<()> {
    std::fs::create_dir_all(&cfg.output_dir)
        .with_context(|| format!("creating output dir {}", cfg.output_dir.display()))
}

fn build_adapters(cfg: &RunConfig) -> anyhow::Result<Vec<Box<dyn Detector>>> {
    let registry = AdapterRegistry::default();
    Ok(registry.build_all(&cfg.detectors)?)
}

fn load_dataset_samples(cfg: &RunConfig) -> anyhow::Result<Vec<advpatch::LabeledImage>> {
    let index = advpatch::load_dataset(&cfg.dataset.images_dir, &cfg.dataset.labels_dir)?;
    if index.is_empty() {
        bail!(
            "no images found under {}",
            cfg.dataset.images_dir.display()
        );
    }
    Ok(index.load_all()?)
}

fn cmd_train(cfg: &RunConfig) -> anyhow::Result<()> {
    ensure_out_dir(cfg)?;
    let dataset = load_dataset_samples(cfg)?;
    let adapters = build_adapters(cfg)?;
    let refs: Vec<&dyn Detector> = adapters.iter().map(|a| a.as_ref()).collect();
    let palette = cfg.load_palette()?;
    let init = cfg.init_patch()?;
    let train_cfg = cfg.train_config();

    println!(
        "training {} epochs on {} images against {} detector(s)",
        train_cfg.epochs,
        dataset.len(),
        refs.len()
    );
    let result = train(&dataset, &refs, palette.as_ref(), init, &train_cfg)?;

    let steps = result.log.len();
    write_checkpoint(
        &result.patch,
        steps,
        cfg.seed,
        &result.weights,
        &cfg.output_dir,
        "patch",
    )?;
    write_log_csv(&result.log, refs.len(), &cfg.output_dir.join("log.csv"))?;
    if let Some(last) = result.log.last() {
        println!(
            "done after {steps} steps; final energies {:?}, weights {:?}",
            last.per_model_obj, last.weights
        );
    }
    println!("wrote {}", cfg.output_dir.join("patch.png").display());
    Ok(())
}

fn cmd_eval(cfg: &RunConfig, patch_path: &Path, out: Option<PathBuf>) -> anyhow::Result<()> {
    ensure_out_dir(cfg)?;
    let dataset = load_dataset_samples(cfg)?;
    let adapters = build_adapters(cfg)?;
    let patch = Patch::load_png(patch_path)?;
    let params = cfg.eval_params();

    let mut reports = Vec::new();
    for adapter in &adapters {
        let report = evaluate(&patch, &dataset, adapter.as_ref(), &cfg.transform, &params)?;
        println!(
            "{}: AP {:.2}% -> {:.2}% (drop {:.2}), ASR {:.3}",
            report.detector, report.ap_clean, report.ap_adv, report.ap_drop, report.asr
        );
        reports.push(report);
    }
    let out_path = out.unwrap_or_else(|| cfg.output_dir.join("report.json"));
    std::fs::write(&out_path, reports_to_json(&reports))
        .with_context(|| format!("writing {}", out_path.display()))?;
    println!("wrote {}", out_path.display());
    Ok(())
}

fn cmd_preview(cfg: &RunConfig, count: usize, patch_path: Option<PathBuf>) -> anyhow::Result<()> {
    ensure_out_dir(cfg)?;
    let dataset = load_dataset_samples(cfg)?;
    let patch = match patch_path {
        Some(p) => Patch::load_png(&p)?,
        None => cfg.init_patch()?,
    };
    let n = count.min(dataset.len());
    for (i, sample) in dataset.iter().take(n).enumerate() {
        let boxes = sample.person_boxes(cfg.dataset.person_class_id).len();
        let draw = RandomDraw::sample(
            &cfg.transform,
            (patch.height(), patch.width()),
            cfg.seed,
            0,
            i as u64,
            boxes,
        );
        let adv = apply_patch(
            &patch,
            sample,
            &cfg.transform,
            &draw,
            cfg.dataset.person_class_id,
        )?;
        let path = cfg.output_dir.join(format!("preview_{i:04}.png"));
        advpatch::tensor::save_png(&adv.image, &path)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn cmd_palette(
    cfg: &RunConfig,
    measured: &Path,
    count: usize,
    out: Option<PathBuf>,
) -> anyhow::Result<()> {
    ensure_out_dir(cfg)?;
    let colors = PrintPalette::load(measured)?;
    let reduced = build_palette(colors.colors(), count)?;
    let out_path = out.unwrap_or_else(|| cfg.output_dir.join("palette.txt"));
    reduced.save(&out_path)?;
    println!(
        "reduced {} measured colors to {}; wrote {}",
        colors.len(),
        reduced.len(),
        out_path.display()
    );
    Ok(())
}

fn cmd_export_adv(cfg: &RunConfig, patch_path: &Path, out: Option<PathBuf>) -> anyhow::Result<()> {
    ensure_out_dir(cfg)?;
    let index = advpatch::load_dataset(&cfg.dataset.images_dir, &cfg.dataset.labels_dir)?;
    let patch = Patch::load_png(patch_path)?;
    let out_dir = out.unwrap_or_else(|| cfg.output_dir.join("adv_dataset"));
    let n = advpatch::export_adv_dataset(
        &patch,
        &index,
        &cfg.transform,
        cfg.dataset.person_class_id,
        cfg.seed,
        &out_dir,
    )?;
    println!("wrote {n} adversarial samples to {}", out_dir.display());
    Ok(())
}

fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    let cfg = load_config(&cli)?;
    match &cli.command {
        Command::Train => cmd_train(&cfg),
        Command::Eval { patch, out } => cmd_eval(&cfg, patch, out.clone()),
        Command::Preview { count, patch } => cmd_preview(&cfg, *count, patch.clone()),
        Command::Palette {
            measured,
            count,
            out,
        } => cmd_palette(&cfg, measured, *count, out.clone()),
        Command::ExportAdv { patch, out } => cmd_export_adv(&cfg, patch, out.clone()),
    }
}
