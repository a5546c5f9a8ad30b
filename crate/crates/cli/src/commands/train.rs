//! `skipseg train-skip`, `weak-labels`, `train-audio`, and `finetune`.

use anyhow::{Context, Result};
use clap::Args;
use serde_json::json;
use std::path::{Path, PathBuf};

use skipseg_core::audio::{
    build_audio_arch, finetune_last_layer, make_training_set, read_spectrogram,
    train_audio_model, AudioArchConfig, AudioSampleOptions, LabelSource, MelSpectrogram,
    SmearConfig,
};
use skipseg_core::neural::{ModelParams, OptimizerKind, TrainConfig};
use skipseg_core::profiles::ProfileSet;
use skipseg_core::segeval::{boundary_sets_from_json, BoundarySet};
use skipseg_core::skip_boundary::{
    default_skip_arch, generate_weak_labels, make_windows, predict_skip_likelihood,
    train_skip_model, weak_labels_from_json, weak_labels_to_json, SkipTrainOptions,
    WindowConfig, WindowInput,
};

use crate::manifest::{ensure_dir, read_input, write_manifest};
use crate::{resolve, Ctx};

fn out_dir_of(path: &Path) -> PathBuf {
    path.parent()
        .filter(|p| !p.as_os_str().is_empty())
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."))
}

fn train_config(
    section: &serde_json::Value,
    seed: u64,
    epochs: Option<usize>,
    lr: Option<f64>,
    batch_size: Option<usize>,
    default_epochs: usize,
) -> TrainConfig {
    TrainConfig {
        optimizer: OptimizerKind::default(),
        learning_rate: resolve(lr, section, "learning_rate", 1e-3),
        batch_size: resolve(batch_size, section, "batch_size", 64),
        epochs: resolve(epochs, section, "epochs", default_epochs),
        seed,
        validation_fraction: 0.1,
        early_stop_patience: Some(10),
    }
}

#[derive(Args, Debug)]
pub struct TrainSkipArgs {
    /// profiles.json of the annotated tracks.
    #[arg(long)]
    profiles: PathBuf,
    /// Reference boundary JSON for the same tracks.
    #[arg(long)]
    boundaries: PathBuf,
    /// Output model path.
    #[arg(long)]
    out: PathBuf,
    /// Window stride in seconds.
    #[arg(long)]
    hop: Option<f64>,
    /// Feed raw normalized profiles instead of de-trended residuals.
    #[arg(long)]
    raw_input: bool,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// Negatives kept per positive.
    #[arg(long)]
    negative_ratio: Option<f64>,
}

pub fn run_train_skip(ctx: &Ctx, args: TrainSkipArgs) -> Result<()> {
    let section = ctx.section("train_skip");
    let hop = resolve(args.hop, &section, "hop", 0.5);
    let negative_ratio = resolve(args.negative_ratio, &section, "negative_ratio", 3.0);
    let raw_input =
        args.raw_input || section.get("raw_input").and_then(|v| v.as_bool()).unwrap_or(false);
    let cfg = train_config(
        &section,
        ctx.seed,
        args.epochs,
        args.learning_rate,
        args.batch_size,
        60,
    );

    let set = ProfileSet::from_json(&read_input(&args.profiles)?)
        .map_err(|e| anyhow::anyhow!("profiles file: {e}"))?;
    let boundaries = boundary_sets_from_json(&read_input(&args.boundaries)?)
        .map_err(|e| anyhow::anyhow!("boundaries file: {e}"))?;
    let window_cfg = WindowConfig {
        input: if raw_input {
            WindowInput::Normalized
        } else {
            WindowInput::default()
        },
        ..WindowConfig::default()
    };

    let mut samples = Vec::new();
    let mut skipped = 0usize;
    for p in &set.profiles {
        let Some(b) = boundaries.iter().find(|b| b.track_id == p.track_id) else {
            eprintln!("warning: no boundaries for track {}, skipped", p.track_id);
            skipped += 1;
            continue;
        };
        match make_windows(p, Some(b), hop, &window_cfg) {
            Ok(w) => samples.extend(w),
            Err(e) => {
                eprintln!("warning: {e}, track skipped");
                skipped += 1;
            }
        }
    }
    if samples.is_empty() {
        anyhow::bail!("no usable training windows");
    }
    let arch = default_skip_arch(samples[0].window.len());
    let model = train_skip_model(
        &samples,
        &cfg,
        &arch,
        &SkipTrainOptions { negative_ratio },
    )
    .map_err(|e| anyhow::anyhow!("training failed: {e}"))?;
    model
        .save(&args.out)
        .with_context(|| format!("cannot write model {}", args.out.display()))?;
    let out_dir = out_dir_of(&args.out);
    ensure_dir(&out_dir)?;
    write_manifest(
        &out_dir,
        "train-skip",
        ctx.seed,
        json!({
            "hop": hop, "raw_input": raw_input, "negative_ratio": negative_ratio,
            "epochs": cfg.epochs, "learning_rate": cfg.learning_rate,
            "batch_size": cfg.batch_size,
        }),
        &[args.profiles.as_path(), args.boundaries.as_path()],
        &[args.out.as_path()],
    )?;
    println!(
        "train-skip: {} windows ({} tracks skipped) -> {}",
        samples.len(),
        skipped,
        args.out.display()
    );
    Ok(())
}

#[derive(Args, Debug)]
pub struct WeakLabelsArgs {
    /// Trained skip model.
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    profiles: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    tau_hi: Option<f64>,
    #[arg(long)]
    tau_lo: Option<f64>,
    #[arg(long)]
    min_gap: Option<f64>,
    #[arg(long)]
    hop: Option<f64>,
    /// Use raw normalized windows (must match how the model was trained).
    #[arg(long)]
    raw_input: bool,
}

pub fn run_weak_labels(ctx: &Ctx, args: WeakLabelsArgs) -> Result<()> {
    let section = ctx.section("weak_labels");
    let tau_hi = resolve(args.tau_hi, &section, "tau_hi", 0.9);
    let tau_lo = resolve(args.tau_lo, &section, "tau_lo", 0.05);
    let min_gap = resolve(args.min_gap, &section, "min_gap", 5.0);
    let hop = resolve(args.hop, &section, "hop", 0.5);
    let raw_input =
        args.raw_input || section.get("raw_input").and_then(|v| v.as_bool()).unwrap_or(false);

    let model = ModelParams::load(&args.model)
        .map_err(|e| anyhow::anyhow!("model {}: {e}", args.model.display()))?;
    let set = ProfileSet::from_json(&read_input(&args.profiles)?)
        .map_err(|e| anyhow::anyhow!("profiles file: {e}"))?;
    let window_cfg = WindowConfig {
        input: if raw_input {
            WindowInput::Normalized
        } else {
            WindowInput::default()
        },
        ..WindowConfig::default()
    };

    let mut labels = Vec::new();
    for p in &set.profiles {
        match predict_skip_likelihood(&model, p, hop, &window_cfg) {
            Ok(curve) => labels.push(
                generate_weak_labels(&curve, tau_hi, tau_lo, min_gap)
                    .map_err(|e| anyhow::anyhow!("{e}"))?,
            ),
            Err(e) => eprintln!("warning: {}: {e}, track skipped", p.track_id),
        }
    }
    std::fs::write(&args.out, weak_labels_to_json(&labels))
        .with_context(|| format!("cannot write {}", args.out.display()))?;
    let out_dir = out_dir_of(&args.out);
    write_manifest(
        &out_dir,
        "weak-labels",
        ctx.seed,
        json!({"tau_hi": tau_hi, "tau_lo": tau_lo, "min_gap": min_gap, "hop": hop, "raw_input": raw_input}),
        &[args.model.as_path(), args.profiles.as_path()],
        &[args.out.as_path()],
    )?;
    let n_pos: usize = labels.iter().map(|l| l.positive_times_s.len()).sum();
    println!(
        "weak-labels: {} tracks, {} positives -> {}",
        labels.len(),
        n_pos,
        args.out.display()
    );
    Ok(())
}

/// Load every spectrogram cache in a directory, sorted by file name.
pub fn load_feature_dir(dir: &Path) -> Result<Vec<MelSpectrogram>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("cannot read feature directory {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "melspec"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        anyhow::bail!("no .melspec files in {}", dir.display());
    }
    paths
        .iter()
        .map(|p| read_spectrogram(p).map_err(|e| anyhow::anyhow!("{}: {e}", p.display())))
        .collect()
}

#[derive(Args, Debug, Clone)]
pub struct SmearFlags {
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    pos_radius: Option<f64>,
    #[arg(long)]
    neg_margin: Option<f64>,
}

impl SmearFlags {
    fn build(&self, section: &serde_json::Value) -> SmearConfig {
        SmearConfig {
            sigma_s: resolve(self.sigma, section, "sigma", 1.5),
            pos_radius_s: resolve(self.pos_radius, section, "pos_radius", 3.0),
            neg_margin_s: resolve(self.neg_margin, section, "neg_margin", 6.0),
        }
    }
}

#[derive(Args, Debug)]
pub struct TrainAudioArgs {
    /// Directory of .melspec caches.
    #[arg(long)]
    features: PathBuf,
    /// Label file: weak-label JSON or boundary JSON.
    #[arg(long)]
    labels: PathBuf,
    /// Interpretation of --labels: weak | boundaries.
    #[arg(long)]
    label_kind: Option<String>,
    #[arg(long)]
    out: PathBuf,
    /// Context window in seconds.
    #[arg(long)]
    context: Option<f64>,
    #[command(flatten)]
    smear: SmearFlags,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
}

enum Labels {
    Weak(Vec<skipseg_core::skip_boundary::WeakLabelSet>),
    Boundaries(Vec<BoundarySet>),
}

impl Labels {
    fn source_for(&self, track: &str) -> Option<LabelSource<'_>> {
        match self {
            Labels::Weak(v) => v
                .iter()
                .find(|w| w.track_id == track)
                .map(LabelSource::Weak),
            Labels::Boundaries(v) => v
                .iter()
                .find(|b| b.track_id == track)
                .map(LabelSource::Boundaries),
        }
    }
}

fn load_labels(path: &Path, kind: &str) -> Result<Labels> {
    let text = read_input(path)?;
    match kind {
        "weak" => Ok(Labels::Weak(
            weak_labels_from_json(&text).map_err(|e| anyhow::anyhow!("{e}"))?,
        )),
        "boundaries" => Ok(Labels::Boundaries(
            boundary_sets_from_json(&text).map_err(|e| anyhow::anyhow!("{e}"))?,
        )),
        other => anyhow::bail!("unknown label kind '{other}' (use weak|boundaries)"),
    }
}

fn collect_audio_samples(
    specs: &[MelSpectrogram],
    labels: &Labels,
    smear: &SmearConfig,
    context_frames: usize,
    seed: u64,
) -> Result<Vec<skipseg_core::audio::AudioWindowSample>> {
    let opts = AudioSampleOptions::default();
    let mut samples = Vec::new();
    for (i, spec) in specs.iter().enumerate() {
        let Some(source) = labels.source_for(&spec.track_id) else {
            eprintln!("warning: no labels for track {}, skipped", spec.track_id);
            continue;
        };
        samples.extend(
            make_training_set(spec, source, smear, context_frames, &opts, seed ^ i as u64)
                .map_err(|e| anyhow::anyhow!("{}: {e}", spec.track_id))?,
        );
    }
    if samples.is_empty() {
        anyhow::bail!("no usable audio training samples");
    }
    Ok(samples)
}

pub fn run_train_audio(ctx: &Ctx, args: TrainAudioArgs) -> Result<()> {
    let section = ctx.section("train_audio");
    let context_s = resolve(args.context, &section, "context", 8.0);
    let label_kind = resolve(args.label_kind, &section, "label_kind", "weak".to_string());
    let smear = args.smear.build(&section);
    let cfg = train_config(
        &section,
        ctx.seed,
        args.epochs,
        args.learning_rate,
        args.batch_size,
        25,
    );

    let specs = load_feature_dir(&args.features)?;
    let frame_rate = specs[0].frame_rate_hz;
    let n_mels = specs[0].n_mels;
    let context_frames = (context_s * frame_rate).round() as usize;
    let labels = load_labels(&args.labels, &label_kind)?;
    let samples = collect_audio_samples(&specs, &labels, &smear, context_frames, ctx.seed)?;

    let arch_cfg = AudioArchConfig {
        conv1_out: 8,
        conv1_kernel: (5, 5),
        pool1: (2, 2),
        conv2_out: 16,
        conv2_kernel: (3, 3),
        pool2: (2, 2),
        dense_units: 64,
    };
    let arch = build_audio_arch(&arch_cfg, context_frames, n_mels)
        .map_err(|e| anyhow::anyhow!("architecture: {e}"))?;
    let model = train_audio_model(&samples, &cfg, &arch)
        .map_err(|e| anyhow::anyhow!("training failed: {e}"))?;
    model
        .save(&args.out)
        .with_context(|| format!("cannot write model {}", args.out.display()))?;
    let out_dir = out_dir_of(&args.out);
    ensure_dir(&out_dir)?;
    write_manifest(
        &out_dir,
        "train-audio",
        ctx.seed,
        json!({
            "context": context_s, "label_kind": label_kind,
            "sigma": smear.sigma_s, "pos_radius": smear.pos_radius_s,
            "neg_margin": smear.neg_margin_s, "epochs": cfg.epochs,
            "learning_rate": cfg.learning_rate, "batch_size": cfg.batch_size,
        }),
        &[args.features.as_path(), args.labels.as_path()],
        &[args.out.as_path()],
    )?;
    println!(
        "train-audio: {} samples from {} tracks -> {}",
        samples.len(),
        specs.len(),
        args.out.display()
    );
    Ok(())
}

#[derive(Args, Debug)]
pub struct FinetuneArgs {
    /// Model to start from.
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    features: PathBuf,
    /// Curated boundary JSON.
    #[arg(long)]
    boundaries: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    smear: SmearFlags,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
}

pub fn run_finetune(ctx: &Ctx, args: FinetuneArgs) -> Result<()> {
    let section = ctx.section("finetune");
    let smear = SmearConfig {
        sigma_s: resolve(args.smear.sigma, &section, "sigma", 0.5),
        pos_radius_s: resolve(args.smear.pos_radius, &section, "pos_radius", 1.5),
        neg_margin_s: resolve(args.smear.neg_margin, &section, "neg_margin", 4.0),
    };
    let cfg = train_config(
        &section,
        ctx.seed,
        args.epochs,
        args.learning_rate,
        args.batch_size,
        30,
    );
    let model = ModelParams::load(&args.model)
        .map_err(|e| anyhow::anyhow!("model {}: {e}", args.model.display()))?;
    let context_frames = model
        .input_shape
        .get(1)
        .copied()
        .context("model input shape has no context dimension")?;
    let specs = load_feature_dir(&args.features)?;
    let labels = load_labels(&args.boundaries, "boundaries")?;
    let samples = collect_audio_samples(&specs, &labels, &smear, context_frames, ctx.seed)?;
    let tuned = finetune_last_layer(&model, &samples, &cfg)
        .map_err(|e| anyhow::anyhow!("fine-tuning failed: {e}"))?;
    tuned
        .save(&args.out)
        .with_context(|| format!("cannot write model {}", args.out.display()))?;
    let out_dir = out_dir_of(&args.out);
    ensure_dir(&out_dir)?;
    write_manifest(
        &out_dir,
        "finetune",
        ctx.seed,
        json!({
            "sigma": smear.sigma_s, "pos_radius": smear.pos_radius_s,
            "neg_margin": smear.neg_margin_s, "epochs": cfg.epochs,
            "learning_rate": cfg.learning_rate, "batch_size": cfg.batch_size,
        }),
        &[args.model.as_path(), args.features.as_path(), args.boundaries.as_path()],
        &[args.out.as_path()],
    )?;
    println!(
        "finetune: {} samples -> {}",
        samples.len(),
        args.out.display()
    );
    Ok(())
}
