//! skipseg: pipeline driver. Every stage is a subcommand with file-based
//! handoff; each run writes a manifest with its fully resolved parameters
//! next to its outputs so any artifact can be reproduced bit-for-bit.

mod commands;
mod manifest;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use serde_json::Value;
use std::path::PathBuf;

#[derive(Parser, Debug)]
#[command(name = "skipseg", version, about = "Skip-profile analytics and boundary detection")]
struct Cli {
    /// Seed for every random choice in the invoked stage.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for data-parallel stages (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// JSON config file; keys mirror flag names (underscored), grouped per
    /// subcommand. Explicit flags win over the config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a ground-truthed synthetic corpus (events + boundaries).
    Synth(commands::synth::SynthArgs),
    /// Aggregate a JSONL event stream into Skip Profiles.
    Ingest(commands::ingest::IngestArgs),
    /// Survival and aggregate skip curves as plot-ready CSV.
    ProfileStats(commands::ingest::ProfileStatsArgs),
    /// Rank profile fragments and report MAP against a random baseline.
    Specificity(commands::analyze::SpecificityArgs),
    /// Split profiles into trend and rectified residual columns.
    Detrend(commands::analyze::DetrendArgs),
    /// Train the skip-window boundary classifier.
    TrainSkip(commands::train::TrainSkipArgs),
    /// Emit confident positive/negative times from model predictions.
    WeakLabels(commands::train::WeakLabelsArgs),
    /// Build spectrogram caches from WAV files or synthetic songs.
    Features(commands::features::FeaturesArgs),
    /// Train the spectrogram CNN on boundary or weak labels.
    TrainAudio(commands::train::TrainAudioArgs),
    /// Re-train only the last layer of an audio model on curated labels.
    Finetune(commands::train::FinetuneArgs),
    /// Predict likelihood curves and peak-pick boundary estimates.
    Segment(commands::features::SegmentArgs),
    /// Score estimated boundaries against references.
    Evaluate(commands::evaluate::EvaluateArgs),
}

/// Values shared by every stage after merging CLI > config > defaults.
pub struct Ctx {
    pub seed: u64,
    pub config: Value,
}

impl Ctx {
    /// Config section for one subcommand, or an empty object.
    pub fn section(&self, name: &str) -> Value {
        self.config
            .get(name)
            .cloned()
            .unwrap_or(Value::Object(Default::default()))
    }
}

/// Pick the first present value: explicit flag, config entry, default.
pub fn resolve<T: Clone + serde::de::DeserializeOwned>(
    flag: Option<T>,
    section: &Value,
    key: &str,
    default: T,
) -> T {
    if let Some(v) = flag {
        return v;
    }
    section
        .get(key)
        .and_then(|v| serde_json::from_value(v.clone()).ok())
        .unwrap_or(default)
}

fn main() {
    let cli = Cli::parse();
    if let Err(err) = run(cli) {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    let config: Value = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("cannot read config file {}", path.display()))?;
            serde_json::from_str(&text)
                .with_context(|| format!("config file {} is not valid JSON", path.display()))?
        }
        None => Value::Object(Default::default()),
    };
    let seed = cli
        .seed
        .or_else(|| config.get("seed").and_then(|v| v.as_u64()))
        .unwrap_or(0);
    if let Some(threads) = cli
        .threads
        .or_else(|| config.get("threads").and_then(|v| v.as_u64()).map(|v| v as usize))
    {
        skipseg_core::exec::configure_threads(threads)
            .map_err(|e| anyhow::anyhow!("thread pool: {e}"))?;
    }
    let ctx = Ctx { seed, config };
    match cli.command {
        Command::Synth(args) => commands::synth::run(&ctx, args),
        Command::Ingest(args) => commands::ingest::run_ingest(&ctx, args),
        Command::ProfileStats(args) => commands::ingest::run_profile_stats(&ctx, args),
        Command::Specificity(args) => commands::analyze::run_specificity(&ctx, args),
        Command::Detrend(args) => commands::analyze::run_detrend(&ctx, args),
        Command::TrainSkip(args) => commands::train::run_train_skip(&ctx, args),
        Command::WeakLabels(args) => commands::train::run_weak_labels(&ctx, args),
        Command::Features(args) => commands::features::run_features(&ctx, args),
        Command::TrainAudio(args) => commands::train::run_train_audio(&ctx, args),
        Command::Finetune(args) => commands::train::run_finetune(&ctx, args),
        Command::Segment(args) => commands::features::run_segment(&ctx, args),
        Command::Evaluate(args) => commands::evaluate::run_evaluate(&ctx, args),
    }
}
