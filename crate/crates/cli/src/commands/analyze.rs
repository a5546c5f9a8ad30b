//! `skipseg specificity` and `skipseg detrend`.

use anyhow::Result;
use clap::Args;
use serde_json::json;
use std::io::Write;
use std::path::PathBuf;

use skipseg_core::detrend::{detrend, DetrendParams};
use skipseg_core::profiles::{fragment, FragmentParams, ProfileSet};
use skipseg_core::retrieval::{random_baseline_map, specificity_map};

use crate::manifest::{ensure_dir, read_input, write_manifest};
use crate::{resolve, Ctx};

#[derive(Args, Debug)]
pub struct SpecificityArgs {
    /// profiles.json with at least two partitions for some tracks.
    #[arg(long)]
    profiles: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Median-filter window (bins) applied to fragments.
    #[arg(long)]
    median_window: Option<usize>,
    /// Monte-Carlo trials for the shuffled baseline.
    #[arg(long)]
    baseline_trials: Option<usize>,
    /// Histogram bins for the distance distributions.
    #[arg(long)]
    histogram_bins: Option<usize>,
}

fn histogram(values: &[f64], bins: usize, hi: f64) -> (Vec<f64>, Vec<usize>) {
    let mut counts = vec![0usize; bins];
    for &v in values {
        let slot = ((v / hi * bins as f64) as usize).min(bins - 1);
        counts[slot] += 1;
    }
    let edges = (0..=bins).map(|i| hi * i as f64 / bins as f64).collect();
    (edges, counts)
}

pub fn run_specificity(ctx: &Ctx, args: SpecificityArgs) -> Result<()> {
    let section = ctx.section("specificity");
    let median_window = resolve(args.median_window, &section, "median_window", 5usize);
    let trials = resolve(args.baseline_trials, &section, "baseline_trials", 200usize);
    let hist_bins = resolve(args.histogram_bins, &section, "histogram_bins", 50usize);

    let set = ProfileSet::from_json(&read_input(&args.profiles)?)
        .map_err(|e| anyhow::anyhow!("profiles file: {e}"))?;
    let params = FragmentParams { median_window_bins: median_window };
    let mut fragments = Vec::new();
    let mut fragment_warnings = Vec::new();
    for p in &set.profiles {
        match fragment(p, &params) {
            Ok(f) => fragments.push(f),
            Err(e) => fragment_warnings.push(format!("{}: {e}", p.track_id)),
        }
    }
    let report = specificity_map(&fragments).map_err(|e| anyhow::anyhow!("{e}"))?;

    // Baseline over the same corpus shape.
    let mut shape_counts: std::collections::BTreeMap<&str, usize> = Default::default();
    for f in &fragments {
        *shape_counts.entry(f.track_id.as_str()).or_default() += 1;
    }
    let shape: Vec<usize> = shape_counts.values().copied().collect();
    let baseline = random_baseline_map(&shape, trials, ctx.seed)
        .map_err(|e| anyhow::anyhow!("{e}"))?;

    ensure_dir(&args.out)?;
    let max_d = report
        .same_pair_distances
        .iter()
        .chain(&report.diff_pair_distances)
        .cloned()
        .fold(f64::EPSILON, f64::max);
    let (edges, same_counts) = histogram(&report.same_pair_distances, hist_bins, max_d);
    let (_, diff_counts) = histogram(&report.diff_pair_distances, hist_bins, max_d);

    let report_path = args.out.join("specificity.json");
    std::fs::write(
        &report_path,
        serde_json::to_string_pretty(&json!({
            "map": report.map,
            "baseline_map": baseline,
            "baseline_trials": trials,
            "n_queries": report.n_queries,
            "skipped_tracks": report.skipped_tracks,
            "fragment_warnings": fragment_warnings,
            "distance_histogram": {
                "edges": edges,
                "same_track_counts": same_counts,
                "different_track_counts": diff_counts,
            },
        }))?,
    )?;

    let ap_path = args.out.join("per_query_ap.csv");
    let mut w = std::io::BufWriter::new(std::fs::File::create(&ap_path)?);
    writeln!(w, "track,partition,ap,n_relevant")?;
    for q in &report.per_query {
        writeln!(w, "{},{},{},{}", q.track, q.partition, q.ap, q.n_relevant)?;
    }
    w.flush()?;

    write_manifest(
        &args.out,
        "specificity",
        ctx.seed,
        json!({"median_window": median_window, "baseline_trials": trials, "histogram_bins": hist_bins}),
        &[args.profiles.as_path()],
        &[report_path.as_path(), ap_path.as_path()],
    )?;
    println!(
        "specificity: MAP {:.4} vs baseline {:.4} over {} queries -> {}",
        report.map,
        baseline,
        report.n_queries,
        args.out.display()
    );
    Ok(())
}

#[derive(Args, Debug)]
pub struct DetrendArgs {
    #[arg(long)]
    profiles: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Median pre-filter width in bins (odd).
    #[arg(long)]
    median_window: Option<usize>,
    /// Zero-phase low-pass cutoff in cycles/bin.
    #[arg(long)]
    cutoff: Option<f64>,
}

pub fn run_detrend(ctx: &Ctx, args: DetrendArgs) -> Result<()> {
    let section = ctx.section("detrend");
    let median_window = resolve(args.median_window, &section, "median_window", 9usize);
    let cutoff = resolve(args.cutoff, &section, "cutoff", 0.1);
    let params = DetrendParams {
        median_window_bins: median_window,
        lowpass_cutoff: cutoff,
    };
    let set = ProfileSet::from_json(&read_input(&args.profiles)?)
        .map_err(|e| anyhow::anyhow!("profiles file: {e}"))?;
    ensure_dir(&args.out)?;
    let csv_path = args.out.join("detrend.csv");
    let mut w = std::io::BufWriter::new(std::fs::File::create(&csv_path)?);
    writeln!(w, "track,partition,time_s,trend,residual")?;
    for p in &set.profiles {
        let d = detrend(p, &params).map_err(|e| anyhow::anyhow!("{}: {e}", p.track_id))?;
        for i in 0..d.trend.len() {
            writeln!(
                w,
                "{},{},{},{},{}",
                p.track_id,
                p.partition.label(),
                d.bin_time(i),
                d.trend[i],
                d.residual[i]
            )?;
        }
    }
    w.flush()?;
    write_manifest(
        &args.out,
        "detrend",
        ctx.seed,
        json!({"median_window": median_window, "cutoff": cutoff}),
        &[args.profiles.as_path()],
        &[csv_path.as_path()],
    )?;
    println!("detrend: {} profiles -> {}", set.profiles.len(), csv_path.display());
    Ok(())
}
