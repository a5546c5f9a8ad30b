//! `skipseg ingest` and `skipseg profile-stats`.

use anyhow::{Context, Result};
use clap::Args;
use serde_json::json;
use std::io::Write;
use std::path::PathBuf;

use skipseg_core::events::EventReader;
use skipseg_core::profiles::{
    aggregate_curve, ingest_events, survival_curve, PartitionScheme, ProfileSet, TimeAxis,
};

use crate::manifest::{ensure_dir, read_input, write_manifest};
use crate::{resolve, Ctx};

#[derive(Args, Debug)]
pub struct IngestArgs {
    /// JSONL event stream.
    #[arg(long)]
    events: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Histogram bin width in seconds.
    #[arg(long)]
    bin_width: Option<f64>,
    /// Partitioning: all | date | region.
    #[arg(long)]
    partition: Option<String>,
}

fn parse_scheme(name: &str) -> Result<PartitionScheme> {
    match name {
        "all" => Ok(PartitionScheme::All),
        "date" => Ok(PartitionScheme::ByDate),
        "region" => Ok(PartitionScheme::ByRegion),
        other => anyhow::bail!("unknown partition scheme '{other}' (use all|date|region)"),
    }
}

pub fn run_ingest(ctx: &Ctx, args: IngestArgs) -> Result<()> {
    let section = ctx.section("ingest");
    let bin_width = resolve(args.bin_width, &section, "bin_width", 0.5);
    let scheme_name = resolve(args.partition, &section, "partition", "all".to_string());
    let scheme = parse_scheme(&scheme_name)?;

    let file = std::fs::File::open(&args.events)
        .with_context(|| format!("cannot open events file {}", args.events.display()))?;
    let reader = EventReader::new(std::io::BufReader::new(file));
    let set = ingest_events(reader, bin_width, scheme)
        .map_err(|e| anyhow::anyhow!("ingestion failed: {e}"))?;

    ensure_dir(&args.out)?;
    let profiles_path = args.out.join("profiles.json");
    std::fs::write(&profiles_path, set.to_json_pretty())?;
    write_manifest(
        &args.out,
        "ingest",
        ctx.seed,
        json!({"bin_width": bin_width, "partition": scheme_name}),
        &[args.events.as_path()],
        &[profiles_path.as_path()],
    )?;
    println!(
        "ingest: {} profiles ({} scheme) -> {}",
        set.profiles.len(),
        scheme_name,
        profiles_path.display()
    );
    Ok(())
}

#[derive(Args, Debug)]
pub struct ProfileStatsArgs {
    /// profiles.json from `ingest`.
    #[arg(long)]
    profiles: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Aggregate-curve axis: absolute | normalized.
    #[arg(long)]
    axis: Option<String>,
    /// Bins for the normalized axis.
    #[arg(long)]
    normalized_bins: Option<usize>,
    /// Keep end-of-track skips in the aggregate curve.
    #[arg(long)]
    include_endings: bool,
}

pub fn run_profile_stats(ctx: &Ctx, args: ProfileStatsArgs) -> Result<()> {
    let section = ctx.section("profile_stats");
    let axis_name = resolve(args.axis, &section, "axis", "absolute".to_string());
    let n_bins = resolve(args.normalized_bins, &section, "normalized_bins", 100usize);
    let include_endings = args.include_endings
        || section
            .get("include_endings")
            .and_then(|v| v.as_bool())
            .unwrap_or(false);
    let axis = match axis_name.as_str() {
        "absolute" => TimeAxis::Absolute,
        "normalized" => TimeAxis::Normalized { n_bins },
        other => anyhow::bail!("unknown axis '{other}' (use absolute|normalized)"),
    };

    let set = ProfileSet::from_json(&read_input(&args.profiles)?)
        .map_err(|e| anyhow::anyhow!("profiles file: {e}"))?;
    ensure_dir(&args.out)?;

    let survival_path = args.out.join("survival.csv");
    let mut w = std::io::BufWriter::new(std::fs::File::create(&survival_path)?);
    writeln!(w, "track,partition,time_s,survival")?;
    for p in &set.profiles {
        let s = survival_curve(p).map_err(|e| anyhow::anyhow!("{e}"))?;
        for (i, v) in s.iter().enumerate() {
            writeln!(w, "{},{},{},{v}", p.track_id, p.partition.label(), p.bin_time(i))?;
        }
    }
    w.flush()?;

    let curve = aggregate_curve(&set.profiles, axis, include_endings)
        .map_err(|e| anyhow::anyhow!("{e}"))?;
    let aggregate_path = args.out.join("aggregate.csv");
    let mut w = std::io::BufWriter::new(std::fs::File::create(&aggregate_path)?);
    writeln!(w, "position,skip_fraction")?;
    for (pos, frac) in curve.positions.iter().zip(&curve.skip_fraction) {
        writeln!(w, "{pos},{frac}")?;
    }
    w.flush()?;

    write_manifest(
        &args.out,
        "profile-stats",
        ctx.seed,
        json!({"axis": axis_name, "normalized_bins": n_bins, "include_endings": include_endings}),
        &[args.profiles.as_path()],
        &[survival_path.as_path(), aggregate_path.as_path()],
    )?;
    println!(
        "profile-stats: {} profiles -> {}",
        set.profiles.len(),
        args.out.display()
    );
    Ok(())
}
