//! `skipseg evaluate`: windowed hit-rate scoring of boundary estimates.

use anyhow::{Context, Result};
use clap::Args;
use serde_json::json;
use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;

use skipseg_core::segeval::{boundary_sets_from_json, evaluate_corpus, BoundarySet};

use crate::manifest::{ensure_dir, read_input, write_manifest};
use crate::{resolve, Ctx};

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    /// Estimated boundaries (JSON array).
    #[arg(long)]
    est: PathBuf,
    /// Reference boundaries; repeat for several kinds.
    #[arg(long = "ref", required = true)]
    references: Vec<PathBuf>,
    /// Hit window in seconds; repeat for several windows.
    #[arg(long = "window")]
    windows: Vec<f64>,
    /// F-score weighting; reports always state the value used.
    #[arg(long)]
    beta: Option<f64>,
    /// Label for the algorithm column of the report.
    #[arg(long)]
    algorithm: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

pub fn run_evaluate(ctx: &Ctx, args: EvaluateArgs) -> Result<()> {
    let section = ctx.section("evaluate");
    let beta = resolve(args.beta, &section, "beta", 1.0);
    let algorithm = resolve(args.algorithm, &section, "algorithm", "estimate".to_string());
    let windows = if args.windows.is_empty() {
        vec![0.5, 3.0]
    } else {
        args.windows.clone()
    };

    let est_sets = boundary_sets_from_json(&read_input(&args.est)?)
        .map_err(|e| anyhow::anyhow!("estimate file: {e}"))?;
    let predictions: BTreeMap<String, BoundarySet> = est_sets
        .into_iter()
        .map(|b| (b.track_id.clone(), b))
        .collect();
    let mut references = Vec::new();
    for path in &args.references {
        references.extend(
            boundary_sets_from_json(&read_input(path)?)
                .map_err(|e| anyhow::anyhow!("reference file {}: {e}", path.display()))?,
        );
    }

    let report = evaluate_corpus(&predictions, &references, &windows, beta)
        .map_err(|e| anyhow::anyhow!("evaluation failed: {e}"))?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }

    ensure_dir(&args.out)?;
    let table_csv = report.table_csv(&algorithm);
    print!("{table_csv}");
    let csv_path = args.out.join("report.csv");
    std::fs::write(&csv_path, &table_csv)?;

    let json_path = args.out.join("report.json");
    std::fs::write(
        &json_path,
        serde_json::to_string_pretty(&json!({
            "algorithm": algorithm,
            "beta": report.beta,
            "windows_s": report.windows_s,
            "summaries": report.summaries,
            "warnings": report.warnings,
        }))?,
    )?;

    let per_track_path = args.out.join("per_track.csv");
    let mut w = std::io::BufWriter::new(
        std::fs::File::create(&per_track_path)
            .with_context(|| format!("cannot create {}", per_track_path.display()))?,
    );
    writeln!(w, "track,kind,window_s,precision,recall,f_weighted")?;
    for t in &report.per_track {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            t.track,
            t.kind.label(),
            t.window_s,
            t.precision,
            t.recall,
            t.f_weighted
        )?;
    }
    w.flush()?;

    let input_paths: Vec<&std::path::Path> = std::iter::once(args.est.as_path())
        .chain(args.references.iter().map(|p| p.as_path()))
        .collect();
    write_manifest(
        &args.out,
        "evaluate",
        ctx.seed,
        json!({"beta": beta, "windows": windows, "algorithm": algorithm}),
        &input_paths,
        &[csv_path.as_path(), json_path.as_path(), per_track_path.as_path()],
    )?;
    Ok(())
}
