//! `skipseg synth`: seeded synthetic corpus generation.

use anyhow::{Context, Result};
use clap::Args;
use serde_json::json;
use std::io::Write;
use std::path::PathBuf;

use skipseg_core::events::event_to_json;
use skipseg_core::segeval::boundary_sets_to_json;
use skipseg_core::synth::{gen_skip_events, gen_song, ListenerModel, SongConfig};

use crate::manifest::{ensure_dir, write_manifest};
use crate::{resolve, Ctx};

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// Number of tracks to generate.
    #[arg(long)]
    tracks: Option<usize>,
    /// Consecutive observation dates per track.
    #[arg(long)]
    dates: Option<usize>,
    /// Streams per (track, date).
    #[arg(long)]
    streams: Option<usize>,
    /// Comma-separated region codes; streams split evenly across them.
    #[arg(long)]
    regions: Option<String>,
    /// Shortest allowed section, seconds.
    #[arg(long)]
    section_min: Option<f64>,
    /// Longest allowed section, seconds.
    #[arg(long)]
    section_max: Option<f64>,
    #[arg(long)]
    duration_min: Option<f64>,
    #[arg(long)]
    duration_max: Option<f64>,
    /// Also generate mid-section extended boundaries.
    #[arg(long)]
    extended: bool,
    #[arg(long)]
    out: PathBuf,
}

pub fn run(ctx: &Ctx, args: SynthArgs) -> Result<()> {
    let section = ctx.section("synth");
    let tracks = resolve(args.tracks, &section, "tracks", 10usize);
    let dates = resolve(args.dates, &section, "dates", 1usize);
    let streams = resolve(args.streams, &section, "streams", 10_000usize);
    let regions_raw = resolve(args.regions, &section, "regions", "US".to_string());
    let section_min = resolve(args.section_min, &section, "section_min", 8.0);
    let section_max = resolve(args.section_max, &section, "section_max", 30.0);
    let duration_min = resolve(args.duration_min, &section, "duration_min", 150.0);
    let duration_max = resolve(args.duration_max, &section, "duration_max", 210.0);
    let extended = args.extended || section.get("extended").and_then(|v| v.as_bool()).unwrap_or(false);
    let regions: Vec<String> = regions_raw.split(',').map(|s| s.trim().to_string()).collect();

    let cfg = SongConfig {
        duration_range_s: (duration_min, duration_max),
        section_range_s: (section_min, section_max),
        extended,
        ..SongConfig::default()
    };
    let listener = ListenerModel::default();
    ensure_dir(&args.out)?;

    let mut songs = Vec::with_capacity(tracks);
    for i in 0..tracks {
        songs.push(
            gen_song(&format!("track{i:04}"), &cfg, ctx.seed ^ (1000 + i as u64))
                .map_err(|e| anyhow::anyhow!("song generation: {e}"))?,
        );
    }

    let events_path = args.out.join("events.jsonl");
    let mut events_file = std::io::BufWriter::new(
        std::fs::File::create(&events_path)
            .with_context(|| format!("cannot create {}", events_path.display()))?,
    );
    let start_date = chrono::NaiveDate::from_ymd_opt(2026, 3, 1).unwrap();
    let per_region = (streams / regions.len()).max(1);
    for (i, song) in songs.iter().enumerate() {
        for d in 0..dates {
            let date = start_date + chrono::Days::new(d as u64);
            for (ri, region) in regions.iter().enumerate() {
                let seed = ctx.seed ^ ((i as u64) << 20 | (d as u64) << 8 | ri as u64);
                for ev in gen_skip_events(song, &listener, per_region, date, region, seed) {
                    events_file.write_all(event_to_json(&ev).as_bytes())?;
                    events_file.write_all(b"\n")?;
                }
            }
        }
    }
    events_file.flush()?;

    let structural: Vec<_> = songs.iter().map(|s| s.structural_boundaries()).collect();
    let structural_path = args.out.join("boundaries_structural.json");
    std::fs::write(&structural_path, boundary_sets_to_json(&structural))?;
    let mut outputs = vec![events_path.clone(), structural_path.clone()];
    if extended {
        let ext: Vec<_> = songs.iter().map(|s| s.extended_boundaries()).collect();
        let ext_path = args.out.join("boundaries_extended.json");
        std::fs::write(&ext_path, boundary_sets_to_json(&ext))?;
        outputs.push(ext_path);
    }
    let songs_path = args.out.join("songs.json");
    std::fs::write(&songs_path, serde_json::to_string_pretty(&songs)?)?;
    outputs.push(songs_path);

    write_manifest(
        &args.out,
        "synth",
        ctx.seed,
        json!({
            "tracks": tracks, "dates": dates, "streams": streams,
            "regions": regions, "section_min": section_min,
            "section_max": section_max, "duration_min": duration_min,
            "duration_max": duration_max, "extended": extended,
        }),
        &[],
        &outputs.iter().map(|p| p.as_path()).collect::<Vec<_>>(),
    )?;
    println!(
        "synth: {tracks} tracks x {dates} dates x {streams} streams -> {}",
        args.out.display()
    );
    Ok(())
}
