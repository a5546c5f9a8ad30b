//! `skipseg features` and `skipseg segment`.

use anyhow::{Context, Result};
use clap::Args;
use serde_json::json;
use std::path::PathBuf;

use skipseg_core::audio::{
    mel_spectrogram, predict_audio_likelihood, read_wav_mono16, write_spectrogram, MelConfig,
};
use skipseg_core::neural::ModelParams;
use skipseg_core::segeval::{boundary_sets_to_json, peak_pick};
use skipseg_core::synth::{gen_feature_proxy, SyntheticSong};

use super::train::load_feature_dir;
use crate::manifest::{ensure_dir, read_input, write_manifest};
use crate::{resolve, Ctx};

#[derive(Args, Debug)]
pub struct FeaturesArgs {
    /// songs.json from `synth`: make feature-proxy spectrograms.
    #[arg(long, conflicts_with = "wav")]
    songs: Option<PathBuf>,
    /// Directory of PCM16 WAV files: extract real Mel-spectrograms.
    #[arg(long)]
    wav: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Proxy frames per second.
    #[arg(long)]
    frame_rate: Option<f64>,
    /// Mel bands (proxy: must match the songs' feature bands).
    #[arg(long)]
    mels: Option<usize>,
    /// Proxy noise level.
    #[arg(long)]
    noise: Option<f64>,
    /// STFT size for WAV extraction.
    #[arg(long)]
    n_fft: Option<usize>,
    /// STFT hop in samples for WAV extraction.
    #[arg(long)]
    hop_samples: Option<usize>,
}

pub fn run_features(ctx: &Ctx, args: FeaturesArgs) -> Result<()> {
    let section = ctx.section("features");
    ensure_dir(&args.out)?;
    let mut outputs = Vec::new();
    let params;

    if let Some(songs_path) = &args.songs {
        let frame_rate = resolve(args.frame_rate, &section, "frame_rate", 4.0);
        let mels = resolve(args.mels, &section, "mels", 16usize);
        let noise = resolve(args.noise, &section, "noise", 0.5);
        let songs: Vec<SyntheticSong> = serde_json::from_str(&read_input(songs_path)?)
            .context("songs file is not valid")?;
        for (i, song) in songs.iter().enumerate() {
            let spec = gen_feature_proxy(song, frame_rate, mels, noise, ctx.seed ^ i as u64)
                .map_err(|e| anyhow::anyhow!("{}: {e}", song.track_id))?;
            let path = args.out.join(format!("{}.melspec", song.track_id));
            write_spectrogram(&path, &spec).map_err(|e| anyhow::anyhow!("{e}"))?;
            outputs.push(path);
        }
        params = json!({
            "source": "proxy", "frame_rate": frame_rate, "mels": mels, "noise": noise,
        });
        println!(
            "features: {} proxy spectrograms -> {}",
            songs.len(),
            args.out.display()
        );
    } else if let Some(wav_dir) = &args.wav {
        let cfg = MelConfig {
            n_fft: resolve(args.n_fft, &section, "n_fft", 1024),
            hop: resolve(args.hop_samples, &section, "hop_samples", 512),
            n_mels: resolve(args.mels, &section, "mels", 64usize),
            ..MelConfig::default()
        };
        let mut paths: Vec<PathBuf> = std::fs::read_dir(wav_dir)
            .with_context(|| format!("cannot read WAV directory {}", wav_dir.display()))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("wav")))
            .collect();
        paths.sort();
        if paths.is_empty() {
            anyhow::bail!("no .wav files in {}", wav_dir.display());
        }
        for path in &paths {
            let track = path.file_stem().unwrap().to_string_lossy().to_string();
            let wav = read_wav_mono16(path).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
            let spec = mel_spectrogram(&track, &wav.samples, wav.sample_rate, &cfg)
                .map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
            let out_path = args.out.join(format!("{track}.melspec"));
            write_spectrogram(&out_path, &spec).map_err(|e| anyhow::anyhow!("{e}"))?;
            outputs.push(out_path);
        }
        params = json!({
            "source": "wav", "n_fft": cfg.n_fft, "hop_samples": cfg.hop, "mels": cfg.n_mels,
        });
        println!(
            "features: {} spectrograms -> {}",
            paths.len(),
            args.out.display()
        );
    } else {
        anyhow::bail!("pass either --songs (proxy features) or --wav (recordings)");
    }

    let inputs: Vec<&std::path::Path> = args
        .songs
        .iter()
        .chain(args.wav.iter())
        .map(|p| p.as_path())
        .collect();
    write_manifest(
        &args.out,
        "features",
        ctx.seed,
        params,
        &inputs,
        &outputs.iter().map(|p| p.as_path()).collect::<Vec<_>>(),
    )?;
    Ok(())
}

#[derive(Args, Debug)]
pub struct SegmentArgs {
    /// Trained audio model.
    #[arg(long)]
    model: PathBuf,
    /// Directory of .melspec caches.
    #[arg(long)]
    features: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Frames between evaluated windows.
    #[arg(long)]
    hop_frames: Option<usize>,
    /// Minimum spacing between picked peaks, seconds.
    #[arg(long)]
    min_spacing: Option<f64>,
    /// Also threshold the curves into weak labels instead of boundaries.
    #[arg(long)]
    curves_out: Option<PathBuf>,
}

pub fn run_segment(ctx: &Ctx, args: SegmentArgs) -> Result<()> {
    let section = ctx.section("segment");
    let hop_frames = resolve(args.hop_frames, &section, "hop_frames", 1usize);
    let min_spacing = resolve(args.min_spacing, &section, "min_spacing", 4.0);
    let model = ModelParams::load(&args.model)
        .map_err(|e| anyhow::anyhow!("model {}: {e}", args.model.display()))?;
    let specs = load_feature_dir(&args.features)?;

    let mut estimates = Vec::new();
    let mut curves = Vec::new();
    for spec in &specs {
        match predict_audio_likelihood(&model, spec, hop_frames) {
            Ok(curve) => {
                estimates.push(peak_pick(&curve, min_spacing));
                curves.push(curve);
            }
            Err(e) => eprintln!("warning: {}: {e}, track skipped", spec.track_id),
        }
    }
    std::fs::write(&args.out, boundary_sets_to_json(&estimates))
        .with_context(|| format!("cannot write {}", args.out.display()))?;
    let mut outputs = vec![args.out.clone()];
    if let Some(curves_path) = &args.curves_out {
        std::fs::write(curves_path, serde_json::to_string_pretty(&curves)?)?;
        outputs.push(curves_path.clone());
    }
    let out_dir = args
        .out
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .map(std::path::Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));
    write_manifest(
        &out_dir,
        "segment",
        ctx.seed,
        json!({"hop_frames": hop_frames, "min_spacing": min_spacing}),
        &[args.model.as_path(), args.features.as_path()],
        &outputs.iter().map(|p| p.as_path()).collect::<Vec<_>>(),
    )?;
    let n_bounds: usize = estimates.iter().map(|b| b.len()).sum();
    println!(
        "segment: {} tracks, {} boundaries -> {}",
        estimates.len(),
        n_bounds,
        args.out.display()
    );
    Ok(())
}
