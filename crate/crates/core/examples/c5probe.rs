// scratch calibration for the weak-supervision pipeline
use std::collections::BTreeMap;
use std::time::Instant;
use chrono::NaiveDate;
use skipseg_core::audio::*;
use skipseg_core::neural::{ModelParams, TrainConfig};
use skipseg_core::profiles::{PartitionScheme, ProfileBuilder, SkipProfile};
use skipseg_core::segeval::*;
use skipseg_core::skip_boundary::*;
use skipseg_core::synth::*;

fn day0() -> NaiveDate { NaiveDate::from_ymd_opt(2026, 3, 1).unwrap() }

fn profiles(songs: &[SyntheticSong], lm: &ListenerModel, streams: usize, seed: u64) -> Vec<SkipProfile> {
    let mut b = ProfileBuilder::new(0.5, PartitionScheme::All);
    for (i, s) in songs.iter().enumerate() {
        for ev in gen_skip_events(s, lm, streams, day0(), "US", seed ^ (i as u64 + 1)) {
            b.add(&ev).unwrap();
        }
    }
    let set = b.finish();
    songs.iter().map(|s| set.profiles.iter().find(|p| p.track_id == s.track_id).unwrap().clone()).collect()
}

fn main() {
    let arg = |name: &str, dflt: f64| -> f64 {
        std::env::var(name).ok().and_then(|v| v.parse().ok()).unwrap_or(dflt)
    };
    let weak_streams = arg("WEAK_STREAMS", 3000.0) as usize;
    let noise = arg("NOISE", 0.5);
    let cnn_epochs = arg("CNN_EPOCHS", 25.0) as usize;
    let tune_epochs = arg("TUNE_EPOCHS", 30.0) as usize;
    let n_weak = arg("N_WEAK", 60.0) as usize;

    let spread: f64 = std::env::var("SPREAD").ok().and_then(|v| v.parse().ok()).unwrap_or(0.75);
    let lm = ListenerModel { delay_track_spread_s: spread, ..ListenerModel::default() };
    let cfg = SongConfig { section_range_s: (16.0, 30.0), extended: false, ..SongConfig::default() };

    // skip model (same as criterion 4)
    let t0 = Instant::now();
    let train_songs: Vec<_> = (0..48).map(|i| gen_song(&format!("ann{i:02}"), &cfg, 500 + i as u64).unwrap()).collect();
    let train_profiles = profiles(&train_songs, &lm, 100_000, 123);
    let wc = WindowConfig::default();
    let mut samples = Vec::new();
    for (s, p) in train_songs.iter().zip(&train_profiles) {
        samples.extend(make_windows(p, Some(&s.structural_boundaries()), 0.5, &wc).unwrap());
    }
    let arch = default_skip_arch(samples[0].window.len());
    let skip_model = train_skip_model(
        &samples,
        &TrainConfig { epochs: 60, seed: 9, ..TrainConfig::default() },
        &arch, &SkipTrainOptions::default()).unwrap();
    println!("skip model trained in {:.1?}", t0.elapsed());

    let frame_rate = 4.0; let n_mels = 16; let ctx = 32;
    let proxy = |song: &SyntheticSong, seed: u64| gen_feature_proxy(song, frame_rate, n_mels, noise, seed).unwrap();

    // weak corpus
    let t0 = Instant::now();
    let weak_songs: Vec<_> = (0..n_weak).map(|i| gen_song(&format!("weak{i:02}"), &cfg, 2000 + i as u64).unwrap()).collect();
    let weak_profiles = profiles(&weak_songs, &lm, weak_streams, 777);
    let smear = SmearConfig::default();
    let opts = AudioSampleOptions::default();
    let mut weak_samples = Vec::new();
    let mut pos_err = Vec::new();
    let mut n_pos = 0usize; let mut n_fp = 0usize;
    for (i, (song, profile)) in weak_songs.iter().zip(&weak_profiles).enumerate() {
        let curve = predict_skip_likelihood(&skip_model, profile, 0.5, &wc).unwrap();
        let weak = generate_weak_labels(&curve, 0.9, 0.05, 5.0).unwrap();
        let truth = song.structural_boundaries();
        for &t in &weak.positive_times_s {
            n_pos += 1;
            let d = truth.times_s.iter().map(|&b| (b - t).abs()).fold(f64::INFINITY, f64::min);
            if d <= 3.0 { pos_err.push(d); } else { n_fp += 1; }
        }
        if weak.positive_times_s.is_empty() { continue; }
        let spec = proxy(song, 5000 + i as u64);
        weak_samples.extend(make_training_set(&spec, LabelSource::Weak(&weak), &smear, ctx, &opts, 60 + i as u64).unwrap());
    }
    pos_err.sort_by(f64::total_cmp);
    let med_err = if pos_err.is_empty() { f64::NAN } else { pos_err[pos_err.len()/2] };
    println!("weak labels: {} positives, {} false (>3s), median timing err {:.3}s; {} samples, in {:.1?}",
        n_pos, n_fp, med_err, weak_samples.len(), t0.elapsed());

    // CNN
    let t0 = Instant::now();
    let arch_cfg = AudioArchConfig { conv1_out: 8, conv1_kernel: (5,5), pool1: (2,2), conv2_out: 16, conv2_kernel: (3,3), pool2: (2,2), dense_units: 64 };
    let arch = build_audio_arch(&arch_cfg, ctx, n_mels).unwrap();
    let weak_model = train_audio_model(&weak_samples,
        &TrainConfig { epochs: cnn_epochs, seed: 21, batch_size: 64, ..TrainConfig::default() }, &arch).unwrap();
    println!("cnn trained in {:.1?}", t0.elapsed());

    // eval
    let audio_test: Vec<_> = (0..30).map(|i| gen_song(&format!("atest{i:02}"), &cfg, 4000 + i as u64).unwrap()).collect();
    let eval_f = |model: &ModelParams, window: f64| -> f64 {
        let mut fs = Vec::new();
        for (i, song) in audio_test.iter().enumerate() {
            let spec = proxy(song, 7000 + i as u64);
            let curve = predict_audio_likelihood(model, &spec, 1).unwrap();
            let est = peak_pick(&curve, 4.0);
            fs.push(hit_rate(&est, &song.structural_boundaries(), window, 1.0).unwrap().f_weighted);
        }
        fs.iter().sum::<f64>() / fs.len() as f64
    };
    let t0 = Instant::now();
    let weak_f3 = eval_f(&weak_model, 3.0);
    let weak_f05 = eval_f(&weak_model, 0.5);
    println!("weak model: F(3s) {:.3}  F(0.5s) {:.3}  (eval {:.1?})", weak_f3, weak_f05, t0.elapsed());

    let refs: Vec<BoundarySet> = audio_test.iter().map(|s| s.structural_boundaries()).collect();
    let durations: BTreeMap<String, f64> = audio_test.iter().map(|s| (s.track_id.clone(), s.duration_s)).collect();
    let spacings: Vec<f64> = (4..=20).map(|s| s as f64).collect();
    let grid = grid_search_baseline(&refs, &durations, 3.0, 1.0, &spacings).unwrap();
    println!("grid F(3s) {:.3} at {} s", grid.mean_f, grid.spacing_s);

    // finetune
    let t0 = Instant::now();
    let tune_songs: Vec<_> = (0..20).map(|i| gen_song(&format!("tune{i:02}"), &cfg, 3000 + i as u64).unwrap()).collect();
    let tune_smear = SmearConfig { sigma_s: 0.5, pos_radius_s: 1.5, neg_margin_s: 4.0 };
    let mut tune_samples = Vec::new();
    for (i, song) in tune_songs.iter().enumerate() {
        let spec = proxy(song, 6000 + i as u64);
        let b = song.structural_boundaries();
        tune_samples.extend(make_training_set(&spec, LabelSource::Boundaries(&b), &tune_smear, ctx, &opts, 90 + i as u64).unwrap());
    }
    let tuned = finetune_last_layer(&weak_model, &tune_samples,
        &TrainConfig { epochs: tune_epochs, seed: 31, batch_size: 64, ..TrainConfig::default() }).unwrap();
    let tuned_f05 = eval_f(&tuned, 0.5);
    let tuned_f3 = eval_f(&tuned, 3.0);
    println!("tuned: F(0.5s) {:.3} -> {:.3} ({:+.1}%)  F(3s) {:.3} (finetune {:.1?})",
        weak_f05, tuned_f05, 100.0*(tuned_f05/weak_f05 - 1.0), tuned_f3, t0.elapsed());
}
