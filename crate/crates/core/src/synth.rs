//! Seeded synthetic corpora: song structures, listener stop-time simulation
//! driven by a hazard model, and piecewise-stationary feature proxies.

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::audio::MelSpectrogram;
use crate::error::{Error, Result};
use crate::events::SkipEvent;
use crate::exec::{self, ExecMode};
use crate::segeval::{BoundaryKind, BoundarySet};

/// Stationary feature statistics for one song section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectionDescriptor {
    pub start_s: f64,
    pub end_s: f64,
    /// Mean per feature band.
    pub feature_mean: Vec<f64>,
    /// Standard deviation per feature band.
    pub feature_std: Vec<f64>,
    /// Relative strength of the skip surge its start triggers.
    pub surge_scale: f64,
}

/// A generated song: section tiling, boundary ground truth, per-section
/// feature statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSong {
    pub track_id: String,
    pub duration_s: f64,
    pub sections: Vec<SectionDescriptor>,
    /// Mid-section salient events with weaker surges.
    pub extended_times_s: Vec<f64>,
}

impl SyntheticSong {
    /// Section starts, excluding time zero.
    pub fn structural_boundaries(&self) -> BoundarySet {
        let times: Vec<f64> = self.sections[1..].iter().map(|s| s.start_s).collect();
        BoundarySet::new(&self.track_id, times, BoundaryKind::Structural)
            .expect("sections tile the duration")
    }

    /// Structural boundaries plus the mid-section events.
    pub fn extended_boundaries(&self) -> BoundarySet {
        let mut times: Vec<f64> = self.sections[1..].iter().map(|s| s.start_s).collect();
        times.extend_from_slice(&self.extended_times_s);
        times.sort_by(f64::total_cmp);
        times.dedup();
        BoundarySet::new(&self.track_id, times, BoundaryKind::Extended)
            .expect("sections tile the duration")
    }

    pub fn section_at(&self, t: f64) -> &SectionDescriptor {
        self.sections
            .iter()
            .rev()
            .find(|s| t >= s.start_s)
            .unwrap_or(&self.sections[0])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SongConfig {
    pub duration_range_s: (f64, f64),
    pub section_range_s: (f64, f64),
    /// Feature bands carried by the section descriptors.
    pub feature_bands: usize,
    /// Generate mid-section extended boundaries for long sections.
    pub extended: bool,
    /// Smallest mean-feature distance enforced between adjacent sections.
    pub min_section_contrast: f64,
}

impl Default for SongConfig {
    fn default() -> Self {
        SongConfig {
            duration_range_s: (150.0, 210.0),
            section_range_s: (8.0, 30.0),
            feature_bands: 16,
            extended: true,
            min_section_contrast: 1.0,
        }
    }
}

/// Generate one song. Deterministic in `seed`.
pub fn gen_song(track_id: &str, cfg: &SongConfig, seed: u64) -> Result<SyntheticSong> {
    let (dmin, dmax) = cfg.duration_range_s;
    let (smin, smax) = cfg.section_range_s;
    if !(dmin > 0.0 && dmax >= dmin && smin > 0.0 && smax >= smin) {
        return Err(Error::InfeasibleRange {
            reason: "ranges must be positive with min <= max".into(),
        });
    }
    if dmin < 3.0 * smin || (dmin / smax).ceil() < 3.0 {
        return Err(Error::InfeasibleRange {
            reason: "duration too short to guarantee 3 sections (2 boundaries)".into(),
        });
    }
    if cfg.feature_bands == 0 {
        return Err(Error::InfeasibleRange {
            reason: "need at least one feature band".into(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let duration = rng.random_range(dmin..=dmax);

    // Tile sections: keep at least `smin` headroom so the final section
    // always fits the range. When a narrow range leaves no room for both
    // bounds the minimum wins and the tail section may run short.
    let mut starts = vec![0.0f64];
    let mut remaining = duration;
    while remaining > smax {
        let hi = smax.min(remaining - smin);
        let len = if hi <= smin {
            smin
        } else {
            rng.random_range(smin..=hi)
        };
        starts.push(duration - remaining + len);
        remaining -= len;
    }

    let mut sections: Vec<SectionDescriptor> = Vec::with_capacity(starts.len());
    for (i, &start) in starts.iter().enumerate() {
        let end = starts.get(i + 1).copied().unwrap_or(duration);
        let mut mean;
        loop {
            mean = (0..cfg.feature_bands)
                .map(|_| rng.random_range(0.0..4.0))
                .collect::<Vec<f64>>();
            match sections.last() {
                Some(prev) => {
                    let d: f64 = prev
                        .feature_mean
                        .iter()
                        .zip(&mean)
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>()
                        .sqrt();
                    if d >= cfg.min_section_contrast {
                        break;
                    }
                }
                None => break,
            }
        }
        let std = (0..cfg.feature_bands)
            .map(|_| rng.random_range(0.05..0.3))
            .collect();
        sections.push(SectionDescriptor {
            start_s: start,
            end_s: end,
            feature_mean: mean,
            feature_std: std,
            surge_scale: rng.random_range(0.7..1.3),
        });
    }

    let mut extended_times = Vec::new();
    if cfg.extended {
        for s in &sections {
            if s.end_s - s.start_s >= 16.0 && rng.random_bool(0.6) {
                extended_times.push(0.5 * (s.start_s + s.end_s));
            }
        }
    }

    Ok(SyntheticSong {
        track_id: track_id.to_string(),
        duration_s: duration,
        sections,
        extended_times_s: extended_times,
    })
}

/// Listener population parameters: baseline hazard (early drop-off, steady
/// base rate, end-of-track spike) plus boundary-triggered surges with a
/// reaction delay.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ListenerModel {
    /// Peak of the early-listening hazard, 1/s at t = 0.
    pub early_rate: f64,
    /// Decay constant of the early hazard, seconds.
    pub early_tau_s: f64,
    /// Steady background hazard, 1/s.
    pub base_rate: f64,
    /// Extra hazard inside the final seconds of the track, 1/s.
    pub end_spike_rate: f64,
    pub end_spike_window_s: f64,
    /// Peak hazard a structural boundary adds once the delay has elapsed, 1/s.
    pub surge_rate: f64,
    /// Exponential decay constant of a surge, seconds.
    pub surge_tau_s: f64,
    /// Surge strength multiplier for extended (mid-section) events.
    pub extended_surge_factor: f64,
    /// Mean reaction delay between a boundary and the surge it triggers.
    pub reaction_delay_s: f64,
    /// Standard deviation of the per-listener reaction delay.
    pub reaction_jitter_s: f64,
    /// Half-width of a per-track systematic delay offset (audiences react
    /// faster to some songs than others). 0 = same delay everywhere.
    pub delay_track_spread_s: f64,
    /// Multiplicative day-to-day drift amplitude of the baseline (0 = stationary).
    pub day_drift: f64,
}

impl Default for ListenerModel {
    fn default() -> Self {
        ListenerModel {
            early_rate: 0.12,
            early_tau_s: 2.5,
            base_rate: 0.0015,
            end_spike_rate: 0.15,
            end_spike_window_s: 3.0,
            surge_rate: 0.05,
            surge_tau_s: 2.0,
            extended_surge_factor: 0.4,
            reaction_delay_s: 3.5,
            reaction_jitter_s: 0.5,
            delay_track_spread_s: 0.0,
            day_drift: 0.0,
        }
    }
}

/// Hazard grid resolution for stop-time sampling.
const HAZARD_DT_S: f64 = 0.05;
/// Reaction-delay jitter is quantized to this many equally likely variants
/// so cumulative hazards can be precomputed per variant.
const JITTER_VARIANTS: usize = 9;

/// Precomputed inverse-CDF sampler for one (song, listener, date) cell.
pub struct StopSampler {
    duration_s: f64,
    /// Cumulative hazard grids, one per delay variant.
    cum: Vec<Vec<f64>>,
    /// Hazard value per grid step per variant (for analytic checks).
    rates: Vec<Vec<f64>>,
}

impl StopSampler {
    pub fn new(song: &SyntheticSong, listener: &ListenerModel, date_index: i64) -> StopSampler {
        let n = (song.duration_s / HAZARD_DT_S).ceil() as usize;
        // Deterministic daily drift factor.
        let drift = if listener.day_drift == 0.0 {
            1.0
        } else {
            let mut r = ChaCha8Rng::seed_from_u64(date_index as u64 ^ 0x5EED_DA7E);
            1.0 + listener.day_drift * r.random_range(-1.0..1.0)
        };
        let track_offset = if listener.delay_track_spread_s == 0.0 {
            0.0
        } else {
            let mut r = ChaCha8Rng::seed_from_u64(fnv1a(song.track_id.as_bytes()) ^ 0xDE1A);
            listener.delay_track_spread_s * r.random_range(-1.0..1.0)
        };
        let delays: Vec<f64> = (0..JITTER_VARIANTS)
            .map(|q| {
                let u = (q as f64 + 0.5) / JITTER_VARIANTS as f64;
                // Inverse-normal via a rational approximation is overkill;
                // uniform spread covers the intended width.
                listener.reaction_delay_s
                    + track_offset
                    + listener.reaction_jitter_s * (2.0 * u - 1.0) * 1.732_050_8
            })
            .collect();
        let structural = song.structural_boundaries();
        let mut cum = Vec::with_capacity(JITTER_VARIANTS);
        let mut rates = Vec::with_capacity(JITTER_VARIANTS);
        for &delay in &delays {
            let mut h = Vec::with_capacity(n);
            let spike_start = song.duration_s - listener.end_spike_window_s;
            for k in 0..n {
                let t = (k as f64 + 0.5) * HAZARD_DT_S;
                let mut rate = drift
                    * (listener.early_rate * (-t / listener.early_tau_s).exp()
                        + listener.base_rate);
                // Spike onset rarely falls on a grid edge; spread its exact
                // overlap across the step so the integral stays right.
                let step_lo = k as f64 * HAZARD_DT_S;
                let step_hi = step_lo + HAZARD_DT_S;
                let overlap = (step_hi.min(song.duration_s) - step_lo.max(spike_start)).max(0.0);
                rate += listener.end_spike_rate * overlap / HAZARD_DT_S;
                for (bi, &b) in structural.times_s.iter().enumerate() {
                    let onset = b + delay;
                    if t >= onset {
                        let scale = song.sections[bi + 1].surge_scale;
                        rate += listener.surge_rate
                            * scale
                            * (-(t - onset) / listener.surge_tau_s).exp();
                    }
                }
                for &e in &song.extended_times_s {
                    let onset = e + delay;
                    if t >= onset {
                        rate += listener.surge_rate
                            * listener.extended_surge_factor
                            * (-(t - onset) / listener.surge_tau_s).exp();
                    }
                }
                h.push(rate);
            }
            let mut c = Vec::with_capacity(n + 1);
            c.push(0.0);
            let mut acc = 0.0;
            for &r in &h {
                acc += r * HAZARD_DT_S;
                c.push(acc);
            }
            cum.push(c);
            rates.push(h);
        }
        StopSampler {
            duration_s: song.duration_s,
            cum,
            rates,
        }
    }

    /// Draw one stop time; `None` means the stream completed.
    pub fn sample(&self, rng: &mut ChaCha8Rng) -> Option<f64> {
        let variant = rng.random_range(0..self.cum.len());
        let u: f64 = rng.random_range(0.0f64..1.0);
        let target = -(1.0 - u).ln();
        let c = &self.cum[variant];
        if target >= *c.last().unwrap() {
            return None;
        }
        // Binary search for the grid step containing the target, then
        // interpolate inside the (piecewise-constant hazard) step.
        let mut lo = 0usize;
        let mut hi = c.len() - 1;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if c[mid] <= target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let rate = self.rates[variant][lo];
        let within = if rate > 0.0 {
            (target - c[lo]) / rate
        } else {
            0.0
        };
        Some(((lo as f64 * HAZARD_DT_S) + within).min(self.duration_s))
    }

    /// Expected probability of stopping in `[i*bin, (i+1)*bin)` plus the
    /// completion probability, averaged over delay variants.
    pub fn bin_probabilities(&self, bin_width_s: f64) -> (Vec<f64>, f64) {
        let n_bins = (self.duration_s / bin_width_s).ceil() as usize;
        let mut probs = vec![0.0; n_bins];
        let mut complete = 0.0;
        let weight = 1.0 / self.cum.len() as f64;
        for c in &self.cum {
            complete += weight * (-c.last().unwrap()).exp();
            for (i, p) in probs.iter_mut().enumerate() {
                let t0 = i as f64 * bin_width_s;
                let t1 = (t0 + bin_width_s).min(self.duration_s);
                let h0 = self.cum_at(c, t0);
                let h1 = self.cum_at(c, t1);
                *p += weight * ((-h0).exp() - (-h1).exp());
            }
        }
        (probs, complete)
    }

    fn cum_at(&self, c: &[f64], t: f64) -> f64 {
        let pos = t / HAZARD_DT_S;
        let k = (pos.floor() as usize).min(c.len() - 2);
        let frac = pos - k as f64;
        c[k] + (c[k + 1] - c[k]) * frac.clamp(0.0, 1.0)
    }
}

/// Simulate `n_streams` listens of one song on one date. Streams are drawn
/// on independent seeded substreams in fixed chunks, so the event list is
/// identical whatever the thread count.
pub fn gen_skip_events(
    song: &SyntheticSong,
    listener: &ListenerModel,
    n_streams: usize,
    date: NaiveDate,
    region: &str,
    seed: u64,
) -> Vec<SkipEvent> {
    gen_skip_events_mode(
        song,
        listener,
        n_streams,
        date,
        region,
        seed,
        ExecMode::default(),
    )
}

const STREAM_CHUNK: usize = 8192;

pub fn gen_skip_events_mode(
    song: &SyntheticSong,
    listener: &ListenerModel,
    n_streams: usize,
    date: NaiveDate,
    region: &str,
    seed: u64,
    mode: ExecMode,
) -> Vec<SkipEvent> {
    let date_index = date.signed_duration_since(epoch()).num_days();
    let sampler = StopSampler::new(song, listener, date_index);
    let track_hash = fnv1a(song.track_id.as_bytes());
    let starts: Vec<usize> = (0..n_streams).step_by(STREAM_CHUNK).collect();
    let chunks = exec::map_slice(mode, &starts, |&start| {
        let count = STREAM_CHUNK.min(n_streams - start);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(mix(mix(date_index as u64, track_hash), start as u64));
        let mut events = Vec::with_capacity(count);
        for _ in 0..count {
            let (stop, completed) = match sampler.sample(&mut rng) {
                Some(t) => (t, false),
                None => (song.duration_s, true),
            };
            events.push(SkipEvent {
                track_id: song.track_id.clone(),
                stream_date: date,
                region: region.to_string(),
                stop_time_s: stop,
                track_duration_s: song.duration_s,
                completed,
            });
        }
        events
    });
    chunks.into_iter().flatten().collect()
}

fn epoch() -> NaiveDate {
    NaiveDate::from_ymd_opt(2020, 1, 1).unwrap()
}

fn mix(a: u64, b: u64) -> u64 {
    a.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ b.wrapping_add(0x517C_C1B7_2722_0A95)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h = 0xCBF2_9CE4_8422_2325u64;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    h
}

/// Piecewise-stationary feature matrix standing in for a Mel-spectrogram:
/// per-section mean/std plus white noise; the section changes are the ground
/// truth change-points.
pub fn gen_feature_proxy(
    song: &SyntheticSong,
    frame_rate_hz: f64,
    n_mels: usize,
    noise: f64,
    seed: u64,
) -> Result<MelSpectrogram> {
    if frame_rate_hz <= 0.0 {
        return Err(Error::InvalidConfig {
            reason: "frame rate must be positive".into(),
        });
    }
    if n_mels != song.sections[0].feature_mean.len() {
        return Err(Error::DimensionMismatch {
            expected: song.sections[0].feature_mean.len(),
            got: n_mels,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_frames = (song.duration_s * frame_rate_hz).floor() as usize;
    let mut data = Vec::with_capacity(n_frames * n_mels);
    for f in 0..n_frames {
        let t = f as f64 / frame_rate_hz;
        let sec = song.section_at(t);
        for m in 0..n_mels {
            let eps: f64 = if noise > 0.0 {
                rng.sample::<f64, _>(rand_distr::StandardNormal)
            } else {
                0.0
            };
            data.push(sec.feature_mean[m] + noise * sec.feature_std[m] * eps);
        }
    }
    MelSpectrogram::new(&song.track_id, frame_rate_hz, n_mels, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::{ingest_events, PartitionScheme};

    fn date() -> NaiveDate {
        NaiveDate::from_ymd_opt(2026, 4, 10).unwrap()
    }

    #[test]
    fn gen_song_is_deterministic() {
        let cfg = SongConfig::default();
        let a = gen_song("t", &cfg, 99).unwrap();
        let b = gen_song("t", &cfg, 99).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn section_count_bounds() {
        let cfg = SongConfig {
            duration_range_s: (180.0, 180.0),
            ..SongConfig::default()
        };
        for seed in 0..30 {
            let song = gen_song("t", &cfg, seed).unwrap();
            let n = song.sections.len();
            assert!((6..=22).contains(&n), "sections {n}");
            // Sections tile the duration.
            assert_eq!(song.sections[0].start_s, 0.0);
            for w in song.sections.windows(2) {
                assert!((w[0].end_s - w[1].start_s).abs() < 1e-9);
                let len = w[0].end_s - w[0].start_s;
                assert!((8.0..=30.0 + 1e-9).contains(&len), "section length {len}");
            }
            assert!((song.sections.last().unwrap().end_s - song.duration_s).abs() < 1e-9);
            assert!(song.structural_boundaries().len() >= 2);
        }
    }

    #[test]
    fn adjacent_sections_differ() {
        let song = gen_song("t", &SongConfig::default(), 5).unwrap();
        for w in song.sections.windows(2) {
            let d: f64 = w[0]
                .feature_mean
                .iter()
                .zip(&w[1].feature_mean)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            assert!(d > 0.0);
            assert!(d >= 1.0, "contrast {d}");
        }
    }

    #[test]
    fn infeasible_ranges_rejected() {
        let cfg = SongConfig {
            duration_range_s: (20.0, 30.0),
            section_range_s: (8.0, 30.0),
            ..SongConfig::default()
        };
        assert!(gen_song("t", &cfg, 0).is_err());
        let bad = SongConfig {
            section_range_s: (30.0, 8.0),
            ..SongConfig::default()
        };
        assert!(gen_song("t", &bad, 0).is_err());
    }

    #[test]
    fn events_reproducible_and_valid() {
        let song = gen_song("t", &SongConfig::default(), 1).unwrap();
        let lm = ListenerModel::default();
        let a = gen_skip_events(&song, &lm, 5000, date(), "US", 7);
        let b = gen_skip_events(&song, &lm, 5000, date(), "US", 7);
        assert_eq!(a, b);
        for ev in &a {
            ev.validate().unwrap();
        }
        assert!(a.iter().any(|e| e.completed));
        assert!(a.iter().any(|e| !e.completed));
    }

    #[cfg(feature = "parallel")]
    #[test]
    fn events_identical_across_exec_modes() {
        let song = gen_song("t", &SongConfig::default(), 2).unwrap();
        let lm = ListenerModel::default();
        let s = gen_skip_events_mode(&song, &lm, 20000, date(), "US", 3, ExecMode::Sequential);
        let p = gen_skip_events_mode(&song, &lm, 20000, date(), "US", 3, ExecMode::Parallel);
        assert_eq!(s, p);
    }

    #[test]
    fn zero_surge_profile_matches_analytic_hazard() {
        // With surges off the baseline hazard integrates in closed form:
        //   H(t) = a*tau*(1 - exp(-t/tau)) + c*t + spike*max(0, t - (D - w)).
        // The empirical histogram must converge to the implied distribution.
        let song = gen_song("t", &SongConfig::default(), 3).unwrap();
        let lm = ListenerModel {
            surge_rate: 0.0,
            ..ListenerModel::default()
        };
        let cum = |t: f64| {
            lm.early_rate * lm.early_tau_s * (1.0 - (-t / lm.early_tau_s).exp())
                + lm.base_rate * t
                + lm.end_spike_rate * (t - (song.duration_s - lm.end_spike_window_s)).max(0.0)
        };
        let n = 1_000_000usize;
        let events = gen_skip_events(&song, &lm, n, date(), "US", 11);
        let set = ingest_events(events.iter().cloned().map(Ok), 0.5, PartitionScheme::All)
            .unwrap();
        let p = &set.profiles[0];
        let total = (p.total_skips + p.total_completions) as f64;
        for (i, &c) in p.counts.iter().enumerate() {
            let t0 = i as f64 * 0.5;
            let t1 = (t0 + 0.5).min(song.duration_s);
            let expected = (-cum(t0)).exp() - (-cum(t1)).exp();
            let got = c as f64 / total;
            assert!(
                (got - expected).abs() < 0.01,
                "bin {i}: {got} vs {expected}"
            );
        }
        let got_complete = p.total_completions as f64 / total;
        let expect_complete = (-cum(song.duration_s)).exp();
        assert!((got_complete - expect_complete).abs() < 0.01);
        // The precomputed sampler grid agrees with the closed form too.
        let sampler =
            StopSampler::new(&song, &lm, date().signed_duration_since(epoch()).num_days());
        let (grid_probs, grid_complete) = sampler.bin_probabilities(0.5);
        for (i, gp) in grid_probs.iter().enumerate() {
            let t0 = i as f64 * 0.5;
            let t1 = (t0 + 0.5).min(song.duration_s);
            let exact = (-cum(t0)).exp() - (-cum(t1)).exp();
            assert!((gp - exact).abs() < 1e-3, "grid bin {i}: {gp} vs {exact}");
        }
        assert!((grid_complete - expect_complete).abs() < 1e-3);
    }

    #[test]
    fn feature_proxy_constant_within_sections_without_noise() {
        let song = gen_song("t", &SongConfig::default(), 4).unwrap();
        let spec = gen_feature_proxy(&song, 4.0, 16, 0.0, 9).unwrap();
        for f in 0..spec.n_frames() {
            let t = f as f64 / 4.0;
            let sec = song.section_at(t);
            let frame = spec.frame(f);
            for (a, b) in frame.iter().zip(&sec.feature_mean) {
                assert_eq!(a, b);
            }
        }
        // Deterministic with noise too.
        let a = gen_feature_proxy(&song, 4.0, 16, 0.3, 10).unwrap();
        let b = gen_feature_proxy(&song, 4.0, 16, 0.3, 10).unwrap();
        assert_eq!(a.data, b.data);
    }

    #[test]
    fn novelty_oracle_finds_change_points_in_clean_proxy() {
        // Distance of adjacent 2 s window means peaks within one hop of each
        // boundary when noise is zero.
        let song = gen_song("t", &SongConfig::default(), 8).unwrap();
        let rate = 4.0;
        let spec = gen_feature_proxy(&song, rate, 16, 0.0, 0).unwrap();
        let half = (2.0 * rate) as usize;
        let mut novelty = vec![0.0; spec.n_frames()];
        for f in half..spec.n_frames() - half {
            let mut before = vec![0.0; 16];
            let mut after = vec![0.0; 16];
            for k in 0..half {
                for m in 0..16 {
                    before[m] += spec.frame(f - 1 - k)[m] / half as f64;
                    after[m] += spec.frame(f + k)[m] / half as f64;
                }
            }
            novelty[f] = before
                .iter()
                .zip(&after)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
        }
        for b in song.structural_boundaries().times_s {
            let frame = (b * rate).round() as usize;
            if frame < half + 1 || frame + half + 1 >= spec.n_frames() {
                continue;
            }
            let lo = frame.saturating_sub(1);
            let local_best = (lo..=frame + 1)
                .map(|f| novelty[f])
                .fold(f64::NEG_INFINITY, f64::max);
            let window_best = (frame.saturating_sub(half)..frame + half)
                .map(|f| novelty[f])
                .fold(f64::NEG_INFINITY, f64::max);
            assert!(
                local_best >= window_best - 1e-9,
                "boundary at {b}: peak not within one hop"
            );
        }
    }
}
