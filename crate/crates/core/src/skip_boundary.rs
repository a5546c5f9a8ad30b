//! Boundary prediction from Skip Profiles: windowed training samples, the
//! compact feed-forward classifier, likelihood curves, and weak-label
//! generation for the audio model.

use serde::{Deserialize, Serialize};

use crate::curve::LikelihoodCurve;
use crate::detrend::{detrend, DetrendParams};
use crate::error::{Error, Result};
use crate::exec::ExecMode;
use crate::neural::{
    total_params, train, LayerSpec, ModelParams, Tensor, TrainConfig, TrainSet,
};
use crate::profiles::SkipProfile;
use crate::segeval::BoundarySet;
use crate::signal;

/// Hard cap on the classifier size.
pub const PARAM_BUDGET: usize = 50_000;

pub const DEFAULT_WINDOW_S: f64 = 30.0;
pub const DEFAULT_LABEL_RADIUS_S: f64 = 1.0;
pub const DEFAULT_HOP_S: f64 = 0.5;
pub const DEFAULT_TAU_HI: f64 = 0.9;
pub const DEFAULT_TAU_LO: f64 = 0.05;
pub const DEFAULT_MIN_GAP_S: f64 = 5.0;

/// What the network sees in each window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum WindowInput {
    /// De-trended residual (default: the de-trend step exists exactly to
    /// expose boundary-linked structure).
    Residual { params: DetrendParams },
    /// Raw counts divided by total skips.
    Normalized,
}

impl Default for WindowInput {
    fn default() -> Self {
        WindowInput::Residual {
            params: DetrendParams::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowConfig {
    pub window_s: f64,
    pub label_radius_s: f64,
    pub input: WindowInput,
    /// Shift labels earlier by the reaction delay instead of letting the
    /// network learn the offset. Off by default.
    pub label_shift_s: f64,
}

impl Default for WindowConfig {
    fn default() -> Self {
        WindowConfig {
            window_s: DEFAULT_WINDOW_S,
            label_radius_s: DEFAULT_LABEL_RADIUS_S,
            input: WindowInput::default(),
            label_shift_s: 0.0,
        }
    }
}

/// One training/inference window over a profile.
#[derive(Debug, Clone)]
pub struct SkipWindowSample {
    pub center_time_s: f64,
    /// Per-window max-normalized signal values.
    pub window: Vec<f64>,
    /// Set when reference boundaries were supplied.
    pub label: Option<bool>,
}

/// Slide a window across the profile at `hop_s`, centers within
/// `[window/2, duration - window/2]`. Labels mark centers within the label
/// radius of a reference boundary.
pub fn make_windows(
    p: &SkipProfile,
    boundaries: Option<&BoundarySet>,
    hop_s: f64,
    cfg: &WindowConfig,
) -> Result<Vec<SkipWindowSample>> {
    if hop_s <= 0.0 {
        return Err(Error::InvalidConfig {
            reason: "hop must be positive".into(),
        });
    }
    if p.track_duration_s <= cfg.window_s {
        return Err(Error::TrackTooShort {
            track: p.track_id.clone(),
            duration_s: p.track_duration_s,
        });
    }
    let signal_values: Vec<f64> = match &cfg.input {
        WindowInput::Residual { params } => detrend(p, params)?.residual,
        WindowInput::Normalized => {
            if p.total_skips == 0 {
                return Err(Error::EmptyProfile {
                    track: p.track_id.clone(),
                });
            }
            let total = p.total_skips as f64;
            p.counts.iter().map(|&c| c as f64 / total).collect()
        }
    };
    let half = cfg.window_s / 2.0;
    let len_bins = (cfg.window_s / p.bin_width_s).round() as usize;
    let n_bins = p.counts.len();
    let mut out = Vec::new();
    let mut k = 0usize;
    loop {
        let center = half + k as f64 * hop_s;
        if center > p.track_duration_s - half + 1e-9 {
            break;
        }
        let start = ((center - half) / p.bin_width_s).round() as usize;
        let start = start.min(n_bins.saturating_sub(len_bins));
        let mut window: Vec<f64> = signal_values[start..start + len_bins].to_vec();
        let max = window.iter().fold(0.0f64, |m, &v| m.max(v));
        if max > 0.0 {
            for v in &mut window {
                *v /= max;
            }
        }
        let label = boundaries.map(|b| {
            b.times_s
                .iter()
                .any(|&t| (t + cfg.label_shift_s - center).abs() <= cfg.label_radius_s)
        });
        out.push(SkipWindowSample {
            center_time_s: center,
            window,
            label,
        });
        k += 1;
    }
    Ok(out)
}

/// The default compact classifier: two hidden layers onto a sigmoid scalar.
pub fn default_skip_arch(input_dim: usize) -> Vec<LayerSpec> {
    vec![
        LayerSpec::Dense {
            inputs: input_dim,
            outputs: 128,
        },
        LayerSpec::Relu,
        LayerSpec::Dense {
            inputs: 128,
            outputs: 64,
        },
        LayerSpec::Relu,
        LayerSpec::Dense {
            inputs: 64,
            outputs: 1,
        },
        LayerSpec::Sigmoid,
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SkipTrainOptions {
    /// Negatives kept per positive after downsampling.
    pub negative_ratio: f64,
}

impl Default for SkipTrainOptions {
    fn default() -> Self {
        SkipTrainOptions {
            negative_ratio: 3.0,
        }
    }
}

/// Train the window classifier, enforcing the parameter budget and
/// rebalancing classes by seeded negative downsampling.
pub fn train_skip_model(
    samples: &[SkipWindowSample],
    cfg: &TrainConfig,
    arch: &[LayerSpec],
    opts: &SkipTrainOptions,
) -> Result<ModelParams> {
    let labelled: Vec<&SkipWindowSample> =
        samples.iter().filter(|s| s.label.is_some()).collect();
    if labelled.is_empty() {
        return Err(Error::InvalidConfig {
            reason: "no labelled windows".into(),
        });
    }
    let dim = labelled[0].window.len();
    let params = total_params(arch);
    if params >= PARAM_BUDGET {
        return Err(Error::ParamBudget {
            count: params,
            budget: PARAM_BUDGET,
        });
    }
    let mut positives: Vec<&SkipWindowSample> = Vec::new();
    let mut negatives: Vec<&SkipWindowSample> = Vec::new();
    for s in labelled {
        if s.window.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: s.window.len(),
            });
        }
        if s.label == Some(true) {
            positives.push(s);
        } else {
            negatives.push(s);
        }
    }
    if positives.is_empty() || negatives.is_empty() {
        return Err(Error::SingleClass);
    }
    let keep_neg = ((positives.len() as f64 * opts.negative_ratio).ceil() as usize)
        .min(negatives.len())
        .max(1);
    if keep_neg < negatives.len() {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5A5A_5A5A);
        negatives.shuffle(&mut rng);
        negatives.truncate(keep_neg);
    }
    let mut data = Vec::with_capacity((positives.len() + negatives.len()) * dim);
    let mut targets = Vec::with_capacity(positives.len() + negatives.len());
    for s in positives.iter().chain(negatives.iter()) {
        data.extend_from_slice(&s.window);
        targets.push(if s.label == Some(true) { 1.0 } else { 0.0 });
    }
    let n = targets.len();
    let inputs = Tensor::new(vec![n, dim], data)?;
    let model = ModelParams::init(arch.to_vec(), vec![dim], cfg.seed, "skip-nn")?;
    let outcome = train(&model, &TrainSet::new(inputs, targets)?, cfg)?;
    Ok(outcome.model)
}

/// Apply the classifier across a profile at `hop_s`; one curve value per
/// window center.
pub fn predict_skip_likelihood(
    model: &ModelParams,
    p: &SkipProfile,
    hop_s: f64,
    cfg: &WindowConfig,
) -> Result<LikelihoodCurve> {
    let windows = make_windows(p, None, hop_s, cfg)?;
    let dim: usize = model.input_shape.iter().product();
    if windows.is_empty() {
        return Err(Error::TrackTooShort {
            track: p.track_id.clone(),
            duration_s: p.track_duration_s,
        });
    }
    if windows[0].window.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: windows[0].window.len(),
        });
    }
    let mut data = Vec::with_capacity(windows.len() * dim);
    for w in &windows {
        data.extend_from_slice(&w.window);
    }
    let batch = Tensor::new(vec![windows.len(), dim], data)?;
    let out = model.forward_mode(&batch, ExecMode::default())?;
    LikelihoodCurve::new(
        &p.track_id,
        &model.meta.model_id,
        windows.iter().map(|w| w.center_time_s).collect(),
        out.data,
    )
}

/// Machine-generated labels kept only where the curve is confidently high
/// or confidently low.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakLabelSet {
    #[serde(rename = "track")]
    pub track_id: String,
    #[serde(rename = "positives")]
    pub positive_times_s: Vec<f64>,
    #[serde(rename = "negatives")]
    pub negative_times_s: Vec<f64>,
    pub tau_hi: f64,
    pub tau_lo: f64,
}

pub fn weak_labels_to_json(sets: &[WeakLabelSet]) -> String {
    serde_json::to_string_pretty(sets).expect("weak label serialization cannot fail")
}

pub fn weak_labels_from_json(text: &str) -> Result<Vec<WeakLabelSet>> {
    Ok(serde_json::from_str(text)?)
}

/// Positives: spaced local maxima at or above `tau_hi`. Negatives: curve
/// times at or below `tau_lo`, at least `min_gap_s` away from every
/// positive. Everything in between is discarded.
pub fn generate_weak_labels(
    curve: &LikelihoodCurve,
    tau_hi: f64,
    tau_lo: f64,
    min_gap_s: f64,
) -> Result<WeakLabelSet> {
    if !(0.0..=1.0).contains(&tau_lo) || !(0.0..=1.0).contains(&tau_hi) || tau_lo >= tau_hi {
        return Err(Error::ThresholdOrder {
            lo: tau_lo,
            hi: tau_hi,
        });
    }
    let candidates: Vec<usize> = signal::local_maxima(&curve.values)
        .into_iter()
        .filter(|&i| curve.values[i] >= tau_hi)
        .collect();
    let accepted =
        signal::select_spaced_peaks(&curve.times_s, &curve.values, &candidates, min_gap_s);
    let positives: Vec<f64> = accepted.iter().map(|&(i, _)| curve.times_s[i]).collect();
    let negatives: Vec<f64> = curve
        .times_s
        .iter()
        .zip(&curve.values)
        .filter(|&(t, &v)| {
            v <= tau_lo && positives.iter().all(|&p| (p - t).abs() >= min_gap_s)
        })
        .map(|(&t, _)| t)
        .collect();
    Ok(WeakLabelSet {
        track_id: curve.track_id.clone(),
        positive_times_s: positives,
        negative_times_s: negatives,
        tau_hi,
        tau_lo,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::PartitionKey;
    use crate::segeval::BoundaryKind;

    fn profile(counts: Vec<u64>, bin_w: f64) -> SkipProfile {
        let total = counts.iter().sum();
        SkipProfile {
            track_id: "t".into(),
            partition: PartitionKey::All,
            bin_width_s: bin_w,
            track_duration_s: counts.len() as f64 * bin_w,
            counts,
            total_skips: total,
            total_completions: 5,
        }
    }

    fn normalized_cfg() -> WindowConfig {
        WindowConfig {
            input: WindowInput::Normalized,
            ..WindowConfig::default()
        }
    }

    #[test]
    fn window_count_on_60s_track() {
        let p = profile(vec![1; 120], 0.5);
        let windows = make_windows(&p, None, 1.0, &normalized_cfg()).unwrap();
        assert_eq!(windows.len(), 31);
        assert_eq!(windows[0].center_time_s, 15.0);
        assert_eq!(windows[30].center_time_s, 45.0);
        assert_eq!(windows[0].window.len(), 60);
    }

    #[test]
    fn label_radius_rule() {
        let p = profile(vec![1; 120], 0.5);
        let b = BoundarySet::new("t", vec![30.0], BoundaryKind::Structural).unwrap();
        let windows = make_windows(&p, Some(&b), 0.5, &normalized_cfg()).unwrap();
        let find = |c: f64| {
            windows
                .iter()
                .find(|w| (w.center_time_s - c).abs() < 1e-9)
                .unwrap()
        };
        assert_eq!(find(29.5).label, Some(true));
        assert_eq!(find(31.5).label, Some(false));
    }

    #[test]
    fn label_fraction_matches_brute_force() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let counts: Vec<u64> = (0..360).map(|_| rng.random_range(0..50)).collect();
        let p = profile(counts, 0.5);
        let times: Vec<f64> = vec![22.3, 61.0, 99.7, 140.2];
        let b = BoundarySet::new("t", times.clone(), BoundaryKind::Structural).unwrap();
        let cfg = normalized_cfg();
        let windows = make_windows(&p, Some(&b), 0.5, &cfg).unwrap();
        let got = windows.iter().filter(|w| w.label == Some(true)).count();
        let brute = windows
            .iter()
            .filter(|w| {
                times
                    .iter()
                    .any(|&t| (t - w.center_time_s).abs() <= cfg.label_radius_s)
            })
            .count();
        assert_eq!(got, brute);
        assert!(got > 0);
    }

    #[test]
    fn too_short_track_is_an_error() {
        let p = profile(vec![1; 40], 0.5);
        assert!(matches!(
            make_windows(&p, None, 0.5, &normalized_cfg()),
            Err(Error::TrackTooShort { .. })
        ));
    }

    #[test]
    fn param_budget_enforced() {
        let too_big = vec![
            LayerSpec::Dense {
                inputs: 60,
                outputs: 900,
            },
            LayerSpec::Relu,
            LayerSpec::Dense {
                inputs: 900,
                outputs: 1,
            },
            LayerSpec::Sigmoid,
        ];
        assert!(total_params(&too_big) >= PARAM_BUDGET);
        let samples = vec![
            SkipWindowSample {
                center_time_s: 15.0,
                window: vec![0.0; 60],
                label: Some(true),
            },
            SkipWindowSample {
                center_time_s: 16.0,
                window: vec![1.0; 60],
                label: Some(false),
            },
        ];
        let cfg = TrainConfig {
            epochs: 1,
            validation_fraction: 0.0,
            ..TrainConfig::default()
        };
        assert!(matches!(
            train_skip_model(&samples, &cfg, &too_big, &SkipTrainOptions::default()),
            Err(Error::ParamBudget { .. })
        ));
        // The default architecture fits the budget with room to spare.
        assert!(total_params(&default_skip_arch(60)) < PARAM_BUDGET);
    }

    #[test]
    fn single_class_rejected() {
        let samples = vec![SkipWindowSample {
            center_time_s: 15.0,
            window: vec![0.0; 8],
            label: Some(true),
        }];
        let cfg = TrainConfig::default();
        assert!(matches!(
            train_skip_model(
                &samples,
                &cfg,
                &default_skip_arch(8),
                &SkipTrainOptions::default()
            ),
            Err(Error::SingleClass)
        ));
    }

    #[test]
    fn training_deterministic_and_predict_matches_forward() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        let mut samples = Vec::new();
        for i in 0..80 {
            let mut w: Vec<f64> = (0..20).map(|_| rng.random_range(0.0..0.2)).collect();
            let label = i % 2 == 0;
            if label {
                w[10] = 1.0;
            }
            samples.push(SkipWindowSample {
                center_time_s: 15.0 + i as f64,
                window: w,
                label: Some(label),
            });
        }
        let cfg = TrainConfig {
            epochs: 30,
            validation_fraction: 0.0,
            seed: 5,
            ..TrainConfig::default()
        };
        let arch = default_skip_arch(20);
        let opts = SkipTrainOptions::default();
        let m1 = train_skip_model(&samples, &cfg, &arch, &opts).unwrap();
        let m2 = train_skip_model(&samples, &cfg, &arch, &opts).unwrap();
        assert_eq!(m1.weights, m2.weights);

        let p = profile(vec![3; 80], 0.5); // 40 s track, 20-bin windows
        let wc = WindowConfig {
            window_s: 10.0,
            ..normalized_cfg()
        };
        let curve = predict_skip_likelihood(&m1, &p, 0.5, &wc).unwrap();
        let windows = make_windows(&p, None, 0.5, &wc).unwrap();
        assert_eq!(curve.len(), windows.len());
        // Curve values equal forward() applied window by window.
        for (i, w) in windows.iter().enumerate() {
            let batch = Tensor::new(vec![1, 20], w.window.clone()).unwrap();
            let out = m1.forward(&batch).unwrap();
            assert_eq!(out.data[0], curve.values[i]);
        }
    }

    #[test]
    fn zero_weight_model_gives_flat_half_curve() {
        let arch = default_skip_arch(20);
        let mut model = ModelParams::init(arch, vec![20], 0, "skip-nn").unwrap();
        model.weights.iter_mut().for_each(|w| *w = 0.0);
        let p = profile(vec![2; 80], 0.5);
        let wc = WindowConfig {
            window_s: 10.0,
            ..normalized_cfg()
        };
        let curve = predict_skip_likelihood(&model, &p, 1.0, &wc).unwrap();
        assert!(curve.values.iter().all(|&v| v == 0.5));
    }

    #[test]
    fn prediction_dimension_mismatch_rejected() {
        let model = ModelParams::init(default_skip_arch(10), vec![10], 0, "m").unwrap();
        let p = profile(vec![2; 120], 0.5);
        assert!(matches!(
            predict_skip_likelihood(&model, &p, 0.5, &normalized_cfg()),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn prediction_is_translation_consistent() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(12);
        // Content confined to the middle so a shift preserves every count.
        let n = 240;
        let mut counts = vec![0u64; n];
        for c in counts.iter_mut().take(150).skip(60) {
            *c = rng.random_range(0..40);
        }
        let p1 = profile(counts.clone(), 0.5);
        let shift = 16usize; // 8 s
        let mut shifted = vec![0u64; n];
        shifted[shift..].copy_from_slice(&counts[..n - shift]);
        let p2 = profile(shifted, 0.5);
        assert_eq!(p1.total_skips, p2.total_skips);

        let model = ModelParams::init(default_skip_arch(60), vec![60], 3, "m").unwrap();
        let cfg = normalized_cfg();
        let c1 = predict_skip_likelihood(&model, &p1, 0.5, &cfg).unwrap();
        let c2 = predict_skip_likelihood(&model, &p2, 0.5, &cfg).unwrap();
        let dt = shift as f64 * 0.5;
        for (i, &t) in c1.times_s.iter().enumerate() {
            let t2 = t + dt;
            if t < 45.0 || t2 > c2.times_s[c2.len() - 1] - 15.0 {
                continue; // stay clear of both track edges
            }
            let j = c2
                .times_s
                .iter()
                .position(|&x| (x - t2).abs() < 1e-9)
                .unwrap();
            assert!(
                (c1.values[i] - c2.values[j]).abs() < 1e-12,
                "t={t}: {} vs {}",
                c1.values[i],
                c2.values[j]
            );
        }
    }

    fn curve_from(values: Vec<f64>) -> LikelihoodCurve {
        let times: Vec<f64> = (0..values.len()).map(|i| i as f64 * 0.5).collect();
        LikelihoodCurve::new("t", "m", times, values).unwrap()
    }

    #[test]
    fn weak_labels_flat_curve_is_empty() {
        let labels = generate_weak_labels(&curve_from(vec![0.5; 100]), 0.9, 0.1, 5.0).unwrap();
        assert!(labels.positive_times_s.is_empty());
        assert!(labels.negative_times_s.is_empty());
    }

    #[test]
    fn weak_labels_single_peak() {
        let mut values = vec![0.0; 100];
        values[40] = 0.95;
        values[39] = 0.2;
        values[41] = 0.2;
        let labels = generate_weak_labels(&curve_from(values), 0.9, 0.1, 5.0).unwrap();
        assert_eq!(labels.positive_times_s, vec![20.0]);
        // Negatives exist and all sit at least min_gap from the positive.
        assert!(!labels.negative_times_s.is_empty());
        assert!(labels
            .negative_times_s
            .iter()
            .all(|&t| (t - 20.0).abs() >= 5.0));
    }

    #[test]
    fn weak_label_threshold_order_enforced() {
        let c = curve_from(vec![0.5; 10]);
        assert!(generate_weak_labels(&c, 0.1, 0.9, 5.0).is_err());
        assert!(generate_weak_labels(&c, 0.9, 0.9, 5.0).is_err());
    }

    #[test]
    fn raising_tau_hi_never_adds_positives() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        for _ in 0..20 {
            let values: Vec<f64> = (0..200).map(|_| rng.random_range(0.0..1.0)).collect();
            let c = curve_from(values);
            let mut prev = usize::MAX;
            for tau in [0.5, 0.6, 0.7, 0.8, 0.9] {
                let n = generate_weak_labels(&c, tau, 0.05, 4.0)
                    .unwrap()
                    .positive_times_s
                    .len();
                assert!(n <= prev, "tau {tau}: {n} > {prev}");
                prev = n;
            }
        }
    }
}
