//! Content-based boundary detection: Gaussian target smearing, patch
//! extraction, the two-conv CNN, sliding-window prediction, and last-layer
//! fine-tuning.

use serde::{Deserialize, Serialize};

use super::mel::MelSpectrogram;
use crate::curve::LikelihoodCurve;
use crate::error::{Error, Result};
use crate::exec::ExecMode;
use crate::neural::{
    infer_shapes, train, train_layers, LayerSpec, ModelParams, Tensor, TrainConfig, TrainSet,
};
use crate::segeval::BoundarySet;
use crate::skip_boundary::WeakLabelSet;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmearConfig {
    /// Gaussian width of positive targets.
    pub sigma_s: f64,
    /// Frames within this distance of a boundary become positives.
    pub pos_radius_s: f64,
    /// Frames at least this far from every boundary become negatives.
    pub neg_margin_s: f64,
}

impl Default for SmearConfig {
    fn default() -> Self {
        SmearConfig {
            sigma_s: 1.5,
            pos_radius_s: 3.0,
            neg_margin_s: 6.0,
        }
    }
}

/// Where training labels come from.
#[derive(Debug, Clone, Copy)]
pub enum LabelSource<'a> {
    Boundaries(&'a BoundarySet),
    Weak(&'a WeakLabelSet),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmearedTarget {
    pub time_s: f64,
    /// `exp(-d^2 / (2 sigma^2))` for positives, exactly 0 for negatives.
    pub target: f64,
    pub nearest_boundary_distance_s: f64,
}

fn nearest_distance(times: &[f64], t: f64) -> f64 {
    times
        .iter()
        .map(|&b| (b - t).abs())
        .fold(f64::INFINITY, f64::min)
}

/// Assign smeared targets to frame times. With reference boundaries, frames
/// near a boundary get a Gaussian positive and frames beyond the negative
/// margin get zero; the ambiguous band in between is dropped. With weak
/// labels, positives form around weak positives and negatives only around
/// weak-negative times that also keep the margin from every weak positive.
pub fn smear_targets(
    source: LabelSource<'_>,
    frame_times: &[f64],
    cfg: &SmearConfig,
) -> Result<Vec<SmearedTarget>> {
    if cfg.sigma_s <= 0.0 {
        return Err(Error::InvalidConfig {
            reason: "smear sigma must be positive".into(),
        });
    }
    let gaussian = |d: f64| (-d * d / (2.0 * cfg.sigma_s * cfg.sigma_s)).exp();
    let mut out = Vec::new();
    match source {
        LabelSource::Boundaries(b) => {
            for &t in frame_times {
                let d = nearest_distance(&b.times_s, t);
                if d <= cfg.pos_radius_s {
                    out.push(SmearedTarget {
                        time_s: t,
                        target: gaussian(d),
                        nearest_boundary_distance_s: d,
                    });
                } else if d >= cfg.neg_margin_s {
                    out.push(SmearedTarget {
                        time_s: t,
                        target: 0.0,
                        nearest_boundary_distance_s: d,
                    });
                }
            }
        }
        LabelSource::Weak(w) => {
            for &t in frame_times {
                let d_pos = nearest_distance(&w.positive_times_s, t);
                let d_neg = nearest_distance(&w.negative_times_s, t);
                if d_pos <= cfg.pos_radius_s {
                    out.push(SmearedTarget {
                        time_s: t,
                        target: gaussian(d_pos),
                        nearest_boundary_distance_s: d_pos,
                    });
                } else if d_neg <= cfg.pos_radius_s && d_pos >= cfg.neg_margin_s {
                    out.push(SmearedTarget {
                        time_s: t,
                        target: 0.0,
                        nearest_boundary_distance_s: d_pos,
                    });
                }
            }
        }
    }
    Ok(out)
}

/// One CNN sample: a (context x mel) patch and its smeared target.
#[derive(Debug, Clone)]
pub struct AudioWindowSample {
    pub center_time_s: f64,
    pub target: f64,
    pub context_frames: usize,
    pub n_mels: usize,
    /// Row-major (frame x mel band).
    pub patch: Vec<f64>,
    /// True when the patch ran over an edge and was replicate-padded.
    pub padded: bool,
}

/// Cut the patch centered on `center_frame`, replicating edge frames when
/// the window runs past either end.
pub fn extract_patch(
    spec: &MelSpectrogram,
    center_frame: usize,
    context_frames: usize,
) -> (Vec<f64>, bool) {
    let n = spec.n_frames() as isize;
    let half = (context_frames / 2) as isize;
    let mut patch = Vec::with_capacity(context_frames * spec.n_mels);
    let mut padded = false;
    for off in 0..context_frames as isize {
        let idx = center_frame as isize - half + off;
        let clamped = idx.clamp(0, n - 1);
        if clamped != idx {
            padded = true;
        }
        patch.extend_from_slice(spec.frame(clamped as usize));
    }
    (patch, padded)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AudioSampleOptions {
    /// Negatives kept per positive after downsampling.
    pub negative_ratio: f64,
    /// Drop samples whose patch needed edge padding.
    pub skip_padded: bool,
}

impl Default for AudioSampleOptions {
    fn default() -> Self {
        AudioSampleOptions {
            negative_ratio: 2.0,
            skip_padded: true,
        }
    }
}

/// Build the training set for one track: smear targets over the frame grid,
/// cut patches, and downsample negatives.
pub fn make_training_set(
    spec: &MelSpectrogram,
    source: LabelSource<'_>,
    smear: &SmearConfig,
    context_frames: usize,
    opts: &AudioSampleOptions,
    seed: u64,
) -> Result<Vec<AudioWindowSample>> {
    let frame_times: Vec<f64> = (0..spec.n_frames()).map(|i| spec.frame_time(i)).collect();
    let targets = smear_targets(source, &frame_times, smear)?;
    let mut positives = Vec::new();
    let mut negatives = Vec::new();
    for st in targets {
        let frame = (st.time_s * spec.frame_rate_hz).round() as usize;
        if frame >= spec.n_frames() {
            continue;
        }
        let (patch, padded) = extract_patch(spec, frame, context_frames);
        if padded && opts.skip_padded {
            continue;
        }
        let sample = AudioWindowSample {
            center_time_s: st.time_s,
            target: st.target,
            context_frames,
            n_mels: spec.n_mels,
            patch,
            padded,
        };
        if st.target > 0.0 {
            positives.push(sample);
        } else {
            negatives.push(sample);
        }
    }
    let keep = ((positives.len() as f64 * opts.negative_ratio).ceil() as usize)
        .min(negatives.len());
    if keep < negatives.len() {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ 0xA0D1_0A0D);
        negatives.shuffle(&mut rng);
        negatives.truncate(keep);
    }
    positives.extend(negatives);
    Ok(positives)
}

/// Kernel and width settings for the fixed two-conv architecture.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AudioArchConfig {
    pub conv1_out: usize,
    pub conv1_kernel: (usize, usize),
    pub pool1: (usize, usize),
    pub conv2_out: usize,
    pub conv2_kernel: (usize, usize),
    pub pool2: (usize, usize),
    pub dense_units: usize,
}

impl Default for AudioArchConfig {
    fn default() -> Self {
        AudioArchConfig {
            conv1_out: 8,
            conv1_kernel: (6, 8),
            pool1: (3, 3),
            conv2_out: 16,
            conv2_kernel: (6, 6),
            pool2: (3, 3),
            dense_units: 128,
        }
    }
}

/// Materialize conv -> pool -> conv -> pool -> dense -> scalar sigmoid for a
/// given patch size.
pub fn build_audio_arch(
    cfg: &AudioArchConfig,
    context_frames: usize,
    n_mels: usize,
) -> Result<Vec<LayerSpec>> {
    let mut arch = vec![
        LayerSpec::Conv2d {
            in_channels: 1,
            out_channels: cfg.conv1_out,
            kernel_h: cfg.conv1_kernel.0,
            kernel_w: cfg.conv1_kernel.1,
        },
        LayerSpec::Relu,
        LayerSpec::MaxPool2d {
            size_h: cfg.pool1.0,
            size_w: cfg.pool1.1,
        },
        LayerSpec::Conv2d {
            in_channels: cfg.conv1_out,
            out_channels: cfg.conv2_out,
            kernel_h: cfg.conv2_kernel.0,
            kernel_w: cfg.conv2_kernel.1,
        },
        LayerSpec::Relu,
        LayerSpec::MaxPool2d {
            size_h: cfg.pool2.0,
            size_w: cfg.pool2.1,
        },
    ];
    let shapes = infer_shapes(&arch, &[1, context_frames, n_mels])?;
    let flat: usize = shapes.last().unwrap().iter().product();
    arch.push(LayerSpec::Dense {
        inputs: flat,
        outputs: cfg.dense_units,
    });
    arch.push(LayerSpec::Relu);
    arch.push(LayerSpec::Dense {
        inputs: cfg.dense_units,
        outputs: 1,
    });
    arch.push(LayerSpec::Sigmoid);
    Ok(arch)
}

/// Enforce the fixed shape: two conv layers, each followed by max-pooling,
/// then dense layers onto a scalar sigmoid.
pub fn validate_audio_arch(arch: &[LayerSpec]) -> Result<()> {
    let stripped: Vec<&LayerSpec> = arch
        .iter()
        .filter(|l| !matches!(l, LayerSpec::Relu))
        .collect();
    let fail = |reason: &str| {
        Err(Error::InvalidArchitecture {
            reason: reason.to_string(),
        })
    };
    let n = stripped.len();
    if n < 6 || n > 7 {
        return fail("expected conv/pool/conv/pool/dense(.../dense)/sigmoid");
    }
    if !matches!(stripped[0], LayerSpec::Conv2d { .. })
        || !matches!(stripped[1], LayerSpec::MaxPool2d { .. })
        || !matches!(stripped[2], LayerSpec::Conv2d { .. })
        || !matches!(stripped[3], LayerSpec::MaxPool2d { .. })
    {
        return fail("front of the stack must be conv, pool, conv, pool");
    }
    for l in &stripped[4..n - 1] {
        if !matches!(l, LayerSpec::Dense { .. }) {
            return fail("tail before the sigmoid must be dense");
        }
    }
    match stripped[n - 2] {
        LayerSpec::Dense { outputs: 1, .. } => {}
        _ => return fail("final dense layer must produce a scalar"),
    }
    if !matches!(stripped[n - 1], LayerSpec::Sigmoid) {
        return fail("output must be a sigmoid");
    }
    Ok(())
}

fn samples_to_train_set(samples: &[AudioWindowSample]) -> Result<(TrainSet, usize, usize)> {
    if samples.is_empty() {
        return Err(Error::InvalidConfig {
            reason: "no audio samples".into(),
        });
    }
    let ctx = samples[0].context_frames;
    let mels = samples[0].n_mels;
    let mut data = Vec::with_capacity(samples.len() * ctx * mels);
    let mut targets = Vec::with_capacity(samples.len());
    for s in samples {
        if s.context_frames != ctx || s.n_mels != mels {
            return Err(Error::DimensionMismatch {
                expected: ctx * mels,
                got: s.patch.len(),
            });
        }
        data.extend_from_slice(&s.patch);
        targets.push(s.target);
    }
    let inputs = Tensor::new(vec![samples.len(), 1, ctx, mels], data)?;
    Ok((TrainSet::new(inputs, targets)?, ctx, mels))
}

/// Train the CNN against smeared targets.
pub fn train_audio_model(
    samples: &[AudioWindowSample],
    cfg: &TrainConfig,
    arch: &[LayerSpec],
) -> Result<ModelParams> {
    validate_audio_arch(arch)?;
    let has_pos = samples.iter().any(|s| s.target > 0.5);
    let has_neg = samples.iter().any(|s| s.target <= 0.5);
    if !has_pos || !has_neg {
        return Err(Error::SingleClass);
    }
    let (set, ctx, mels) = samples_to_train_set(samples)?;
    let model = ModelParams::init(arch.to_vec(), vec![1, ctx, mels], cfg.seed, "audio-nn")?;
    Ok(train(&model, &set, cfg)?.model)
}

/// Slide the trained model across a spectrogram; one likelihood value per
/// `hop_frames`.
pub fn predict_audio_likelihood(
    model: &ModelParams,
    spec: &MelSpectrogram,
    hop_frames: usize,
) -> Result<LikelihoodCurve> {
    if hop_frames == 0 {
        return Err(Error::InvalidConfig {
            reason: "hop must be at least one frame".into(),
        });
    }
    let shape = &model.input_shape;
    if shape.len() != 3 || shape[2] != spec.n_mels {
        return Err(Error::DimensionMismatch {
            expected: shape.get(2).copied().unwrap_or(0),
            got: spec.n_mels,
        });
    }
    let ctx = shape[1];
    if spec.n_frames() < ctx {
        return Err(Error::AudioTooShort {
            reason: format!(
                "{} frames, context window needs {ctx}",
                spec.n_frames()
            ),
        });
    }
    let n_windows = (spec.n_frames() - ctx) / hop_frames + 1;
    let mut data = Vec::with_capacity(n_windows * ctx * spec.n_mels);
    let mut times = Vec::with_capacity(n_windows);
    for w in 0..n_windows {
        let start = w * hop_frames;
        data.extend_from_slice(&spec.data[start * spec.n_mels..(start + ctx) * spec.n_mels]);
        times.push((start + ctx / 2) as f64 / spec.frame_rate_hz);
    }
    let batch = Tensor::new(vec![n_windows, 1, ctx, spec.n_mels], data)?;
    let out = model.forward_mode(&batch, ExecMode::default())?;
    LikelihoodCurve::new(&spec.track_id, &model.meta.model_id, times, out.data)
}

/// Retrain only the final dense layer on a curated set; every other weight
/// is left bit-identical.
pub fn finetune_last_layer(
    model: &ModelParams,
    samples: &[AudioWindowSample],
    cfg: &TrainConfig,
) -> Result<ModelParams> {
    let last_dense = model
        .arch
        .iter()
        .rposition(|l| matches!(l, LayerSpec::Dense { .. }))
        .ok_or_else(|| Error::InvalidArchitecture {
            reason: "model has no dense layer to fine-tune".into(),
        })?;
    let (set, _, _) = samples_to_train_set(samples)?;
    let outcome = train_layers(model, &set, cfg, Some(&[last_dense]))?;
    let mut tuned = outcome.model;
    tuned.meta.model_id = format!("{}-finetuned", model.meta.model_id);
    Ok(tuned)
}
