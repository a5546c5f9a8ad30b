//! Mel-spectrogram extraction: magnitude STFT, triangular Mel filterbank,
//! log(1 + x) compression.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{self, ExecMode};

/// Log-magnitude time-frequency matrix with perceptually warped bands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MelSpectrogram {
    pub track_id: String,
    pub frame_rate_hz: f64,
    pub n_mels: usize,
    /// Row-major (time x mel band).
    pub data: Vec<f64>,
}

impl MelSpectrogram {
    pub fn new(
        track_id: &str,
        frame_rate_hz: f64,
        n_mels: usize,
        data: Vec<f64>,
    ) -> Result<MelSpectrogram> {
        if n_mels == 0 || data.len() % n_mels != 0 {
            return Err(Error::DimensionMismatch {
                expected: n_mels,
                got: data.len(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig {
                reason: "spectrogram contains non-finite values".into(),
            });
        }
        Ok(MelSpectrogram {
            track_id: track_id.to_string(),
            frame_rate_hz,
            n_mels,
            data,
        })
    }

    pub fn n_frames(&self) -> usize {
        self.data.len() / self.n_mels
    }

    pub fn frame(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_mels..(i + 1) * self.n_mels]
    }

    pub fn frame_time(&self, i: usize) -> f64 {
        i as f64 / self.frame_rate_hz
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MelConfig {
    pub n_fft: usize,
    pub hop: usize,
    pub n_mels: usize,
    pub fmin_hz: f64,
    /// Defaults to Nyquist when absent.
    pub fmax_hz: Option<f64>,
}

impl Default for MelConfig {
    fn default() -> Self {
        MelConfig {
            n_fft: 1024,
            hop: 512,
            n_mels: 64,
            fmin_hz: 0.0,
            fmax_hz: None,
        }
    }
}

fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Triangular filterbank over FFT bins, peak weight 1.0 per filter. Within
/// the overlap of two adjacent filters the rising and falling flanks sum to
/// one, so no FFT bin is weighted above 1 in total.
pub fn mel_filterbank(
    n_mels: usize,
    n_fft: usize,
    sample_rate: f64,
    fmin: f64,
    fmax: f64,
) -> Vec<Vec<f64>> {
    let n_bins = n_fft / 2 + 1;
    let mel_lo = hz_to_mel(fmin);
    let mel_hi = hz_to_mel(fmax);
    let points: Vec<f64> = (0..n_mels + 2)
        .map(|i| mel_to_hz(mel_lo + (mel_hi - mel_lo) * i as f64 / (n_mels + 1) as f64))
        .collect();
    let bin_hz = sample_rate / n_fft as f64;
    let mut bank = vec![vec![0.0; n_bins]; n_mels];
    for m in 0..n_mels {
        let (lo, center, hi) = (points[m], points[m + 1], points[m + 2]);
        for (k, w) in bank[m].iter_mut().enumerate() {
            let f = k as f64 * bin_hz;
            if f > lo && f < center {
                *w = (f - lo) / (center - lo);
            } else if f == center {
                *w = 1.0;
            } else if f > center && f < hi {
                *w = (hi - f) / (hi - center);
            }
        }
    }
    bank
}

/// Center frequencies of the filterbank triangles.
pub fn mel_center_frequencies(n_mels: usize, fmin: f64, fmax: f64) -> Vec<f64> {
    let mel_lo = hz_to_mel(fmin);
    let mel_hi = hz_to_mel(fmax);
    (1..=n_mels)
        .map(|i| mel_to_hz(mel_lo + (mel_hi - mel_lo) * i as f64 / (n_mels + 1) as f64))
        .collect()
}

/// Extract a Mel-spectrogram from a mono waveform. Frames are Hann-windowed
/// `n_fft` slices at the configured hop; no padding, so the first frame
/// starts at sample zero and short inputs fail.
pub fn mel_spectrogram(
    track_id: &str,
    samples: &[f64],
    sample_rate: u32,
    cfg: &MelConfig,
) -> Result<MelSpectrogram> {
    if sample_rate == 0 {
        return Err(Error::InvalidConfig {
            reason: "sample rate must be positive".into(),
        });
    }
    if samples.is_empty() {
        return Err(Error::AudioTooShort {
            reason: "empty audio".into(),
        });
    }
    if samples.len() < cfg.n_fft {
        return Err(Error::AudioTooShort {
            reason: format!(
                "{} samples, need at least one {}-sample frame",
                samples.len(),
                cfg.n_fft
            ),
        });
    }
    let sr = sample_rate as f64;
    let fmax = cfg.fmax_hz.unwrap_or(sr / 2.0).min(sr / 2.0);
    let bank = mel_filterbank(cfg.n_mels, cfg.n_fft, sr, cfg.fmin_hz, fmax);
    let window: Vec<f64> = (0..cfg.n_fft)
        .map(|n| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * n as f64 / cfg.n_fft as f64).cos())
        .collect();
    let n_frames = 1 + (samples.len() - cfg.n_fft) / cfg.hop;
    let planner_fft = FftPlanner::<f64>::new().plan_fft_forward(cfg.n_fft);
    let frames: Vec<Vec<f64>> = exec::map_indexed(ExecMode::default(), n_frames, |t| {
        let start = t * cfg.hop;
        let mut buf: Vec<Complex64> = samples[start..start + cfg.n_fft]
            .iter()
            .zip(&window)
            .map(|(&s, &w)| Complex64::new(s * w, 0.0))
            .collect();
        planner_fft.process(&mut buf);
        let mags: Vec<f64> = buf[..cfg.n_fft / 2 + 1].iter().map(|c| c.norm()).collect();
        bank.iter()
            .map(|filt| {
                let e: f64 = filt.iter().zip(&mags).map(|(w, m)| w * m).sum();
                (1.0 + e).ln()
            })
            .collect()
    });
    let mut data = Vec::with_capacity(n_frames * cfg.n_mels);
    for f in frames {
        data.extend(f);
    }
    MelSpectrogram::new(track_id, sr / cfg.hop as f64, cfg.n_mels, data)
}
