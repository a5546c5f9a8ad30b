//! Separating a Skip Profile into a smooth trend and a rectified residual.
//! The residual exposes the skip surges that follow section boundaries.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::profiles::SkipProfile;
use crate::segeval::BoundarySet;
use crate::signal;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetrendParams {
    /// Median pre-filter width in bins; odd. Wide enough that a 1-2 bin
    /// surge counts as an outlier rather than trend.
    pub median_window_bins: usize,
    /// Low-pass cutoff in cycles per bin, applied as a zero-phase filter so
    /// residual peak locations stay put.
    pub lowpass_cutoff: f64,
}

impl Default for DetrendParams {
    fn default() -> Self {
        DetrendParams {
            median_window_bins: 9,
            lowpass_cutoff: 0.1,
        }
    }
}

/// Trend/residual decomposition of a profile, on the normalized
/// (counts / total skips) scale.
#[derive(Debug, Clone, Serialize)]
pub struct DetrendedProfile {
    pub track_id: String,
    pub bin_width_s: f64,
    pub trend: Vec<f64>,
    /// `max(0, normalized - trend)`, elementwise.
    pub residual: Vec<f64>,
    /// Bins at each end where filter edge effects make values unreliable.
    pub edge_bins: usize,
    pub params: DetrendParams,
}

impl DetrendedProfile {
    pub fn bin_time(&self, i: usize) -> f64 {
        i as f64 * self.bin_width_s
    }

    /// Indices of residual local maxima, sorted by descending value.
    pub fn residual_peaks(&self) -> Vec<usize> {
        let mut peaks = signal::local_maxima(&self.residual);
        peaks.retain(|&i| self.residual[i] > 0.0);
        peaks.sort_by(|&a, &b| {
            self.residual[b]
                .total_cmp(&self.residual[a])
                .then(a.cmp(&b))
        });
        peaks
    }
}

/// Estimate the smooth course of a profile with a median filter followed by
/// a zero-phase low-pass, subtract it, and rectify the difference.
pub fn detrend(p: &SkipProfile, params: &DetrendParams) -> Result<DetrendedProfile> {
    if params.median_window_bins % 2 == 0 {
        return Err(Error::InvalidConfig {
            reason: "median window must be odd".into(),
        });
    }
    if !(params.lowpass_cutoff > 0.0 && params.lowpass_cutoff < 0.5) {
        return Err(Error::InvalidConfig {
            reason: "low-pass cutoff must lie in (0, 0.5) cycles/bin".into(),
        });
    }
    if p.total_skips == 0 {
        return Err(Error::EmptyProfile {
            track: p.track_id.clone(),
        });
    }
    let total = p.total_skips as f64;
    let normalized: Vec<f64> = p.counts.iter().map(|&c| c as f64 / total).collect();
    let med = signal::median_filter(&normalized, params.median_window_bins);
    let trend = signal::lowpass_filtfilt(&med, params.lowpass_cutoff);
    let residual: Vec<f64> = normalized
        .iter()
        .zip(&trend)
        .map(|(x, t)| (x - t).max(0.0))
        .collect();
    Ok(DetrendedProfile {
        track_id: p.track_id.clone(),
        bin_width_s: p.bin_width_s,
        trend,
        residual,
        edge_bins: params.median_window_bins,
        params: *params,
    })
}

/// Seconds to search past each boundary for its skip surge.
pub const SURGE_SEARCH_WINDOW_S: f64 = 10.0;

/// Peaks below this fraction of the strongest residual (edge zones
/// excluded) are treated as sampling noise, not surges.
pub const SURGE_PEAK_FLOOR: f64 = 0.1;

/// Median, over boundaries, of the lag between a boundary and the first
/// significant residual peak that follows it within the search window.
/// Boundaries with no qualifying peak are skipped; if none has one, this
/// errors.
pub fn surge_delay_estimate(d: &DetrendedProfile, boundaries: &BoundarySet) -> Result<f64> {
    if boundaries.times_s.is_empty() {
        return Err(Error::EmptyReference);
    }
    let n = d.residual.len();
    let lo = d.edge_bins.min(n);
    let hi = n.saturating_sub(d.edge_bins).max(lo);
    let strongest = d.residual[lo..hi].iter().cloned().fold(0.0f64, f64::max);
    let floor = SURGE_PEAK_FLOOR * strongest;
    let mut peak_times: Vec<f64> = signal::local_maxima(&d.residual)
        .into_iter()
        .filter(|&i| d.residual[i] > 0.0 && d.residual[i] >= floor)
        .map(|i| d.bin_time(i))
        .collect();
    peak_times.sort_by(f64::total_cmp);
    let mut delays: Vec<f64> = Vec::new();
    for &b in &boundaries.times_s {
        if let Some(&t) = peak_times
            .iter()
            .find(|&&t| t > b && t <= b + SURGE_SEARCH_WINDOW_S)
        {
            delays.push(t - b);
        }
    }
    if delays.is_empty() {
        return Err(Error::NoResidualPeak);
    }
    delays.sort_by(f64::total_cmp);
    let n = delays.len();
    Ok(if n % 2 == 1 {
        delays[n / 2]
    } else {
        0.5 * (delays[n / 2 - 1] + delays[n / 2])
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
            total_completions: 0,
        }
    }

    #[test]
    fn constant_profile_has_zero_residual() {
        let p = profile(vec![40; 400], 0.5);
        let d = detrend(&p, &DetrendParams::default()).unwrap();
        let e = d.edge_bins;
        for i in e..400 - e {
            assert!(d.residual[i] <= 1e-6, "bin {i}: {}", d.residual[i]);
        }
    }

    #[test]
    fn impulse_on_smooth_trend_dominates_residual() {
        // Slow ramp plus one tall spike: residual argmax must be the spike.
        let n = 600;
        let mut counts: Vec<u64> = (0..n).map(|i| 100 + i as u64 / 6).collect();
        counts[300] += 5000;
        let p = profile(counts, 0.5);
        let d = detrend(&p, &DetrendParams::default()).unwrap();
        let argmax = d
            .residual
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        assert_eq!(argmax, 300);
    }

    #[test]
    fn empty_profile_rejected() {
        let p = profile(vec![0; 100], 0.5);
        assert!(matches!(
            detrend(&p, &DetrendParams::default()),
            Err(Error::EmptyProfile { .. })
        ));
    }

    #[test]
    fn residual_is_nonnegative_and_scale_invariant() {
        let counts: Vec<u64> = (0..500)
            .map(|i| (60.0 + 40.0 * ((i as f64) / 37.0).sin()).round() as u64)
            .collect();
        let p = profile(counts.clone(), 0.5);
        let d1 = detrend(&p, &DetrendParams::default()).unwrap();
        assert!(d1.residual.iter().all(|&r| r >= 0.0));
        // Doubling all counts leaves the normalized decomposition unchanged.
        let p2 = profile(counts.iter().map(|&c| c * 2).collect(), 0.5);
        let d2 = detrend(&p2, &DetrendParams::default()).unwrap();
        assert_eq!(d1.trend, d2.trend);
        assert_eq!(d1.residual, d2.residual);
    }

    #[test]
    fn pure_low_frequency_leaves_tiny_residual() {
        // Period of 500 bins, far above the 10-bin cutoff period.
        let n = 2000;
        let counts: Vec<u64> = (0..n)
            .map(|i| {
                let x = 1.0 + 0.5 * (2.0 * std::f64::consts::PI * i as f64 / 500.0).sin();
                (x * 100_000.0).round() as u64
            })
            .collect();
        let p = profile(counts, 0.5);
        let d = detrend(&p, &DetrendParams::default()).unwrap();
        let total = p.total_skips as f64;
        let max_input = p.counts.iter().copied().max().unwrap() as f64 / total;
        let worst = d.residual[40..n - 40]
            .iter()
            .fold(0.0f64, |m, &r| m.max(r));
        assert!(
            worst <= 1e-3 * max_input,
            "residual {worst} vs bound {}",
            1e-3 * max_input
        );
    }

    #[test]
    fn surge_delay_exact_impulses() {
        // Impulses exactly 3.5 s after each boundary.
        let bin_w = 0.5;
        let boundaries =
            BoundarySet::new("t", vec![20.0, 50.0, 80.0], BoundaryKind::Structural).unwrap();
        let n = 240;
        let mut residual = vec![0.0; n];
        for &b in &boundaries.times_s {
            let idx = ((b + 3.5) / bin_w) as usize;
            residual[idx] = 1.0;
        }
        let d = DetrendedProfile {
            track_id: "t".into(),
            bin_width_s: bin_w,
            trend: vec![0.0; n],
            residual,
            edge_bins: 9,
            params: DetrendParams::default(),
        };
        let est = surge_delay_estimate(&d, &boundaries).unwrap();
        assert!((est - 3.5).abs() < 1e-12);
    }

    #[test]
    fn surge_delay_needs_a_peak() {
        let boundaries = BoundarySet::new("t", vec![10.0], BoundaryKind::Structural).unwrap();
        let d = DetrendedProfile {
            track_id: "t".into(),
            bin_width_s: 0.5,
            trend: vec![0.0; 100],
            residual: vec![0.0; 100],
            edge_bins: 9,
            params: DetrendParams::default(),
        };
        assert!(matches!(
            surge_delay_estimate(&d, &boundaries),
            Err(Error::NoResidualPeak)
        ));
    }
}
