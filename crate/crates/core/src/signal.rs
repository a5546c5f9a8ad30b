//! Shared 1-D signal primitives: median filtering, zero-phase low-pass
//! filtering, and local-maximum detection.

/// Median filter with replicate padding at both edges. `window` must be odd.
pub fn median_filter(values: &[f64], window: usize) -> Vec<f64> {
    assert!(window % 2 == 1, "median window must be odd");
    if values.is_empty() || window == 1 {
        return values.to_vec();
    }
    let half = window / 2;
    let n = values.len();
    let mut out = Vec::with_capacity(n);
    let mut buf = vec![0.0; window];
    for i in 0..n {
        for (j, slot) in buf.iter_mut().enumerate() {
            let idx = i as isize + j as isize - half as isize;
            let idx = idx.clamp(0, n as isize - 1) as usize;
            *slot = values[idx];
        }
        buf.sort_by(|a, b| a.partial_cmp(b).expect("non-finite sample"));
        out.push(buf[half]);
    }
    out
}

/// Second-order Butterworth low-pass biquad coefficients for a normalized
/// cutoff in cycles per sample (Nyquist = 0.5).
fn butter2_coeffs(cutoff: f64) -> ([f64; 3], [f64; 2]) {
    assert!(
        cutoff > 0.0 && cutoff < 0.5,
        "cutoff must be in (0, 0.5) cycles/sample"
    );
    let k = (std::f64::consts::PI * cutoff).tan();
    let sqrt2 = std::f64::consts::SQRT_2;
    let norm = 1.0 / (1.0 + sqrt2 * k + k * k);
    let b0 = k * k * norm;
    let b = [b0, 2.0 * b0, b0];
    let a = [2.0 * (k * k - 1.0) * norm, (1.0 - sqrt2 * k + k * k) * norm];
    (b, a)
}

fn biquad_forward(x: &[f64], b: &[f64; 3], a: &[f64; 2]) -> Vec<f64> {
    let mut y = Vec::with_capacity(x.len());
    let (mut x1, mut x2, mut y1, mut y2) = (0.0, 0.0, 0.0, 0.0);
    for &xi in x {
        let yi = b[0] * xi + b[1] * x1 + b[2] * x2 - a[0] * y1 - a[1] * y2;
        x2 = x1;
        x1 = xi;
        y2 = y1;
        y1 = yi;
        y.push(yi);
    }
    y
}

/// Zero-phase low-pass: a 2nd-order Butterworth run forward then backward
/// over a replicate-padded copy of the input. Zero phase keeps peak
/// locations in place, which downstream delay estimation depends on.
pub fn lowpass_filtfilt(values: &[f64], cutoff: f64) -> Vec<f64> {
    if values.is_empty() {
        return Vec::new();
    }
    let (b, a) = butter2_coeffs(cutoff);
    let n = values.len();
    // Pad long enough that the startup transient decays below 1e-9.
    let pad = ((12.0 / cutoff).ceil() as usize).min(n.saturating_sub(1));
    let mut padded = Vec::with_capacity(n + 2 * pad);
    padded.extend(std::iter::repeat(values[0]).take(pad));
    padded.extend_from_slice(values);
    padded.extend(std::iter::repeat(values[n - 1]).take(pad));

    let mut y = biquad_forward(&padded, &b, &a);
    y.reverse();
    let mut y = biquad_forward(&y, &b, &a);
    y.reverse();
    y[pad..pad + n].to_vec()
}

/// Indices of interior local maxima, plateau-aware: a run of equal values
/// counts as one maximum (reported at the run's center) when the values on
/// both sides of the run are strictly lower. Runs touching either end of the
/// slice are not maxima.
pub fn local_maxima(values: &[f64]) -> Vec<usize> {
    let n = values.len();
    let mut peaks = Vec::new();
    let mut i = 1;
    while i + 1 <= n.saturating_sub(1) {
        if values[i] > values[i - 1] {
            // Scan the plateau starting at i.
            let mut j = i;
            while j + 1 < n && values[j + 1] == values[i] {
                j += 1;
            }
            if j + 1 < n && values[j + 1] < values[i] {
                peaks.push((i + j) / 2);
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    peaks
}

/// Greedy peak selection: accept candidates in descending value order,
/// rejecting any whose time lies within `min_spacing` of an already accepted
/// peak. Ties in value are broken toward the earlier time for determinism.
/// Returns accepted `(index, value)` pairs sorted by time.
pub fn select_spaced_peaks(
    times: &[f64],
    values: &[f64],
    candidates: &[usize],
    min_spacing: f64,
) -> Vec<(usize, f64)> {
    let mut order: Vec<usize> = candidates.to_vec();
    order.sort_by(|&a, &b| {
        values[b]
            .partial_cmp(&values[a])
            .expect("non-finite peak value")
            .then(a.cmp(&b))
    });
    let mut accepted: Vec<(usize, f64)> = Vec::new();
    for idx in order {
        let t = times[idx];
        if accepted
            .iter()
            .all(|&(j, _)| (times[j] - t).abs() >= min_spacing)
        {
            accepted.push((idx, values[idx]));
        }
    }
    accepted.sort_by_key(|&(idx, _)| idx);
    accepted
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_filter_window_one_is_identity() {
        let x = vec![3.0, 1.0, 4.0, 1.0, 5.0];
        assert_eq!(median_filter(&x, 1), x);
    }

    #[test]
    fn median_filter_removes_impulse() {
        let mut x = vec![1.0; 20];
        x[10] = 100.0;
        let y = median_filter(&x, 3);
        assert_eq!(y, vec![1.0; 20]);
    }

    #[test]
    fn median_filter_replicates_edges() {
        let x = vec![10.0, 1.0, 1.0, 1.0];
        let y = median_filter(&x, 3);
        // First window is [10, 10, 1] by replication.
        assert_eq!(y[0], 10.0);
        assert_eq!(y[1], 1.0);
    }

    #[test]
    fn lowpass_preserves_constant() {
        let x = vec![2.5; 200];
        let y = lowpass_filtfilt(&x, 0.1);
        for (i, v) in y.iter().enumerate() {
            assert!((v - 2.5).abs() < 1e-9, "bin {i}: {v}");
        }
    }

    #[test]
    fn lowpass_attenuates_high_frequency() {
        // Alternating signal at Nyquist should be almost entirely removed.
        let x: Vec<f64> = (0..400).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let y = lowpass_filtfilt(&x, 0.05);
        let max = y[50..350].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(max < 1e-4, "residual ripple {max}");
    }

    #[test]
    fn lowpass_passes_slow_sine_with_zero_phase() {
        let n = 2000;
        let period = 500.0;
        let x: Vec<f64> = (0..n)
            .map(|i| (2.0 * std::f64::consts::PI * i as f64 / period).sin())
            .collect();
        let y = lowpass_filtfilt(&x, 0.1);
        for i in 200..n - 200 {
            assert!((y[i] - x[i]).abs() < 1e-3, "bin {i}: {} vs {}", y[i], x[i]);
        }
    }

    #[test]
    fn local_maxima_basic() {
        assert_eq!(local_maxima(&[0.0, 1.0, 0.0]), vec![1]);
        assert_eq!(local_maxima(&[0.0, 1.0, 2.0, 3.0]), Vec::<usize>::new());
        assert_eq!(local_maxima(&[1.0, 1.0, 1.0, 1.0]), Vec::<usize>::new());
    }

    #[test]
    fn local_maxima_plateau_center() {
        // Plateau of 1.0 spanning indices 2..=4 is a single peak at 3.
        assert_eq!(local_maxima(&[0.0, 0.5, 1.0, 1.0, 1.0, 0.5, 0.0]), vec![3]);
    }

    #[test]
    fn local_maxima_edge_plateau_excluded() {
        assert_eq!(local_maxima(&[1.0, 1.0, 0.0, 0.0]), Vec::<usize>::new());
        assert_eq!(local_maxima(&[0.0, 0.5, 1.0, 1.0]), Vec::<usize>::new());
    }

    #[test]
    fn spaced_peaks_keep_taller_of_close_pair() {
        let times: Vec<f64> = (0..12).map(|i| i as f64).collect();
        let values = vec![0.0, 0.8, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.6, 0.0, 0.0, 0.0];
        let cands = local_maxima(&values);
        let picked = select_spaced_peaks(&times, &values, &cands, 4.0);
        let idx: Vec<usize> = picked.iter().map(|&(i, _)| i).collect();
        assert_eq!(idx, vec![3, 8]);
    }
}
