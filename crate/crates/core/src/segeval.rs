//! Boundary estimation and scoring: peak-picking on likelihood curves, the
//! windowed hit-rate F-score, the fixed-grid baseline, and corpus reports.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::curve::LikelihoodCurve;
use crate::error::{Error, Result};
use crate::exec::{self, ExecMode};
use crate::signal;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryKind {
    Structural,
    Extended,
}

impl BoundaryKind {
    pub fn label(&self) -> &'static str {
        match self {
            BoundaryKind::Structural => "structural",
            BoundaryKind::Extended => "extended",
        }
    }
}

/// Ordered boundary timestamps for one track.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundarySet {
    #[serde(rename = "track")]
    pub track_id: String,
    pub kind: BoundaryKind,
    #[serde(rename = "boundaries")]
    pub times_s: Vec<f64>,
}

impl BoundarySet {
    pub fn new(track_id: &str, times_s: Vec<f64>, kind: BoundaryKind) -> Result<BoundarySet> {
        if times_s.iter().any(|t| !t.is_finite() || *t <= 0.0) {
            return Err(Error::InvalidBoundaries);
        }
        if times_s.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidBoundaries);
        }
        Ok(BoundarySet {
            track_id: track_id.to_string(),
            kind,
            times_s,
        })
    }

    pub fn len(&self) -> usize {
        self.times_s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times_s.is_empty()
    }
}

/// Read a JSON array of boundary sets.
pub fn boundary_sets_from_json(text: &str) -> Result<Vec<BoundarySet>> {
    let raw: Vec<BoundarySet> = serde_json::from_str(text)?;
    for b in &raw {
        BoundarySet::new(&b.track_id, b.times_s.clone(), b.kind)?;
    }
    Ok(raw)
}

pub fn boundary_sets_to_json(sets: &[BoundarySet]) -> String {
    serde_json::to_string_pretty(sets).expect("boundary serialization cannot fail")
}

pub const DEFAULT_MIN_SPACING_S: f64 = 4.0;

/// Turn a likelihood curve into discrete boundaries. Local maxima are
/// accepted greedily in descending value order subject to a minimum spacing;
/// the final threshold is half the value of the third-highest accepted peak
/// (zero when fewer than three survive).
pub fn peak_pick(curve: &LikelihoodCurve, min_spacing_s: f64) -> BoundarySet {
    let candidates = signal::local_maxima(&curve.values);
    let accepted =
        signal::select_spaced_peaks(&curve.times_s, &curve.values, &candidates, min_spacing_s);
    let mut by_value: Vec<f64> = accepted.iter().map(|&(_, v)| v).collect();
    by_value.sort_by(|a, b| b.total_cmp(a));
    let threshold = if by_value.len() >= 3 {
        0.5 * by_value[2]
    } else {
        0.0
    };
    let times: Vec<f64> = accepted
        .iter()
        .filter(|&&(_, v)| v >= threshold)
        .map(|&(i, _)| curve.times_s[i])
        .collect();
    BoundarySet {
        track_id: curve.track_id.clone(),
        kind: BoundaryKind::Structural,
        times_s: times,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct HitRateResult {
    pub window_s: f64,
    pub beta: f64,
    pub precision: f64,
    pub recall: f64,
    pub f_weighted: f64,
    /// Matched (estimate, reference) time pairs.
    pub matches: Vec<(f64, f64)>,
    /// Set when the estimate was empty and precision was reported as 0.
    pub empty_estimate: bool,
}

/// Weighted F-score: `(1+b^2) P R / (b^2 P + R)`, 0 when both P and R are 0.
pub fn f_score(precision: f64, recall: f64, beta: f64) -> f64 {
    let b2 = beta * beta;
    let denom = b2 * precision + recall;
    if denom == 0.0 {
        0.0
    } else {
        (1.0 + b2) * precision * recall / denom
    }
}

/// Maximum one-to-one matching between estimate and reference boundaries
/// within `window_s`, scored as precision/recall/weighted F. For sorted
/// times on a line the greedy earliest-compatible pairing is optimal.
pub fn hit_rate(
    est: &BoundarySet,
    reference: &BoundarySet,
    window_s: f64,
    beta: f64,
) -> Result<HitRateResult> {
    if window_s <= 0.0 {
        return Err(Error::InvalidConfig {
            reason: "hit window must be positive".into(),
        });
    }
    if reference.is_empty() {
        return Err(Error::EmptyReference);
    }
    let matches = match_boundaries(&est.times_s, &reference.times_s, window_s);
    let empty_estimate = est.is_empty();
    let precision = if empty_estimate {
        0.0
    } else {
        matches.len() as f64 / est.len() as f64
    };
    let recall = matches.len() as f64 / reference.len() as f64;
    Ok(HitRateResult {
        window_s,
        beta,
        precision,
        recall,
        f_weighted: f_score(precision, recall, beta),
        matches,
        empty_estimate,
    })
}

/// Greedy maximum matching of two sorted time lists within a tolerance.
pub fn match_boundaries(est: &[f64], reference: &[f64], window_s: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    let (mut i, mut j) = (0usize, 0usize);
    while i < est.len() && j < reference.len() {
        let d = est[i] - reference[j];
        if d.abs() <= window_s {
            out.push((est[i], reference[j]));
            i += 1;
            j += 1;
        } else if d < 0.0 {
            i += 1;
        } else {
            j += 1;
        }
    }
    out
}

/// Fixed-interval baseline: boundaries at spacing, 2*spacing, ... < duration.
pub fn grid_baseline(track_id: &str, track_duration_s: f64, spacing_s: f64) -> BoundarySet {
    assert!(spacing_s > 0.0, "spacing must be positive");
    let mut times = Vec::new();
    let mut k = 1usize;
    loop {
        let t = k as f64 * spacing_s;
        if t >= track_duration_s {
            break;
        }
        times.push(t);
        k += 1;
    }
    BoundarySet {
        track_id: track_id.to_string(),
        kind: BoundaryKind::Structural,
        times_s: times,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GridSearchResult {
    pub spacing_s: f64,
    pub mean_f: f64,
    /// Mean F per candidate spacing, in search order.
    pub sweep: Vec<(f64, f64)>,
}

/// Search spacings for the grid baseline with the best macro-mean F against
/// the references. Ties keep the smallest spacing.
pub fn grid_search_baseline(
    references: &[BoundarySet],
    durations: &BTreeMap<String, f64>,
    window_s: f64,
    beta: f64,
    spacings: &[f64],
) -> Result<GridSearchResult> {
    if references.is_empty() {
        return Err(Error::EmptyReference);
    }
    let mut sweep = Vec::new();
    let mut best: Option<(f64, f64)> = None;
    for &s in spacings {
        let mut fs = Vec::new();
        for r in references {
            let Some(&dur) = durations.get(&r.track_id) else {
                continue;
            };
            let est = grid_baseline(&r.track_id, dur, s);
            fs.push(hit_rate(&est, r, window_s, beta)?.f_weighted);
        }
        if fs.is_empty() {
            return Err(Error::InvalidConfig {
                reason: "no reference track has a known duration".into(),
            });
        }
        let mean = fs.iter().sum::<f64>() / fs.len() as f64;
        sweep.push((s, mean));
        if best.map_or(true, |(_, bf)| mean > bf) {
            best = Some((s, mean));
        }
    }
    let (spacing_s, mean_f) = best.ok_or_else(|| Error::InvalidConfig {
        reason: "no spacings to search".into(),
    })?;
    Ok(GridSearchResult {
        spacing_s,
        mean_f,
        sweep,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct TrackScore {
    pub track: String,
    pub kind: BoundaryKind,
    pub window_s: f64,
    pub precision: f64,
    pub recall: f64,
    pub f_weighted: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SummaryRow {
    pub kind: BoundaryKind,
    pub window_s: f64,
    pub n_tracks: usize,
    /// Per-track mean F (macro average).
    pub f_macro: f64,
    /// Pooled over all matches/estimates/references (micro average).
    pub f_micro: f64,
    pub precision_macro: f64,
    pub recall_macro: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CorpusReport {
    pub beta: f64,
    pub windows_s: Vec<f64>,
    pub per_track: Vec<TrackScore>,
    pub summaries: Vec<SummaryRow>,
    pub warnings: Vec<String>,
}

impl CorpusReport {
    pub fn summary(&self, kind: BoundaryKind, window_s: f64) -> Option<&SummaryRow> {
        self.summaries
            .iter()
            .find(|s| s.kind == kind && s.window_s == window_s)
    }

    /// One CSV row per algorithm with kind-by-window F columns
    /// (structural first, windows ascending).
    pub fn table_csv(&self, algorithm: &str) -> String {
        let mut header = String::from("algorithm");
        let mut row = algorithm.to_string();
        for s in &self.summaries {
            header.push_str(&format!(",{}_f_{}s", s.kind.label(), trim_num(s.window_s)));
            row.push_str(&format!(",{:.4}", s.f_macro));
        }
        format!("{header}\n{row}\n")
    }
}

fn trim_num(x: f64) -> String {
    let s = format!("{x}");
    s
}

/// Score a corpus of predictions against references of one or both boundary
/// kinds, at each hit window. Tracks without a prediction or without a
/// reference are skipped with a warning.
pub fn evaluate_corpus(
    predictions: &BTreeMap<String, BoundarySet>,
    references: &[BoundarySet],
    windows_s: &[f64],
    beta: f64,
) -> Result<CorpusReport> {
    let mut kinds: Vec<BoundaryKind> = references.iter().map(|r| r.kind).collect();
    kinds.sort();
    kinds.dedup();
    let mut warnings = Vec::new();

    let ref_tracks: std::collections::BTreeSet<&str> = references
        .iter()
        .map(|r| r.track_id.as_str())
        .collect();
    if !ref_tracks
        .iter()
        .any(|t| predictions.contains_key(*t))
    {
        return Err(Error::InvalidConfig {
            reason: "predictions and references share no track".into(),
        });
    }
    for t in predictions.keys() {
        if !ref_tracks.contains(t.as_str()) {
            warnings.push(format!("track {t}: no reference, skipped"));
        }
    }
    for t in &ref_tracks {
        if !predictions.contains_key(*t) {
            warnings.push(format!("track {t}: no prediction, skipped"));
        }
    }

    // (kind, window, reference) jobs, scored in parallel.
    let mut jobs: Vec<(&BoundarySet, f64)> = Vec::new();
    for reference in references {
        if !predictions.contains_key(&reference.track_id) {
            continue;
        }
        for &w in windows_s {
            jobs.push((reference, w));
        }
    }
    let scores: Vec<Result<TrackScore>> = exec::map_slice(ExecMode::default(), &jobs, |&(r, w)| {
        let est = &predictions[&r.track_id];
        let hr = hit_rate(est, r, w, beta)?;
        Ok(TrackScore {
            track: r.track_id.clone(),
            kind: r.kind,
            window_s: w,
            precision: hr.precision,
            recall: hr.recall,
            f_weighted: hr.f_weighted,
        })
    });
    let per_track: Vec<TrackScore> = scores.into_iter().collect::<Result<Vec<_>>>()?;

    let mut summaries = Vec::new();
    for kind in kinds {
        for &w in windows_s {
            let rows: Vec<&TrackScore> = per_track
                .iter()
                .filter(|t| t.kind == kind && t.window_s == w)
                .collect();
            if rows.is_empty() {
                continue;
            }
            let n = rows.len() as f64;
            let f_macro = rows.iter().map(|t| t.f_weighted).sum::<f64>() / n;
            let precision_macro = rows.iter().map(|t| t.precision).sum::<f64>() / n;
            let recall_macro = rows.iter().map(|t| t.recall).sum::<f64>() / n;
            // Micro: pool matches and set sizes across tracks.
            let mut matched = 0.0;
            let mut n_est = 0.0;
            let mut n_ref = 0.0;
            for r in references
                .iter()
                .filter(|r| r.kind == kind && predictions.contains_key(&r.track_id))
            {
                let est = &predictions[&r.track_id];
                matched += match_boundaries(&est.times_s, &r.times_s, w).len() as f64;
                n_est += est.len() as f64;
                n_ref += r.len() as f64;
            }
            let p_micro = if n_est == 0.0 { 0.0 } else { matched / n_est };
            let r_micro = if n_ref == 0.0 { 0.0 } else { matched / n_ref };
            summaries.push(SummaryRow {
                kind,
                window_s: w,
                n_tracks: rows.len(),
                f_macro,
                f_micro: f_score(p_micro, r_micro, beta),
                precision_macro,
                recall_macro,
            });
        }
    }
    Ok(CorpusReport {
        beta,
        windows_s: windows_s.to_vec(),
        per_track,
        summaries,
        warnings,
    })
}
