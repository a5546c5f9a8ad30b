//! Skip Profiles: binned histograms of stop offsets per (track, partition),
//! plus the collective-behavior statistics derived from them.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::events::SkipEvent;
use crate::signal;

/// How events are grouped into profiles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartitionScheme {
    All,
    ByDate,
    ByRegion,
}

/// The key identifying one partition of a track's streams.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum PartitionKey {
    All,
    Date(NaiveDate),
    Region(String),
}

impl PartitionKey {
    pub fn from_event(scheme: PartitionScheme, ev: &SkipEvent) -> PartitionKey {
        match scheme {
            PartitionScheme::All => PartitionKey::All,
            PartitionScheme::ByDate => PartitionKey::Date(ev.stream_date),
            PartitionScheme::ByRegion => PartitionKey::Region(ev.region.clone()),
        }
    }

    /// Stable text form, used for tie-breaking and report rows.
    pub fn label(&self) -> String {
        match self {
            PartitionKey::All => "all".to_string(),
            PartitionKey::Date(d) => d.to_string(),
            PartitionKey::Region(r) => r.clone(),
        }
    }
}

/// Histogram of stop offsets for one (track, partition) pair. Bin `i` counts
/// non-completed events with `stop_time_s` in `[i*bin, (i+1)*bin)`; completed
/// plays are tracked separately so the survival curve can use them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkipProfile {
    pub track_id: String,
    pub partition: PartitionKey,
    pub bin_width_s: f64,
    pub track_duration_s: f64,
    pub counts: Vec<u64>,
    pub total_skips: u64,
    pub total_completions: u64,
}

pub const DEFAULT_BIN_WIDTH_S: f64 = 0.5;

/// Number of trailing bins that hold end-of-track skips (fade-outs and
/// outro silence); aggregate curves can exclude them.
pub const END_ZONE_BINS: usize = 2;

impl SkipProfile {
    pub fn empty(
        track_id: &str,
        partition: PartitionKey,
        bin_width_s: f64,
        track_duration_s: f64,
    ) -> SkipProfile {
        let n_bins = (track_duration_s / bin_width_s).ceil() as usize;
        SkipProfile {
            track_id: track_id.to_string(),
            partition,
            bin_width_s,
            track_duration_s,
            counts: vec![0; n_bins],
            total_skips: 0,
            total_completions: 0,
        }
    }

    pub fn n_bins(&self) -> usize {
        self.counts.len()
    }

    /// Start time of bin `i`.
    pub fn bin_time(&self, i: usize) -> f64 {
        i as f64 * self.bin_width_s
    }

    pub fn total_streams(&self) -> u64 {
        self.total_skips + self.total_completions
    }

    /// Skips recorded in the final end-zone bins.
    pub fn end_zone_skips(&self) -> u64 {
        let n = self.counts.len();
        self.counts[n.saturating_sub(END_ZONE_BINS)..].iter().sum()
    }

    fn add_event(&mut self, ev: &SkipEvent) -> Result<()> {
        if ev.track_duration_s != self.track_duration_s {
            return Err(Error::DurationMismatch {
                track: self.track_id.clone(),
                first: self.track_duration_s,
                second: ev.track_duration_s,
            });
        }
        if ev.completed {
            self.total_completions += 1;
        } else {
            let mut bin = (ev.stop_time_s / self.bin_width_s) as usize;
            if bin >= self.counts.len() {
                bin = self.counts.len() - 1;
            }
            self.counts[bin] += 1;
            self.total_skips += 1;
        }
        Ok(())
    }
}

/// Incremental profile aggregation. Events may arrive in any order and from
/// any shard; the result is a function of the event multiset only. Lookups
/// avoid allocating on the hot path so hundreds of millions of events stay
/// cheap.
pub struct ProfileBuilder {
    bin_width_s: f64,
    scheme: PartitionScheme,
    tracks: BTreeMap<String, BTreeMap<PartitionKey, SkipProfile>>,
}

impl ProfileBuilder {
    pub fn new(bin_width_s: f64, scheme: PartitionScheme) -> ProfileBuilder {
        assert!(
            bin_width_s > 0.0 && bin_width_s.is_finite(),
            "bin width must be positive"
        );
        ProfileBuilder {
            bin_width_s,
            scheme,
            tracks: BTreeMap::new(),
        }
    }

    pub fn add(&mut self, ev: &SkipEvent) -> Result<()> {
        if let Some(parts) = self.tracks.get_mut(ev.track_id.as_str()) {
            // One track has one duration, whatever the partition.
            if let Some(existing) = parts.values().next() {
                if existing.track_duration_s != ev.track_duration_s {
                    return Err(Error::DurationMismatch {
                        track: ev.track_id.clone(),
                        first: existing.track_duration_s,
                        second: ev.track_duration_s,
                    });
                }
            }
            let key = PartitionKey::from_event(self.scheme, ev);
            if let Some(p) = parts.get_mut(&key) {
                return p.add_event(ev);
            }
            let mut p = SkipProfile::empty(&ev.track_id, key.clone(), self.bin_width_s, ev.track_duration_s);
            p.add_event(ev)?;
            parts.insert(key, p);
            return Ok(());
        }
        let key = PartitionKey::from_event(self.scheme, ev);
        let mut p = SkipProfile::empty(&ev.track_id, key.clone(), self.bin_width_s, ev.track_duration_s);
        p.add_event(ev)?;
        let mut parts = BTreeMap::new();
        parts.insert(key, p);
        self.tracks.insert(ev.track_id.clone(), parts);
        Ok(())
    }

    pub fn finish(self) -> ProfileSet {
        ProfileSet {
            bin_width_s: self.bin_width_s,
            profiles: self
                .tracks
                .into_values()
                .flat_map(|parts| parts.into_values())
                .collect(),
        }
    }
}

/// A collection of profiles sharing one bin width, ordered by
/// (track, partition) for deterministic serialization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileSet {
    pub bin_width_s: f64,
    pub profiles: Vec<SkipProfile>,
}

impl ProfileSet {
    pub fn get(&self, track: &str, partition: &PartitionKey) -> Option<&SkipProfile> {
        self.profiles
            .iter()
            .find(|p| p.track_id == track && &p.partition == partition)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("profile serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<ProfileSet> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Aggregate a stream of events into one profile per (track, partition key).
pub fn ingest_events<I>(events: I, bin_width_s: f64, scheme: PartitionScheme) -> Result<ProfileSet>
where
    I: IntoIterator<Item = Result<SkipEvent>>,
{
    let mut builder = ProfileBuilder::new(bin_width_s, scheme);
    for ev in events {
        builder.add(&ev?)?;
    }
    Ok(builder.finish())
}

/// Element-wise sum of two profiles over the same (track, partition, bins).
pub fn merge(a: &SkipProfile, b: &SkipProfile) -> Result<SkipProfile> {
    if a.track_id != b.track_id {
        return Err(Error::IncompatibleProfiles {
            reason: format!("track {} vs {}", a.track_id, b.track_id),
        });
    }
    if a.partition != b.partition {
        return Err(Error::IncompatibleProfiles {
            reason: "different partitions".into(),
        });
    }
    if a.bin_width_s != b.bin_width_s {
        return Err(Error::IncompatibleProfiles {
            reason: format!("bin width {} vs {}", a.bin_width_s, b.bin_width_s),
        });
    }
    if a.track_duration_s != b.track_duration_s {
        return Err(Error::IncompatibleProfiles {
            reason: format!("duration {} vs {}", a.track_duration_s, b.track_duration_s),
        });
    }
    let mut out = a.clone();
    for (dst, src) in out.counts.iter_mut().zip(&b.counts) {
        *dst += src;
    }
    out.total_skips += b.total_skips;
    out.total_completions += b.total_completions;
    Ok(out)
}

/// Merge every profile of `b` into `a`, matching on (track, partition).
pub fn merge_sets(a: &ProfileSet, b: &ProfileSet) -> Result<ProfileSet> {
    let mut map: BTreeMap<(String, PartitionKey), SkipProfile> = a
        .profiles
        .iter()
        .map(|p| ((p.track_id.clone(), p.partition.clone()), p.clone()))
        .collect();
    for p in &b.profiles {
        let key = (p.track_id.clone(), p.partition.clone());
        match map.remove(&key) {
            Some(existing) => {
                map.insert(key, merge(&existing, p)?);
            }
            None => {
                map.insert(key, p.clone());
            }
        }
    }
    Ok(ProfileSet {
        bin_width_s: a.bin_width_s,
        profiles: map.into_values().collect(),
    })
}

/// Probability that a stream is still playing after each bin:
/// `S[i] = (total - skips through bin i) / total`.
pub fn survival_curve(p: &SkipProfile) -> Result<Vec<f64>> {
    let total = p.total_streams();
    if total == 0 {
        return Err(Error::EmptyProfile {
            track: p.track_id.clone(),
        });
    }
    let total_f = total as f64;
    let mut cum = 0u64;
    Ok(p.counts
        .iter()
        .map(|&c| {
            cum += c;
            (total - cum) as f64 / total_f
        })
        .collect())
}

/// Time axis for aggregate curves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeAxis {
    /// Absolute seconds into each track, up to the longest track.
    Absolute,
    /// Each track resampled onto `n_bins` relative positions in [0, 1).
    Normalized { n_bins: usize },
}

/// Fraction of all streams stopping per (absolute or relative) time bin,
/// aggregated over many profiles. `include_endings = false` drops each
/// profile's final end-zone bins, which otherwise dominate the curve.
pub fn aggregate_curve(
    profiles: &[SkipProfile],
    axis: TimeAxis,
    include_endings: bool,
) -> Result<AggregateCurve> {
    if profiles.is_empty() {
        return Err(Error::InvalidConfig {
            reason: "no profiles to aggregate".into(),
        });
    }
    let total_streams: u64 = profiles.iter().map(|p| p.total_streams()).sum();
    if total_streams == 0 {
        return Err(Error::EmptyProfile {
            track: profiles[0].track_id.clone(),
        });
    }
    let (positions, mass) = match axis {
        TimeAxis::Absolute => {
            let bin_w = profiles[0].bin_width_s;
            if profiles.iter().any(|p| p.bin_width_s != bin_w) {
                return Err(Error::IncompatibleProfiles {
                    reason: "mixed bin widths in aggregation".into(),
                });
            }
            let n = profiles.iter().map(|p| p.n_bins()).max().unwrap();
            let mut mass = vec![0.0; n];
            for p in profiles {
                let cut = effective_bins(p, include_endings);
                for (i, &c) in p.counts[..cut].iter().enumerate() {
                    mass[i] += c as f64;
                }
            }
            let positions = (0..n).map(|i| i as f64 * bin_w).collect();
            (positions, mass)
        }
        TimeAxis::Normalized { n_bins } => {
            if n_bins == 0 {
                return Err(Error::InvalidConfig {
                    reason: "normalized axis needs at least one bin".into(),
                });
            }
            let mut mass = vec![0.0; n_bins];
            for p in profiles {
                let cut = effective_bins(p, include_endings);
                for (i, &c) in p.counts[..cut].iter().enumerate() {
                    let rel = (p.bin_time(i) + 0.5 * p.bin_width_s) / p.track_duration_s;
                    let slot = ((rel * n_bins as f64) as usize).min(n_bins - 1);
                    mass[slot] += c as f64;
                }
            }
            let positions = (0..n_bins).map(|i| i as f64 / n_bins as f64).collect();
            (positions, mass)
        }
    };
    let denom = total_streams as f64;
    Ok(AggregateCurve {
        axis,
        positions,
        skip_fraction: mass.into_iter().map(|m| m / denom).collect(),
        total_streams,
    })
}

fn effective_bins(p: &SkipProfile, include_endings: bool) -> usize {
    if include_endings {
        p.n_bins()
    } else {
        p.n_bins().saturating_sub(END_ZONE_BINS)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AggregateCurve {
    pub axis: TimeAxis,
    pub positions: Vec<f64>,
    pub skip_fraction: Vec<f64>,
    pub total_streams: u64,
}

// ---------------------------------------------------------------------------
// Profile fragments and distances
// ---------------------------------------------------------------------------

/// Slice of a profile used for specificity analysis: seconds [5, 120),
/// median-filtered and L2-normalized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileFragment {
    pub track_id: String,
    pub partition: PartitionKey,
    pub values: Vec<f64>,
}

pub const FRAGMENT_OFFSET_S: f64 = 5.0;
pub const FRAGMENT_SPAN_S: f64 = 115.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FragmentParams {
    pub median_window_bins: usize,
}

impl Default for FragmentParams {
    fn default() -> Self {
        FragmentParams {
            median_window_bins: 5,
        }
    }
}

fn near_integer(x: f64) -> Option<usize> {
    let r = x.round();
    if (x - r).abs() < 1e-9 && r >= 0.0 {
        Some(r as usize)
    } else {
        None
    }
}

/// Extract the normalized fragment of a profile. The first seconds are
/// dropped (start-of-track skips swamp everything else) and only the window
/// up to two minutes is kept so tracks of different lengths stay comparable.
pub fn fragment(p: &SkipProfile, params: &FragmentParams) -> Result<ProfileFragment> {
    if params.median_window_bins % 2 == 0 {
        return Err(Error::InvalidConfig {
            reason: "median window must be odd".into(),
        });
    }
    if p.track_duration_s < FRAGMENT_OFFSET_S + FRAGMENT_SPAN_S {
        return Err(Error::TrackTooShort {
            track: p.track_id.clone(),
            duration_s: p.track_duration_s,
        });
    }
    let start = near_integer(FRAGMENT_OFFSET_S / p.bin_width_s);
    let len = near_integer(FRAGMENT_SPAN_S / p.bin_width_s);
    let (start, len) = match (start, len) {
        (Some(s), Some(l)) => (s, l),
        _ => {
            return Err(Error::BinWidthIncompatible {
                bin_width_s: p.bin_width_s,
            })
        }
    };
    let slice: Vec<f64> = p.counts[start..start + len]
        .iter()
        .map(|&c| c as f64)
        .collect();
    if slice.iter().all(|&v| v == 0.0) {
        return Err(Error::AllZeroFragment {
            track: p.track_id.clone(),
        });
    }
    let filtered = signal::median_filter(&slice, params.median_window_bins);
    let norm = filtered.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::AllZeroFragment {
            track: p.track_id.clone(),
        });
    }
    Ok(ProfileFragment {
        track_id: p.track_id.clone(),
        partition: p.partition.clone(),
        values: filtered.into_iter().map(|v| v / norm).collect(),
    })
}

/// Euclidean distance between two fragments of equal dimension.
pub fn fragment_distance(a: &ProfileFragment, b: &ProfileFragment) -> Result<f64> {
    if a.values.len() != b.values.len() {
        return Err(Error::DimensionMismatch {
            expected: a.values.len(),
            got: b.values.len(),
        });
    }
    Ok(a.values
        .iter()
        .zip(&b.values)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt())
}

/// Which differences a distance series measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesMode {
    /// Distance of each later day to the first usable day.
    VsRelease,
    /// Distance between consecutive usable days.
    DayToDay,
}

#[derive(Debug, Clone, Serialize)]
pub struct DistanceSeries {
    pub mode: SeriesMode,
    /// (day the distance is reported for, distance).
    pub points: Vec<(NaiveDate, f64)>,
    /// Days whose profile could not be fragmented, with the reason.
    pub skipped: Vec<(NaiveDate, String)>,
    /// Calendar gaps between consecutive usable days.
    pub gaps: Vec<(NaiveDate, NaiveDate)>,
}

/// Distances between per-day fragments of one track.
pub fn distance_series(
    days: &[(NaiveDate, SkipProfile)],
    mode: SeriesMode,
    params: &FragmentParams,
) -> Result<DistanceSeries> {
    let mut ordered: Vec<&(NaiveDate, SkipProfile)> = days.iter().collect();
    ordered.sort_by_key(|(d, _)| *d);

    let mut usable: Vec<(NaiveDate, ProfileFragment)> = Vec::new();
    let mut skipped = Vec::new();
    for (date, profile) in ordered {
        match fragment(profile, params) {
            Ok(f) => usable.push((*date, f)),
            Err(e) => skipped.push((*date, e.to_string())),
        }
    }
    if usable.len() < 2 {
        return Err(Error::NotEnoughDays {
            usable: usable.len(),
        });
    }
    let mut gaps = Vec::new();
    for w in usable.windows(2) {
        if (w[1].0 - w[0].0).num_days() > 1 {
            gaps.push((w[0].0, w[1].0));
        }
    }
    let points = match mode {
        SeriesMode::VsRelease => {
            let (_, first) = &usable[0];
            usable[1..]
                .iter()
                .map(|(d, f)| Ok((*d, fragment_distance(first, f)?)))
                .collect::<Result<Vec<_>>>()?
        }
        SeriesMode::DayToDay => usable
            .windows(2)
            .map(|w| Ok((w[1].0, fragment_distance(&w[0].1, &w[1].1)?)))
            .collect::<Result<Vec<_>>>()?,
    };
    Ok(DistanceSeries {
        mode,
        points,
        skipped,
        gaps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ev(track: &str, stop: f64, dur: f64, completed: bool) -> SkipEvent {
        SkipEvent {
            track_id: track.into(),
            stream_date: NaiveDate::from_ymd_opt(2026, 5, 1).unwrap(),
            region: "US".into(),
            stop_time_s: stop,
            track_duration_s: dur,
            completed,
        }
    }

    fn profile_from_counts(counts: Vec<u64>, bin_w: f64, completions: u64) -> SkipProfile {
        let total = counts.iter().sum();
        SkipProfile {
            track_id: "t".into(),
            partition: PartitionKey::All,
            bin_width_s: bin_w,
            track_duration_s: counts.len() as f64 * bin_w,
            counts,
            total_skips: total,
            total_completions: completions,
        }
    }

    #[test]
    fn ingest_bins_events() {
        let events = [
            ev("T", 1.0, 10.0, false),
            ev("T", 1.4, 10.0, false),
            ev("T", 9.0, 10.0, false),
        ];
        let set = ingest_events(
            events.iter().cloned().map(Ok),
            1.0,
            PartitionScheme::All,
        )
        .unwrap();
        assert_eq!(set.profiles.len(), 1);
        let p = &set.profiles[0];
        let mut expected = vec![0u64; 10];
        expected[1] = 2;
        expected[9] = 1;
        assert_eq!(p.counts, expected);
        assert_eq!(p.total_skips, 3);
        assert_eq!(p.total_completions, 0);
    }

    #[test]
    fn ingest_empty_stream_yields_empty_set() {
        let set = ingest_events(std::iter::empty(), 0.5, PartitionScheme::All).unwrap();
        assert!(set.profiles.is_empty());
    }

    #[test]
    fn ingest_rejects_duration_mismatch() {
        let events = [ev("T", 1.0, 10.0, false), ev("T", 1.0, 12.0, false)];
        let err = ingest_events(events.iter().cloned().map(Ok), 1.0, PartitionScheme::All)
            .unwrap_err();
        match err {
            Error::DurationMismatch { track, .. } => assert_eq!(track, "T"),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn completed_plays_excluded_from_counts() {
        let events = [ev("T", 10.0, 10.0, true), ev("T", 2.0, 10.0, false)];
        let set =
            ingest_events(events.iter().cloned().map(Ok), 1.0, PartitionScheme::All).unwrap();
        let p = &set.profiles[0];
        assert_eq!(p.total_skips, 1);
        assert_eq!(p.total_completions, 1);
        assert_eq!(p.counts.iter().sum::<u64>(), 1);
    }

    #[test]
    fn merge_identity_and_commutativity() {
        let a = profile_from_counts(vec![1, 2, 3, 0], 1.0, 5);
        let zero = profile_from_counts(vec![0, 0, 0, 0], 1.0, 0);
        assert_eq!(merge(&a, &zero).unwrap(), a);
        let b = profile_from_counts(vec![4, 0, 1, 1], 1.0, 2);
        assert_eq!(merge(&a, &b).unwrap(), merge(&b, &a).unwrap());
    }

    #[test]
    fn merge_rejects_incompatible() {
        let a = profile_from_counts(vec![1, 2], 1.0, 0);
        let mut b = profile_from_counts(vec![1, 2], 1.0, 0);
        b.bin_width_s = 0.5;
        b.track_duration_s = 1.0;
        assert!(merge(&a, &b).is_err());
    }

    #[test]
    fn survival_all_completions_is_one() {
        let p = profile_from_counts(vec![0, 0, 0], 1.0, 7);
        let s = survival_curve(&p).unwrap();
        assert!(s.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn survival_matches_hand_arithmetic() {
        // 4 skips in bin 0, 6 completions.
        let p = profile_from_counts(vec![4, 0, 0], 1.0, 6);
        let s = survival_curve(&p).unwrap();
        assert_eq!(s[0], 0.6);
        assert_eq!(*s.last().unwrap(), 0.6);
    }

    #[test]
    fn survival_empty_profile_errors() {
        let p = profile_from_counts(vec![0, 0], 1.0, 0);
        assert!(survival_curve(&p).is_err());
    }

    #[test]
    fn survival_matches_event_recount() {
        // Brute-force oracle: recount survivors from raw events.
        use rand::Rng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        use rand::SeedableRng;
        let dur = 30.0;
        let events: Vec<SkipEvent> = (0..500)
            .map(|_| {
                let completed = rng.random_bool(0.3);
                let stop = if completed {
                    dur
                } else {
                    rng.random_range(0.0..dur)
                };
                ev("T", stop, dur, completed)
            })
            .collect();
        let set =
            ingest_events(events.iter().cloned().map(Ok), 1.0, PartitionScheme::All).unwrap();
        let p = &set.profiles[0];
        let s = survival_curve(p).unwrap();
        for i in 0..p.n_bins() {
            let edge = (i + 1) as f64 * p.bin_width_s;
            let still = events
                .iter()
                .filter(|e| e.completed || e.stop_time_s >= edge.min(dur))
                .count() as f64;
            let expect = still / events.len() as f64;
            assert!(
                (s[i] - expect).abs() < 1e-12,
                "bin {i}: {} vs {expect}",
                s[i]
            );
        }
        for w in s.windows(2) {
            assert!(w[1] <= w[0] + 1e-15);
        }
    }

    fn long_profile(bin_w: f64, fill: impl Fn(usize) -> u64) -> SkipProfile {
        let n = (130.0 / bin_w) as usize;
        let counts: Vec<u64> = (0..n).map(fill).collect();
        profile_from_counts(counts, bin_w, 10)
    }

    #[test]
    fn fragment_impulse_lands_at_offset_position() {
        // Single nonzero bin at 60 s with 1 s bins: fragment index 55.
        let p = long_profile(1.0, |i| if i == 60 { 9 } else { 0 });
        let f = fragment(&p, &FragmentParams {
            median_window_bins: 1,
        })
        .unwrap();
        assert_eq!(f.values.len(), 115);
        for (i, v) in f.values.iter().enumerate() {
            if i == 55 {
                assert!((v - 1.0).abs() < 1e-12);
            } else {
                assert_eq!(*v, 0.0);
            }
        }
    }

    #[test]
    fn fragment_scale_invariance() {
        let p = long_profile(0.5, |i| ((i * 7) % 13 + 1) as u64);
        let params = FragmentParams::default();
        let f1 = fragment(&p, &params).unwrap();
        // Power-of-two scaling is exact in floating point.
        let mut p4 = p.clone();
        for c in &mut p4.counts {
            *c *= 4;
        }
        p4.total_skips *= 4;
        let f4 = fragment(&p4, &params).unwrap();
        assert_eq!(f1.values, f4.values);
        // Arbitrary scaling matches to rounding error.
        let mut p3 = p.clone();
        for c in &mut p3.counts {
            *c *= 3;
        }
        p3.total_skips *= 3;
        let f3 = fragment(&p3, &params).unwrap();
        for (a, b) in f1.values.iter().zip(&f3.values) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn fragment_matches_composed_reference_steps() {
        let p = long_profile(0.5, |i| ((i * 31) % 17) as u64);
        let params = FragmentParams::default();
        let f = fragment(&p, &params).unwrap();
        // Reference: slice -> median filter -> normalize, composed separately.
        let start = (FRAGMENT_OFFSET_S / 0.5) as usize;
        let len = (FRAGMENT_SPAN_S / 0.5) as usize;
        let slice: Vec<f64> = p.counts[start..start + len]
            .iter()
            .map(|&c| c as f64)
            .collect();
        let med = signal::median_filter(&slice, params.median_window_bins);
        let norm = med.iter().map(|v| v * v).sum::<f64>().sqrt();
        let reference: Vec<f64> = med.iter().map(|v| v / norm).collect();
        assert_eq!(f.values, reference);
    }

    #[test]
    fn fragment_errors() {
        let short = profile_from_counts(vec![1; 100], 1.0, 0);
        assert!(matches!(
            fragment(&short, &FragmentParams::default()),
            Err(Error::TrackTooShort { .. })
        ));
        let zero = long_profile(1.0, |_| 0);
        assert!(matches!(
            fragment(&zero, &FragmentParams::default()),
            Err(Error::AllZeroFragment { .. })
        ));
        let odd_width = long_profile(0.3, |i| i as u64 % 3);
        assert!(matches!(
            fragment(&odd_width, &FragmentParams::default()),
            Err(Error::BinWidthIncompatible { .. })
        ));
    }

    #[test]
    fn fragment_distance_basics() {
        let mk = |values: Vec<f64>| ProfileFragment {
            track_id: "t".into(),
            partition: PartitionKey::All,
            values,
        };
        let e1 = mk(vec![1.0, 0.0]);
        let e2 = mk(vec![0.0, 1.0]);
        assert_eq!(fragment_distance(&e1, &e1).unwrap(), 0.0);
        assert!((fragment_distance(&e1, &e2).unwrap() - 2.0f64.sqrt()).abs() < 1e-15);
        let bad = mk(vec![1.0]);
        assert!(fragment_distance(&e1, &bad).is_err());
    }

    #[test]
    fn distance_series_counts_and_gaps() {
        let date = |d: u32| NaiveDate::from_ymd_opt(2026, 6, d).unwrap();
        let mk = |seed: u64| long_profile(1.0, |i| (i as u64 * seed) % 5 + 1);
        let days = vec![(date(1), mk(3)), (date(2), mk(3)), (date(5), mk(4))];
        let vs = distance_series(&days, SeriesMode::VsRelease, &FragmentParams::default()).unwrap();
        assert_eq!(vs.points.len(), 2);
        let dd = distance_series(&days, SeriesMode::DayToDay, &FragmentParams::default()).unwrap();
        assert_eq!(dd.points.len(), 2);
        assert_eq!(dd.gaps, vec![(date(2), date(5))]);
        // Identical profiles every day -> all-zero series.
        let same = vec![(date(1), mk(3)), (date(2), mk(3)), (date(3), mk(3))];
        let s = distance_series(&same, SeriesMode::DayToDay, &FragmentParams::default()).unwrap();
        assert!(s.points.iter().all(|(_, d)| *d == 0.0));
    }

    #[test]
    fn distance_series_needs_two_usable_days() {
        let date = |d: u32| NaiveDate::from_ymd_opt(2026, 6, d).unwrap();
        let days = vec![
            (date(1), long_profile(1.0, |_| 1)),
            (date(2), long_profile(1.0, |_| 0)), // all-zero: skipped
        ];
        assert!(matches!(
            distance_series(&days, SeriesMode::VsRelease, &FragmentParams::default()),
            Err(Error::NotEnoughDays { usable: 1 })
        ));
    }

    #[test]
    fn aggregate_curve_end_zone_switch() {
        let mut p = profile_from_counts(vec![0, 0, 0, 0, 5, 5], 1.0, 10);
        p.track_duration_s = 6.0;
        let with = aggregate_curve(std::slice::from_ref(&p), TimeAxis::Absolute, true).unwrap();
        let without = aggregate_curve(std::slice::from_ref(&p), TimeAxis::Absolute, false).unwrap();
        assert!(with.skip_fraction[4] > 0.0 && with.skip_fraction[5] > 0.0);
        assert_eq!(without.skip_fraction[4], 0.0);
        assert_eq!(without.skip_fraction[5], 0.0);
    }

    #[test]
    fn profile_set_json_round_trip() {
        let events = [ev("a", 1.0, 10.0, false), ev("b", 3.0, 12.0, true)];
        let set =
            ingest_events(events.iter().cloned().map(Ok), 0.5, PartitionScheme::ByDate).unwrap();
        let text = set.to_json_pretty();
        let back = ProfileSet::from_json(&text).unwrap();
        assert_eq!(set, back);
        // Deterministic output: serializing twice gives identical bytes.
        assert_eq!(text, back.to_json_pretty());
    }

    proptest! {
        // Sharded ingestion + merge is a commutative monoid: any split of the
        // event stream merges back to the single-pass result, bit-exactly.
        #[test]
        fn ingestion_monoid(split in 1usize..99, swap in proptest::bool::ANY, seed in 0u64..1000) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let events: Vec<SkipEvent> = (0..100)
                .map(|_| {
                    let track = format!("t{}", rng.random_range(0..4u8));
                    let completed = rng.random_bool(0.2);
                    let stop = if completed { 20.0 } else { rng.random_range(0.0..20.0) };
                    ev(&track, stop, 20.0, completed)
                })
                .collect();
            let single = ingest_events(events.iter().cloned().map(Ok), 0.5, PartitionScheme::All).unwrap();
            let (lo, hi) = events.split_at(split);
            let (lo, hi) = if swap { (hi, lo) } else { (lo, hi) };
            let a = ingest_events(lo.iter().cloned().map(Ok), 0.5, PartitionScheme::All).unwrap();
            let b = ingest_events(hi.iter().cloned().map(Ok), 0.5, PartitionScheme::All).unwrap();
            let merged = merge_sets(&a, &b).unwrap();
            prop_assert_eq!(single, merged);
        }

        // merge is associative on random profiles (exact integer arithmetic).
        #[test]
        fn merge_associative(xs in proptest::collection::vec(0u64..50, 8),
                             ys in proptest::collection::vec(0u64..50, 8),
                             zs in proptest::collection::vec(0u64..50, 8)) {
            let a = profile_from_counts(xs, 1.0, 1);
            let b = profile_from_counts(ys, 1.0, 2);
            let c = profile_from_counts(zs, 1.0, 3);
            let left = merge(&merge(&a, &b).unwrap(), &c).unwrap();
            let right = merge(&a, &merge(&b, &c).unwrap()).unwrap();
            prop_assert_eq!(left, right);
        }

        // Survival curve is non-increasing and bounded in [0, 1].
        #[test]
        fn survival_monotone(xs in proptest::collection::vec(0u64..20, 1..40), comps in 1u64..10) {
            let p = profile_from_counts(xs, 0.5, comps);
            let s = survival_curve(&p).unwrap();
            for v in &s {
                prop_assert!(*v >= 0.0 && *v <= 1.0);
            }
            for w in s.windows(2) {
                prop_assert!(w[1] <= w[0]);
            }
        }

        // Euclidean fragment distance satisfies the metric axioms.
        #[test]
        fn fragment_metric_axioms(seed in 0u64..500) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut mk = |name: &str| {
                let p = long_profile(1.0, |_| 0);
                let mut q = p;
                q.track_id = name.into();
                for c in &mut q.counts {
                    *c = rng.random_range(0..30);
                }
                q.counts[70] += 1; // keep the slice nonzero
                q.total_skips = q.counts.iter().sum();
                fragment(&q, &FragmentParams::default()).unwrap()
            };
            let (x, y, z) = (mk("x"), mk("y"), mk("z"));
            let dxy = fragment_distance(&x, &y).unwrap();
            let dyx = fragment_distance(&y, &x).unwrap();
            let dxz = fragment_distance(&x, &z).unwrap();
            let dyz = fragment_distance(&y, &z).unwrap();
            prop_assert_eq!(dxy, dyx);
            prop_assert_eq!(fragment_distance(&x, &x).unwrap(), 0.0);
            prop_assert!(dxz <= dxy + dyz + 1e-12);
        }
    }
}
