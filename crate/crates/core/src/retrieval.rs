//! Retrieval-style specificity evaluation: rank profile fragments by
//! distance, score with Average Precision, and compare against a shuffled
//! random baseline.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::{self, ExecMode};
use crate::profiles::{fragment_distance, PartitionKey, ProfileFragment};

/// Mean over relevant positions k of (relevant in top-k) / k.
pub fn average_precision(relevance: &[bool]) -> Result<f64> {
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, &rel) in relevance.iter().enumerate() {
        if rel {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    if hits == 0 {
        return Err(Error::NoRelevantItems);
    }
    Ok(sum / hits as f64)
}

/// AP from the sorted 1-based ranks of the relevant items.
fn ap_from_ranks(sorted_ranks: &[usize]) -> f64 {
    let r = sorted_ranks.len() as f64;
    sorted_ranks
        .iter()
        .enumerate()
        .map(|(k, &rank)| (k + 1) as f64 / rank as f64)
        .sum::<f64>()
        / r
}

/// One query's ranked candidates.
#[derive(Debug, Clone)]
pub struct RankedResult {
    pub query_track: String,
    pub query_partition: PartitionKey,
    /// (candidate index into the fragment slice, distance), sorted by
    /// non-decreasing distance; the query itself is excluded.
    pub ranking: Vec<(usize, f64)>,
    /// Relevance flag per ranked candidate (same track, other partition).
    pub relevance: Vec<bool>,
}

#[derive(Debug, Clone, Serialize)]
pub struct QueryAp {
    pub track: String,
    pub partition: String,
    pub ap: f64,
    pub n_relevant: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct MapReport {
    pub map: f64,
    pub n_queries: usize,
    pub per_query: Vec<QueryAp>,
    /// Distances between fragments of the same track (each unordered pair once).
    pub same_pair_distances: Vec<f64>,
    /// Distances between fragments of different tracks.
    pub diff_pair_distances: Vec<f64>,
    /// Tracks with a single partition, skipped as queries.
    pub skipped_tracks: Vec<String>,
}

/// Rank every fragment against all others and report MAP plus the same/
/// different-track distance distributions.
pub fn specificity_map(fragments: &[ProfileFragment]) -> Result<MapReport> {
    specificity_map_mode(fragments, ExecMode::default())
}

pub fn specificity_map_mode(
    fragments: &[ProfileFragment],
    mode: ExecMode,
) -> Result<MapReport> {
    let n = fragments.len();
    let mut tracks: Vec<&str> = fragments.iter().map(|f| f.track_id.as_str()).collect();
    tracks.sort_unstable();
    tracks.dedup();
    if tracks.len() < 2 {
        return Err(Error::InvalidConfig {
            reason: "specificity needs fragments from at least 2 tracks".into(),
        });
    }
    let count_for = |track: &str| fragments.iter().filter(|f| f.track_id == track).count();
    let mut skipped_tracks: Vec<String> = tracks
        .iter()
        .filter(|t| count_for(t) < 2)
        .map(|t| t.to_string())
        .collect();
    skipped_tracks.dedup();
    if tracks.len() - skipped_tracks.len() == 0 {
        return Err(Error::InvalidConfig {
            reason: "no track has fragments from 2 or more partitions".into(),
        });
    }

    // Full pairwise distance matrix, computed once, rows in parallel.
    let rows = exec::map_indexed(mode, n, |i| {
        let mut row = vec![0.0f64; n];
        for j in 0..n {
            if j != i {
                row[j] = fragment_distance(&fragments[i], &fragments[j])
                    .expect("fragments have equal dimensions");
            }
        }
        row
    });

    let queryable: Vec<usize> = (0..n)
        .filter(|&i| !skipped_tracks.iter().any(|t| *t == fragments[i].track_id))
        .collect();

    let per_query: Vec<QueryAp> = exec::map_slice(mode, &queryable, |&qi| {
        let ranked = rank_query(fragments, &rows[qi], qi);
        let ap = average_precision(&ranked.relevance).expect("query has a relevant candidate");
        QueryAp {
            track: fragments[qi].track_id.clone(),
            partition: fragments[qi].partition.label(),
            ap,
            n_relevant: ranked.relevance.iter().filter(|&&r| r).count(),
        }
    });

    let mut same = Vec::new();
    let mut diff = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if fragments[i].track_id == fragments[j].track_id {
                same.push(rows[i][j]);
            } else {
                diff.push(rows[i][j]);
            }
        }
    }

    let map = per_query.iter().map(|q| q.ap).sum::<f64>() / per_query.len() as f64;
    Ok(MapReport {
        map,
        n_queries: per_query.len(),
        per_query,
        same_pair_distances: same,
        diff_pair_distances: diff,
        skipped_tracks,
    })
}

/// Sort candidates for one query by distance, breaking ties by candidate id
/// so results do not depend on input order.
pub fn rank_query(fragments: &[ProfileFragment], distances: &[f64], query: usize) -> RankedResult {
    let mut ranking: Vec<(usize, f64)> = (0..fragments.len())
        .filter(|&j| j != query)
        .map(|j| (j, distances[j]))
        .collect();
    ranking.sort_by(|&(a, da), &(b, db)| {
        da.total_cmp(&db)
            .then_with(|| fragments[a].track_id.cmp(&fragments[b].track_id))
            .then_with(|| {
                fragments[a]
                    .partition
                    .label()
                    .cmp(&fragments[b].partition.label())
            })
    });
    let relevance = ranking
        .iter()
        .map(|&(j, _)| fragments[j].track_id == fragments[query].track_id)
        .collect();
    RankedResult {
        query_track: fragments[query].track_id.clone(),
        query_partition: fragments[query].partition.clone(),
        ranking,
        relevance,
    }
}

/// Expected MAP of uniformly shuffled rankings for a corpus described by its
/// per-track partition counts. Monte-Carlo over `trials`, deterministic in
/// `seed`.
pub fn random_baseline_map(corpus_shape: &[usize], trials: usize, seed: u64) -> Result<f64> {
    if trials == 0 {
        return Err(Error::InvalidConfig {
            reason: "trials must be at least 1".into(),
        });
    }
    let total: usize = corpus_shape.iter().sum();
    // Each partition of a multi-partition track is one query.
    let queries: Vec<(usize, usize)> = corpus_shape
        .iter()
        .filter(|&&c| c >= 2)
        .flat_map(|&c| std::iter::repeat((total - 1, c - 1)).take(c))
        .collect();
    if queries.is_empty() {
        return Err(Error::InvalidConfig {
            reason: "corpus shape has no track with 2 or more partitions".into(),
        });
    }
    let trial_means = exec::map_indexed(ExecMode::default(), trials, |trial| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(trial as u64 + 1);
        let mut sum = 0.0;
        for &(m, r) in &queries {
            sum += ap_from_ranks(&sample_ranks(&mut rng, m, r));
        }
        sum / queries.len() as f64
    });
    Ok(trial_means.iter().sum::<f64>() / trials as f64)
}

/// Sample `r` distinct ranks uniformly from 1..=m, sorted ascending.
fn sample_ranks(rng: &mut ChaCha8Rng, m: usize, r: usize) -> Vec<usize> {
    debug_assert!(r <= m);
    let mut picked = std::collections::BTreeSet::new();
    while picked.len() < r {
        picked.insert(rng.random_range(1..=m));
    }
    picked.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ap_hand_values() {
        assert_eq!(average_precision(&[true, false, false]).unwrap(), 1.0);
        assert_eq!(average_precision(&[false, true]).unwrap(), 0.5);
        let v = average_precision(&[true, false, true, false]).unwrap();
        assert!((v - (1.0 + 2.0 / 3.0) / 2.0).abs() < 1e-15);
        assert!(average_precision(&[false, false]).is_err());
    }

    #[test]
    fn ap_trailing_non_relevant_is_neutral() {
        let a = average_precision(&[true]).unwrap();
        let b = average_precision(&[true, false, false, false, false]).unwrap();
        assert_eq!(a, b);
    }

    /// Exhaustive oracle: mean AP over every placement of `r` relevant items
    /// among `m` candidates.
    fn enumerated_expected_ap(m: usize, r: usize) -> f64 {
        fn combos(m: usize, r: usize) -> Vec<Vec<usize>> {
            if r == 0 {
                return vec![vec![]];
            }
            let mut out = Vec::new();
            for first in 1..=m.saturating_sub(r - 1) {
                for rest in combos_from(first + 1, m, r - 1) {
                    let mut v = vec![first];
                    v.extend(rest);
                    out.push(v);
                }
            }
            out
        }
        fn combos_from(lo: usize, m: usize, r: usize) -> Vec<Vec<usize>> {
            if r == 0 {
                return vec![vec![]];
            }
            let mut out = Vec::new();
            for first in lo..=m.saturating_sub(r - 1) {
                for rest in combos_from(first + 1, m, r - 1) {
                    let mut v = vec![first];
                    v.extend(rest);
                    out.push(v);
                }
            }
            out
        }
        let all = combos(m, r);
        let sum: f64 = all.iter().map(|ranks| ap_from_ranks(ranks)).sum();
        sum / all.len() as f64
    }

    #[test]
    fn ap_matches_boolean_form() {
        // ap_from_ranks and average_precision agree on every list up to 6.
        for m in 1..=6usize {
            for mask in 1u32..(1 << m) {
                let rel: Vec<bool> = (0..m).map(|i| mask & (1 << i) != 0).collect();
                let ranks: Vec<usize> = rel
                    .iter()
                    .enumerate()
                    .filter(|(_, &r)| r)
                    .map(|(i, _)| i + 1)
                    .collect();
                let a = average_precision(&rel).unwrap();
                let b = ap_from_ranks(&ranks);
                assert!((a - b).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn random_baseline_single_relevant_matches_harmonic() {
        // With 1 relevant among n, expected AP is H(n)/n; check enumeration
        // and the Monte-Carlo estimate against it.
        for n in 2..=6usize {
            let h: f64 = (1..=n).map(|k| 1.0 / k as f64).sum();
            let expect = h / n as f64;
            let enumerated = enumerated_expected_ap(n, 1);
            assert!((enumerated - expect).abs() < 1e-12);
        }
        // Corpus: 1 track with 2 partitions + 2 single-partition tracks
        // -> each query has 3 candidates, 1 relevant.
        let est = random_baseline_map(&[2, 1, 1], 40_000, 7).unwrap();
        let expect = (1.0 + 0.5 + 1.0 / 3.0) / 3.0;
        assert!((est - expect).abs() < 0.01, "{est} vs {expect}");
    }

    #[test]
    fn random_baseline_two_by_two_corpus() {
        let est = random_baseline_map(&[2, 2], 50_000, 3).unwrap();
        let expect = enumerated_expected_ap(3, 1);
        assert!((expect - 11.0 / 18.0).abs() < 1e-12);
        assert!((est - expect).abs() < 0.01, "{est} vs {expect}");
    }

    #[test]
    fn random_baseline_deterministic_and_validated() {
        let a = random_baseline_map(&[3, 3, 2], 500, 42).unwrap();
        let b = random_baseline_map(&[3, 3, 2], 500, 42).unwrap();
        assert_eq!(a, b);
        assert!(random_baseline_map(&[2, 2], 0, 1).is_err());
        assert!(random_baseline_map(&[1, 1], 10, 1).is_err());
    }

    fn frag(track: &str, part: &str, values: Vec<f64>) -> ProfileFragment {
        ProfileFragment {
            track_id: track.into(),
            partition: PartitionKey::Region(part.into()),
            values,
        }
    }

    fn orthogonal_corpus() -> Vec<ProfileFragment> {
        // Same-track copies identical, cross-track orthogonal.
        let mut e = |k: usize| {
            let mut v = vec![0.0; 4];
            v[k] = 1.0;
            v
        };
        vec![
            frag("a", "p1", e(0)),
            frag("a", "p2", e(0)),
            frag("b", "p1", e(1)),
            frag("b", "p2", e(1)),
            frag("c", "p1", e(2)),
            frag("c", "p2", e(2)),
        ]
    }

    #[test]
    fn specificity_perfect_corpus_is_map_one() {
        let report = specificity_map(&orthogonal_corpus()).unwrap();
        assert_eq!(report.map, 1.0);
        assert_eq!(report.n_queries, 6);
        assert!(report.skipped_tracks.is_empty());
        assert_eq!(report.same_pair_distances.len(), 3);
        assert_eq!(report.diff_pair_distances.len(), 12);
        assert!(report.same_pair_distances.iter().all(|&d| d == 0.0));
    }

    #[test]
    fn specificity_skips_single_partition_tracks() {
        let mut corpus = orthogonal_corpus();
        corpus.push(frag("lonely", "p1", vec![0.0, 0.0, 0.0, 1.0]));
        let report = specificity_map(&corpus).unwrap();
        assert_eq!(report.skipped_tracks, vec!["lonely".to_string()]);
        assert_eq!(report.n_queries, 6);
    }

    #[test]
    fn specificity_requires_two_tracks() {
        let corpus = vec![
            frag("a", "p1", vec![1.0, 0.0]),
            frag("a", "p2", vec![1.0, 0.0]),
        ];
        assert!(specificity_map(&corpus).is_err());
    }

    #[test]
    fn specificity_invariant_under_monotone_distance_transform() {
        // Ranking by squared distance (a monotone transform) must give the
        // same per-query APs; checked with an independent oracle.
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        let mut corpus = Vec::new();
        for t in 0..4 {
            for p in 0..3 {
                let v: Vec<f64> = (0..6).map(|_| rng.random_range(0.0..1.0)).collect();
                corpus.push(frag(&format!("t{t}"), &format!("p{p}"), v));
            }
        }
        let report = specificity_map(&corpus).unwrap();
        for (qi, q) in report.per_query.iter().enumerate() {
            let query = &corpus[qi];
            assert_eq!(q.track, query.track_id);
            let mut cands: Vec<(usize, f64)> = corpus
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != qi)
                .map(|(j, c)| {
                    let sq: f64 = query
                        .values
                        .iter()
                        .zip(&c.values)
                        .map(|(x, y)| (x - y) * (x - y))
                        .sum();
                    (j, sq)
                })
                .collect();
            cands.sort_by(|&(a, da), &(b, db)| {
                da.total_cmp(&db)
                    .then_with(|| corpus[a].track_id.cmp(&corpus[b].track_id))
                    .then_with(|| corpus[a].partition.label().cmp(&corpus[b].partition.label()))
            });
            let rel: Vec<bool> = cands
                .iter()
                .map(|&(j, _)| corpus[j].track_id == query.track_id)
                .collect();
            let oracle_ap = average_precision(&rel).unwrap();
            assert!((q.ap - oracle_ap).abs() < 1e-15);
        }
    }

    #[cfg(feature = "parallel")]
    #[test]
    fn specificity_parallel_matches_sequential() {
        let corpus = orthogonal_corpus();
        let seq = specificity_map_mode(&corpus, ExecMode::Sequential).unwrap();
        let par = specificity_map_mode(&corpus, ExecMode::Parallel).unwrap();
        assert_eq!(seq.map, par.map);
        assert_eq!(seq.same_pair_distances, par.same_pair_distances);
    }
}
