//! Execution strategy for data-parallel inner loops.
//!
//! Every parallel loop in this crate funnels through the helpers here. With
//! the `parallel` feature (default) they run on the rayon global pool; without
//! it they degrade to plain iterators. The sequential versions are always
//! available so the two strategies can be compared directly, and all callers
//! are written so both modes produce bit-identical results: work is split into
//! fixed-size chunks and chunk results are combined in index order, never in
//! thread-completion order.

/// How to run a data-parallel loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExecMode {
    Sequential,
    #[cfg(feature = "parallel")]
    Parallel,
}

/// Cap the global worker pool. Call once, before any parallel work runs.
#[cfg(feature = "parallel")]
pub fn configure_threads(n: usize) -> Result<(), String> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

impl Default for ExecMode {
    #[cfg(feature = "parallel")]
    fn default() -> Self {
        ExecMode::Parallel
    }
    #[cfg(not(feature = "parallel"))]
    fn default() -> Self {
        ExecMode::Sequential
    }
}

/// Map `f` over `items`, preserving input order in the output.
pub fn map_slice<T, R, F>(mode: ExecMode, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    match mode {
        ExecMode::Sequential => items.iter().map(f).collect(),
        #[cfg(feature = "parallel")]
        ExecMode::Parallel => {
            use rayon::prelude::*;
            items.par_iter().map(f).collect()
        }
    }
}

/// Map `f` over `0..n`, preserving index order in the output.
pub fn map_indexed<R, F>(mode: ExecMode, n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    match mode {
        ExecMode::Sequential => (0..n).map(f).collect(),
        #[cfg(feature = "parallel")]
        ExecMode::Parallel => {
            use rayon::prelude::*;
            (0..n).into_par_iter().map(f).collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_slice_preserves_order() {
        let items: Vec<u64> = (0..1000).collect();
        let seq = map_slice(ExecMode::Sequential, &items, |x| x * 3);
        assert_eq!(seq, items.iter().map(|x| x * 3).collect::<Vec<_>>());
        #[cfg(feature = "parallel")]
        {
            let par = map_slice(ExecMode::Parallel, &items, |x| x * 3);
            assert_eq!(seq, par);
        }
    }

    #[test]
    fn map_indexed_matches_range() {
        let seq = map_indexed(ExecMode::Sequential, 64, |i| i as f64 * 0.5);
        assert_eq!(seq.len(), 64);
        #[cfg(feature = "parallel")]
        {
            let par = map_indexed(ExecMode::Parallel, 64, |i| i as f64 * 0.5);
            assert_eq!(seq, par);
        }
    }
}
