//! Execution strategy for embarrassingly parallel workloads (sweep grids,
//! regression anchors).
//!
//! With the default `parallel` feature the mapping functions fan out over
//! a rayon pool; without it they degrade to plain sequential iteration.
//! [`map_collect_seq`] is always sequential, so the two strategies can be
//! compared directly (the bench suite does exactly that). Results are
//! ordered by input index either way, so sweep output is deterministic
//! regardless of scheduling.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Map `f` over `items`, preserving input order in the output.
#[cfg(feature = "parallel")]
pub fn map_collect<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    items.par_iter().map(f).collect()
}

/// Map `f` over `items`, preserving input order in the output.
#[cfg(not(feature = "parallel"))]
pub fn map_collect<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    F: Fn(&T) -> U,
{
    items.iter().map(f).collect()
}

/// Sequential reference implementation of [`map_collect`].
pub fn map_collect_seq<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    F: Fn(&T) -> U,
{
    items.iter().map(f).collect()
}

/// Bound the worker pool to `jobs` threads. Returns false if the pool was
/// already initialized (rayon allows one global configuration) or when the
/// crate is built without the `parallel` feature.
#[cfg(feature = "parallel")]
pub fn configure_threads(jobs: usize) -> bool {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build_global()
        .is_ok()
}

/// Bound the worker pool to `jobs` threads (no-op without `parallel`).
#[cfg(not(feature = "parallel"))]
pub fn configure_threads(_jobs: usize) -> bool {
    false
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_and_sequential_agree() {
        let items: Vec<u64> = (0..500).collect();
        let f = |x: &u64| x * x + 1;
        assert_eq!(map_collect(&items, f), map_collect_seq(&items, f));
    }
}
