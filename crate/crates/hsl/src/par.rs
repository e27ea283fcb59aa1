//! Deterministic parallel reductions.
//!
//! Work is split into fixed-size chunks whose boundaries do not depend on the
//! number of workers, and partial results are combined by a fixed pairwise
//! tree, so floating-point sums are bit-identical for any pool size.

use rayon::prelude::*;

pub const CHUNK: usize = 256;

/// Pairwise-tree sum in a fixed order.
pub fn tree_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        n => {
            let mid = n / 2;
            tree_sum(&xs[..mid]) + tree_sum(&xs[mid..])
        }
    }
}

/// Maps every item in parallel and returns the results in input order.
pub fn map_ordered<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    items
        .par_chunks(CHUNK)
        .map(|chunk| chunk.iter().map(&f).collect::<Vec<_>>())
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect()
}

/// Sum of `f` over `items`, bit-stable across worker counts.
pub fn sum_by<T, F>(items: &[T], f: F) -> f64
where
    T: Sync,
    F: Fn(&T) -> f64 + Sync + Send,
{
    let partials: Vec<f64> = items
        .par_chunks(CHUNK)
        .map(|chunk| tree_sum(&chunk.iter().map(&f).collect::<Vec<_>>()))
        .collect();
    tree_sum(&partials)
}

/// Runs `op` inside a pool of `workers` threads (`0` means the global pool).
pub fn with_workers<R: Send>(workers: usize, op: impl FnOnce() -> R + Send) -> R {
    if workers == 0 {
        return op();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(pool) => pool.install(op),
        Err(_) => op(),
    }
}
