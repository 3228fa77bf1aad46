//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature (on by default) these dispatch to rayon;
//! without it they run on the calling thread. Every helper returns results
//! in input order and reduces in a fixed order, so switching the feature
//! never changes a numeric result.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Number of worker threads the helpers may use.
pub fn num_threads() -> usize {
    #[cfg(feature = "parallel")]
    return rayon::current_num_threads();

    #[cfg(not(feature = "parallel"))]
    return 1;
}

// A single-thread pool only adds hand-off cost.
#[cfg(feature = "parallel")]
fn worth_splitting(n: usize) -> bool {
    n > 1 && rayon::current_num_threads() > 1
}

/// Maps `f` over `items`, preserving order.
pub fn map_collect<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Send + Sync,
{
    #[cfg(feature = "parallel")]
    if worth_splitting(items.len()) {
        return items.par_iter().map(f).collect();
    }

    items.iter().map(f).collect()
}

/// Maps `f` over `0..n`, preserving order.
pub fn map_range<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Send + Sync,
{
    #[cfg(feature = "parallel")]
    if worth_splitting(n) {
        return (0..n).into_par_iter().map(f).collect();
    }

    (0..n).map(f).collect()
}

/// Evaluates `f` on each index of `0..n` and sums the partial results
/// in index order with compensated summation.
pub fn sum_range<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Send + Sync,
{
    let parts = map_range(n, f);
    crate::numeric::compensated_sum(parts)
}
