//! Parallel abstraction layer.
//!
//! All heavy inner loops go through [`map_collect`] (or its indexed
//! variant), which evaluates a pure function over a range and returns the
//! results *in index order*. Reductions are then performed sequentially by
//! the caller, so every public result of the crate is bitwise independent
//! of the number of worker threads. With the `parallel` feature disabled
//! the same entry points run on the calling thread.

/// Evaluate `f` over `0..len`, preserving order.
#[cfg(feature = "parallel")]
pub fn map_collect<R, F>(len: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    use rayon::prelude::*;
    (0..len).into_par_iter().map(f).collect()
}

/// Evaluate `f` over `0..len`, preserving order (sequential build).
#[cfg(not(feature = "parallel"))]
pub fn map_collect<R, F>(len: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    (0..len).map(f).collect()
}

/// Run `f` inside a dedicated thread pool of the given size.
///
/// `threads == 0` means "use the default pool". Without the `parallel`
/// feature the closure simply runs on the calling thread and the requested
/// size is ignored — results are identical either way because all
/// reductions are order-fixed.
#[cfg(feature = "parallel")]
pub fn run_with_threads<R, F>(threads: usize, f: F) -> R
where
    R: Send,
    F: FnOnce() -> R + Send,
{
    if threads == 0 {
        return f();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .expect("building a local thread pool cannot fail with a positive size");
    pool.install(f)
}

#[cfg(not(feature = "parallel"))]
pub fn run_with_threads<R, F>(_threads: usize, f: F) -> R
where
    R: Send,
    F: FnOnce() -> R + Send,
{
    f()
}

/// Max of a slice of reals folded in index order. Empty slices fold to
/// `f64::NEG_INFINITY`.
pub fn fold_max(values: &[f64]) -> f64 {
    values.iter().fold(f64::NEG_INFINITY, |acc, &v| acc.max(v))
}

/// Sum of a slice of reals folded in index order.
pub fn fold_sum(values: &[f64]) -> f64 {
    values.iter().fold(0.0, |acc, &v| acc + v)
}
