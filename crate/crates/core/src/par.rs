//! Thin data-parallel layer. With the `parallel` feature the loops run on the
//! rayon pool, otherwise they run sequentially. Every reduction is either an
//! exact max or an ordered sequential fold over collected results, so outputs
//! do not depend on the worker count.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Maps `f` over `0..n` and collects the results in index order.
pub fn map_range<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Maps `f` over a slice and collects the results in order.
pub fn map_slice<S, T, F>(items: &[S], f: F) -> Vec<T>
where
    S: Sync,
    T: Send,
    F: Fn(&S) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

/// Max of `f(i)` over `0..n`, or `init` when the range is empty. `f` must not
/// return NaN.
pub fn max_range<F>(n: usize, init: f64, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).reduce(|| init, f64::max)
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).fold(init, f64::max)
    }
}

/// Min of `f(i)` over `0..n`, or `init` when the range is empty.
pub fn min_range<F>(n: usize, init: f64, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).reduce(|| init, f64::min)
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).fold(init, f64::min)
    }
}

/// Elementwise max-merge of per-index bucket vectors produced by `f(i)`.
pub fn max_buckets<F>(n: usize, width: usize, f: F) -> Vec<f64>
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    let merge = |mut a: Vec<f64>, b: Vec<f64>| {
        for (x, y) in a.iter_mut().zip(b) {
            if y > *x {
                *x = y;
            }
        }
        a
    };
    #[cfg(feature = "parallel")]
    {
        (0..n)
            .into_par_iter()
            .fold(
                || vec![0.0; width],
                |mut acc, i| {
                    f(i, &mut acc);
                    acc
                },
            )
            .reduce(|| vec![0.0; width], merge)
    }
    #[cfg(not(feature = "parallel"))]
    {
        let mut acc = vec![0.0; width];
        for i in 0..n {
            f(i, &mut acc);
        }
        let _ = merge;
        acc
    }
}

/// Folds `0..n` into per-worker accumulators and combines them with
/// `reduce`. Only use with an associative, commutative `reduce` whose result
/// does not depend on grouping.
pub fn fold_reduce<T, I, F, R>(n: usize, identity: I, fold: F, reduce: R) -> T
where
    T: Send,
    I: Fn() -> T + Sync + Send,
    F: Fn(T, usize) -> T + Sync + Send,
    R: Fn(T, T) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n)
            .into_par_iter()
            .fold(&identity, &fold)
            .reduce(&identity, &reduce)
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = &reduce;
        (0..n).fold(identity(), fold)
    }
}

/// True when the crate was built with the rayon backend.
pub const fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}
