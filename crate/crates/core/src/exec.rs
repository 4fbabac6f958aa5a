//! Data-parallel helpers.
//!
//! Every sweep, sampling check and pairwise diagnostic in the crate goes
//! through these helpers. With the `parallel` feature (default) they fan out
//! on the rayon pool; without it, or with [`Execution::Sequential`], they run
//! as plain iterators. Results are always returned in input order.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// Whether work actually runs on the thread pool.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

/// Order-preserving map over a slice.
pub fn map<T, R, F>(mode: Execution, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if mode.is_parallel() {
        return items.par_iter().map(f).collect();
    }
    let _ = mode;
    items.iter().map(f).collect()
}

/// Order-preserving map over `0..n`.
pub fn map_range<R, F>(mode: Execution, n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if mode.is_parallel() {
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = mode;
    (0..n).map(f).collect()
}

/// Maximum of `f(i)` over `0..n`; `f64::NEG_INFINITY` when `n == 0`.
pub fn max_range<F>(mode: Execution, n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if mode.is_parallel() {
        return (0..n)
            .into_par_iter()
            .map(f)
            .reduce(|| f64::NEG_INFINITY, f64::max);
    }
    let _ = mode;
    (0..n).map(f).fold(f64::NEG_INFINITY, f64::max)
}

/// Runs two closures, concurrently when the pool is available.
pub fn join<A, B, RA, RB>(mode: Execution, a: A, b: B) -> (RA, RB)
where
    A: FnOnce() -> RA + Send,
    B: FnOnce() -> RB + Send,
    RA: Send,
    RB: Send,
{
    #[cfg(feature = "parallel")]
    if mode.is_parallel() {
        return rayon::join(a, b);
    }
    let _ = mode;
    (a(), b())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_agree_and_keep_order() {
        let xs: Vec<f64> = (0..1000).map(|i| i as f64 * 0.5).collect();
        let seq = map(Execution::Sequential, &xs, |x| x.sin());
        let par = map(Execution::Parallel, &xs, |x| x.sin());
        assert_eq!(seq, par);
        let m1 = max_range(Execution::Sequential, xs.len(), |i| xs[i].cos());
        let m2 = max_range(Execution::Parallel, xs.len(), |i| xs[i].cos());
        assert_eq!(m1, m2);
        assert_eq!(max_range(Execution::Parallel, 0, |_| 1.0), f64::NEG_INFINITY);
    }
}
