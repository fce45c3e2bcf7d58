//! Execution strategy for data-parallel loops.
//!
//! Every reduction splits its input into fixed-size chunks, sums each chunk
//! with a pairwise tree and then combines the chunk sums with the same tree.
//! The chunk boundaries never depend on the worker count, so sequential and
//! parallel runs produce bit-identical floating-point results.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Elements per reduction chunk.
pub const CHUNK: usize = 4096;

const PAIRWISE_BASE: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    #[default]
    Sequential,
    /// Run on a dedicated pool; `0` means rayon's default thread count.
    Parallel { workers: usize },
}

impl Execution {
    /// `n <= 1` selects the sequential path.
    pub fn with_workers(n: usize) -> Self {
        if n <= 1 {
            Execution::Sequential
        } else {
            Execution::Parallel { workers: n }
        }
    }

    pub fn is_parallel(&self) -> bool {
        cfg!(feature = "parallel") && matches!(self, Execution::Parallel { .. })
    }

    /// Run `f` inside a pool sized for this strategy.
    pub fn install<R: Send>(&self, f: impl FnOnce() -> R + Send) -> R {
        #[cfg(feature = "parallel")]
        if let Execution::Parallel { workers } = *self {
            let mut builder = rayon::ThreadPoolBuilder::new();
            if workers > 0 {
                builder = builder.num_threads(workers);
            }
            if let Ok(pool) = builder.build() {
                return pool.install(f);
            }
            log::warn!("could not build a {workers}-thread pool; using the global pool");
        }
        f()
    }

    /// Order-preserving map over a slice.
    pub fn map<T, U, F>(&self, items: &[T], f: F) -> Vec<U>
    where
        T: Sync,
        U: Send,
        F: Fn(&T) -> U + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            return items.par_iter().map(f).collect();
        }
        items.iter().map(f).collect()
    }

    /// Order-preserving map over `0..n`.
    pub fn map_range<U, F>(&self, n: usize, f: F) -> Vec<U>
    where
        U: Send,
        F: Fn(usize) -> U + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            return (0..n).into_par_iter().map(f).collect();
        }
        (0..n).map(f).collect()
    }

    /// Deterministic sum of `f(item)` over a slice.
    pub fn sum_by<T, F>(&self, items: &[T], f: F) -> f64
    where
        T: Sync,
        F: Fn(&T) -> f64 + Sync + Send,
    {
        let chunk_sum = |chunk: &[T]| {
            let values: Vec<f64> = chunk.iter().map(&f).collect();
            pairwise_sum(&values)
        };
        let partials: Vec<f64> = {
            #[cfg(feature = "parallel")]
            {
                if self.is_parallel() {
                    items.par_chunks(CHUNK).map(chunk_sum).collect()
                } else {
                    items.chunks(CHUNK).map(chunk_sum).collect()
                }
            }
            #[cfg(not(feature = "parallel"))]
            {
                items.chunks(CHUNK).map(chunk_sum).collect()
            }
        };
        pairwise_sum(&partials)
    }

    pub fn sum(&self, values: &[f64]) -> f64 {
        self.sum_by(values, |v| *v)
    }

    /// Sort in place; the result is the same for either strategy.
    pub fn sort_unstable<T: Ord + Send>(&self, items: &mut [T]) {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            items.par_sort_unstable();
            return;
        }
        items.sort_unstable();
    }
}

/// Pairwise (cascade) summation.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= PAIRWISE_BASE {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}
