//! Deterministic data-parallel helpers.
//!
//! Work is split into fixed-size chunks whose boundaries depend only on the
//! problem size, each chunk is folded sequentially, and chunk results are
//! combined left to right. The result is therefore bit-identical whether the
//! chunks run on one thread or many.

use serde::{Deserialize, Serialize};

/// Items per chunk in [`map_reduce`].
pub const CHUNK: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// `Parallel` when the crate is built with the `parallel` feature.
    pub fn effective(self) -> Execution {
        if cfg!(feature = "parallel") {
            self
        } else {
            Execution::Sequential
        }
    }
}

/// Fold `0..n` chunk by chunk and merge the chunk accumulators in order.
pub fn map_reduce<A, E, F, M>(n: usize, exec: Execution, fold: F, merge: M) -> Result<A, E>
where
    A: Send + Default,
    E: Send,
    F: Fn(std::ops::Range<usize>) -> Result<A, E> + Sync + Send,
    M: Fn(A, A) -> A,
{
    let chunks = chunk_ranges(n);
    let parts = map_vec(&chunks, exec, |r| fold(r.clone()))?;
    Ok(parts.into_iter().fold(A::default(), merge))
}

/// Map `items` to a vector in input order.
pub fn map_vec<T, U, E, F>(items: &[T], exec: Execution, f: F) -> Result<Vec<U>, E>
where
    T: Sync,
    U: Send,
    E: Send,
    F: Fn(&T) -> Result<U, E> + Sync + Send,
{
    match exec.effective() {
        Execution::Sequential => items.iter().map(f).collect(),
        Execution::Parallel => par_map(items, f),
    }
}

#[cfg(feature = "parallel")]
fn par_map<T, U, E, F>(items: &[T], f: F) -> Result<Vec<U>, E>
where
    T: Sync,
    U: Send,
    E: Send,
    F: Fn(&T) -> Result<U, E> + Sync + Send,
{
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn par_map<T, U, E, F>(items: &[T], f: F) -> Result<Vec<U>, E>
where
    T: Sync,
    U: Send,
    E: Send,
    F: Fn(&T) -> Result<U, E> + Sync + Send,
{
    items.iter().map(f).collect()
}

fn chunk_ranges(n: usize) -> Vec<std::ops::Range<usize>> {
    (0..n.div_ceil(CHUNK))
        .map(|c| c * CHUNK..((c + 1) * CHUNK).min(n))
        .collect()
}

/// Configure the global rayon pool. `0` keeps the default thread count.
#[cfg(feature = "parallel")]
pub fn init_threads(n: usize) -> bool {
    n == 0 || rayon::ThreadPoolBuilder::new().num_threads(n).build_global().is_ok()
}

#[cfg(not(feature = "parallel"))]
pub fn init_threads(_n: usize) -> bool {
    true
}

/// Worker threads available to parallel sections.
#[cfg(feature = "parallel")]
pub fn thread_count() -> usize {
    rayon::current_num_threads()
}

#[cfg(not(feature = "parallel"))]
pub fn thread_count() -> usize {
    1
}
