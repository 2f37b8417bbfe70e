//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature (default) independent work items run on the
//! rayon pool; without it, or with [`Exec::Sequential`], they run in order on
//! the calling thread. Results are always returned in index order, so any
//! reduction done afterwards is independent of the thread count.

use crate::specmat::{split_seed, RngHandle};
use crate::stats::Moments;

/// Execution strategy for index-parallel maps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Exec {
    Sequential,
    /// Uses rayon when compiled with the `parallel` feature, otherwise falls
    /// back to sequential execution.
    #[default]
    Parallel,
}

impl Exec {
    pub fn is_parallel_available() -> bool {
        cfg!(feature = "parallel")
    }
}

/// Evaluates `f(0..n)` and returns the results in index order.
pub fn map_indexed<T, F>(exec: Exec, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match exec {
        Exec::Sequential => (0..n).map(f).collect(),
        Exec::Parallel => par_map(n, f),
    }
}

/// Fallible variant of [`map_indexed`]; the error of the lowest failing index
/// wins.
pub fn try_map_indexed<T, E, F>(exec: Exec, n: usize, f: F) -> Result<Vec<T>, E>
where
    T: Send,
    E: Send,
    F: Fn(usize) -> Result<T, E> + Sync + Send,
{
    map_indexed(exec, n, f).into_iter().collect()
}

#[cfg(feature = "parallel")]
fn par_map<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn par_map<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).map(f).collect()
}

/// Samples per Monte Carlo work item.
pub const MC_CHUNK: usize = 2048;

/// Monte Carlo moments of `k` statistics over `samples` draws.
///
/// Draws are split into chunks of [`MC_CHUNK`]; chunk `c` owns the stream
/// `split_seed(seed, c)`. Chunk moments are merged in chunk order, so the
/// result is bit-identical for any thread count and either [`Exec`] mode.
pub fn mc_moments<F>(exec: Exec, samples: usize, seed: u64, k: usize, draw: F) -> Vec<Moments>
where
    F: Fn(&mut RngHandle, &mut [f64]) + Sync + Send,
{
    let chunks = samples.div_ceil(MC_CHUNK);
    let per_chunk = map_indexed(exec, chunks, |c| {
        let mut rng = RngHandle::new(split_seed(seed, c as u64));
        let mut acc = vec![Moments::default(); k];
        let mut buf = vec![0.0; k];
        let len = MC_CHUNK.min(samples - c * MC_CHUNK);
        for _ in 0..len {
            draw(&mut rng, &mut buf);
            for (m, &v) in acc.iter_mut().zip(&buf) {
                m.push(v);
            }
        }
        acc
    });
    per_chunk
        .iter()
        .fold(vec![Moments::default(); k], |total, chunk| total.iter().zip(chunk).map(|(a, b)| a.merge(b)).collect())
}

/// Sets the size of the global worker pool. Returns false when the pool was
/// already initialised or parallelism is compiled out.
pub fn configure_threads(threads: usize) -> bool {
    #[cfg(feature = "parallel")]
    {
        rayon::ThreadPoolBuilder::new().num_threads(threads).build_global().is_ok()
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        false
    }
}
