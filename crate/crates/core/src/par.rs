//! Order-preserving parallel helpers. Results are collected by index, so
//! output is identical for any worker count.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// A single-worker pool only adds wake-up latency, so it is bypassed.
#[cfg(feature = "parallel")]
fn pooled() -> bool {
    rayon::current_num_threads() > 1
}

/// `(0..n).map(f)` evaluated on the worker pool when available.
pub(crate) fn map_indices<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if pooled() {
        return (0..n).into_par_iter().map(f).collect();
    }
    (0..n).map(f).collect()
}

/// Calls `f(i, chunk)` for every `chunk_len`-sized chunk of `data`.
pub(crate) fn for_each_chunk<T, F>(data: &mut [T], chunk_len: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    if chunk_len == 0 {
        return;
    }
    #[cfg(feature = "parallel")]
    if pooled() {
        data.par_chunks_mut(chunk_len)
            .enumerate()
            .for_each(|(i, c)| f(i, c));
        return;
    }
    data.chunks_mut(chunk_len)
        .enumerate()
        .for_each(|(i, c)| f(i, c));
}
