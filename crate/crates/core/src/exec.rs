//! Execution mode for the data-parallel loops.
//!
//! Hot loops take an [`ExecMode`] so both paths can live in one binary and be
//! benchmarked against each other. Without the `parallel` feature every mode
//! runs sequentially.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExecMode {
    Sequential,
    Parallel,
}

impl Default for ExecMode {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            ExecMode::Parallel
        } else {
            ExecMode::Sequential
        }
    }
}

/// `(0..n).map(f).collect()`, possibly in parallel. Output order is preserved.
pub fn map_range<T, F>(mode: ExecMode, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match mode {
        #[cfg(feature = "parallel")]
        ExecMode::Parallel => (0..n).into_par_iter().map(f).collect(),
        _ => (0..n).map(f).collect(),
    }
}

/// Calls `f(i, &mut out[i])` for every element.
pub fn for_each_indexed<T, F>(mode: ExecMode, out: &mut [T], f: F)
where
    T: Send,
    F: Fn(usize, &mut T) + Sync + Send,
{
    match mode {
        #[cfg(feature = "parallel")]
        ExecMode::Parallel => out.par_iter_mut().enumerate().for_each(|(i, o)| f(i, o)),
        _ => out.iter_mut().enumerate().for_each(|(i, o)| f(i, o)),
    }
}

/// Calls `f(k, chunk)` for consecutive chunks of `chunk_len` elements.
pub fn for_each_chunk<T, F>(mode: ExecMode, out: &mut [T], chunk_len: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    match mode {
        #[cfg(feature = "parallel")]
        ExecMode::Parallel => out.par_chunks_mut(chunk_len).enumerate().for_each(|(k, c)| f(k, c)),
        _ => out.chunks_mut(chunk_len).enumerate().for_each(|(k, c)| f(k, c)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_agree() {
        let a = map_range(ExecMode::Sequential, 100, |i| i * i);
        let b = map_range(ExecMode::Parallel, 100, |i| i * i);
        assert_eq!(a, b);

        let mut x = vec![0usize; 50];
        for_each_indexed(ExecMode::Parallel, &mut x, |i, v| *v = 2 * i);
        assert_eq!(x[49], 98);
    }
}
