//! Execution-mode switch for the data-parallel inner loops.
//!
//! Every hot loop in the crate (PageRank sweeps, per-item statistics,
//! per-segment extraction, blueprint cells) goes through [`map_indexed`] or
//! [`map_slice`]. Results are always collected in input order, so the
//! parallel and sequential paths produce identical output.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parallelism {
    Sequential,
    /// Uses rayon when the `parallel` feature is enabled, otherwise falls
    /// back to the sequential path.
    #[default]
    Parallel,
}

impl Parallelism {
    /// True when this mode will actually fan out to the rayon pool.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Parallelism::Parallel
    }
}

/// Maps `f` over `0..len`, returning results in index order.
pub fn map_indexed<T, F>(mode: Parallelism, len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if mode.is_parallel() {
        use rayon::prelude::*;
        return (0..len).into_par_iter().map(f).collect();
    }
    let _ = mode;
    (0..len).map(f).collect()
}

/// Maps `f` over a slice, returning results in slice order.
pub fn map_slice<S, T, F>(mode: Parallelism, items: &[S], f: F) -> Vec<T>
where
    S: Sync,
    T: Send,
    F: Fn(&S) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if mode.is_parallel() {
        use rayon::prelude::*;
        return items.par_iter().map(f).collect();
    }
    let _ = mode;
    items.iter().map(f).collect()
}

/// Overwrites `out[i] = f(i)` for every index.
pub fn fill_indexed<T, F>(mode: Parallelism, out: &mut [T], f: F)
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if mode.is_parallel() {
        use rayon::prelude::*;
        out.par_iter_mut().enumerate().for_each(|(i, slot)| *slot = f(i));
        return;
    }
    let _ = mode;
    for (i, slot) in out.iter_mut().enumerate() {
        *slot = f(i);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn both_modes_agree_and_keep_order() {
        let xs: Vec<u64> = (0..1000).collect();
        let a = map_slice(Parallelism::Sequential, &xs, |x| x * x);
        let b = map_slice(Parallelism::Parallel, &xs, |x| x * x);
        assert_eq!(a, b);
        assert_eq!(map_indexed(Parallelism::Parallel, 5, |i| i), vec![0, 1, 2, 3, 4]);

        let mut out = vec![0usize; 64];
        fill_indexed(Parallelism::Parallel, &mut out, |i| i + 1);
        assert_eq!(out[63], 64);
    }
}
