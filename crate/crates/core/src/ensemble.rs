//! Running independent paths of an ensemble.
//!
//! Paths share no mutable state; results come back in path order whatever
//! the scheduling, so every reduction over them is deterministic.

use crate::error::Result;

/// Applies `f` to paths `0..n`, in parallel when the `parallel` feature is
/// enabled.
pub fn map_paths<T, F>(n: u64, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        map_paths_parallel(n, f)
    }
    #[cfg(not(feature = "parallel"))]
    {
        map_paths_sequential(n, f)
    }
}

pub fn map_paths_sequential<T, F>(n: u64, f: F) -> Result<Vec<T>>
where
    F: Fn(u64) -> Result<T>,
{
    (0..n).map(f).collect()
}

#[cfg(feature = "parallel")]
pub fn map_paths_parallel<T, F>(n: u64, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}
