//! Batch execution helpers. With the `parallel` feature (the default) these
//! fan out over rayon's thread pool; without it they run sequentially.
//! Results are always collected in input order, so outputs are identical
//! either way.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[cfg(feature = "parallel")]
pub(crate) fn map_slice<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync,
{
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn map_slice<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    F: Fn(&T) -> U,
{
    items.iter().map(f).collect()
}

#[cfg(feature = "parallel")]
pub(crate) fn map_indices<U, F>(n: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync,
{
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn map_indices<U, F>(n: usize, f: F) -> Vec<U>
where
    F: Fn(usize) -> U,
{
    (0..n).map(f).collect()
}

/// Fallible map over a slice, failing on the first error (by input order).
pub(crate) fn try_map_slice<T, U, F>(items: &[T], f: F) -> crate::error::Result<Vec<U>>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> crate::error::Result<U> + Sync,
{
    map_slice(items, f).into_iter().collect()
}
