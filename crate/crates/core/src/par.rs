//! Data-parallel helpers.
//!
//! With the `parallel` feature the closures run on the rayon pool; without it
//! they run sequentially. Every helper writes each output slot from exactly one
//! closure call, so results are identical in both modes.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Whether this build dispatches work onto rayon.
pub const fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}

/// Evaluates `f(i)` for `i in 0..n` and returns the results in index order.
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
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

/// Maps each element of `items` through `f`, preserving order.
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

/// Calls `f(row_index, row)` for every `width`-long row of `data`.
pub fn for_each_row<T, F>(data: &mut [T], width: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        data.par_chunks_mut(width)
            .enumerate()
            .for_each(|(y, row)| f(y, row));
    }
    #[cfg(not(feature = "parallel"))]
    {
        data.chunks_mut(width)
            .enumerate()
            .for_each(|(y, row)| f(y, row));
    }
}
