//! Index-ordered maybe-parallel map.
//!
//! Every parallel loop in this crate maps an index range to a vector and
//! collects in index order, so the `parallel` feature changes wall-clock
//! time but never the bits of the result.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Below this size the split and sync overhead outweighs the work for
/// the fine-grained loops in this crate (solver row updates).
const PAR_THRESHOLD: usize = 64;

#[cfg(feature = "parallel")]
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    if n < PAR_THRESHOLD || rayon::current_num_threads() == 1 {
        return (0..n).map(f).collect();
    }
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).map(f).collect()
}
