//! Batch evaluation helpers.
//!
//! Everything in this crate that maps a pure function over many
//! independent inputs (grid sampling, per-segment quadrature, segment
//! pair tests, parameter sweeps) goes through these. With the `parallel`
//! feature the work runs on the rayon pool; without it, or below the
//! size threshold, a plain sequential loop runs instead. Results are
//! identical either way: order is preserved and nothing is reduced in a
//! timing-dependent order.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Below this many items the rayon dispatch overhead is not worth it.
const PAR_MIN_LEN: usize = 512;

/// Sequential map, always available; the benchmark baseline.
pub fn map_seq<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    F: Fn(&T) -> U,
{
    items.iter().map(f).collect()
}

/// Parallel map over the rayon pool.
#[cfg(feature = "parallel")]
pub fn map_par<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    items.par_iter().map(f).collect()
}

/// Map using the best available strategy.
pub fn map<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if items.len() >= PAR_MIN_LEN {
        return map_par(items, f);
    }
    map_seq(items, f)
}

/// Fallible map; the first error (by input order) wins.
pub fn try_map<T, U, E, F>(items: &[T], f: F) -> Result<Vec<U>, E>
where
    T: Sync,
    U: Send,
    E: Send,
    F: Fn(&T) -> Result<U, E> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if items.len() >= PAR_MIN_LEN {
        let mapped: Vec<Result<U, E>> = items.par_iter().map(&f).collect();
        return mapped.into_iter().collect();
    }
    items.iter().map(f).collect()
}
