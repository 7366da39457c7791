//! Data-parallel helpers with a sequential fallback when the `parallel`
//! feature is disabled. Results are always returned in input order.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

pub(crate) fn map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
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

/// First element (by index) for which `f` returns `Some`.
pub(crate) fn find_map_first<T, R, F>(items: &[T], f: F) -> Option<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> Option<R> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.par_iter().find_map_first(f)
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().find_map(f)
    }
}
