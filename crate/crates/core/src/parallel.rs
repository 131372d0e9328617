//! Index-parallel map used for ensembles and seed averages.
//!
//! With the `parallel` feature (default) work is spread over the rayon pool;
//! without it everything runs on the calling thread. Results are always
//! returned in index order, so output never depends on scheduling.

/// Environment variable that sets the number of worker threads.
pub const WORKERS_ENV: &str = "TWOBAND_WORKERS";

pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        map_indexed_parallel(n, f)
    }
    #[cfg(not(feature = "parallel"))]
    {
        map_indexed_sequential(n, f)
    }
}

pub fn map_indexed_sequential<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}

#[cfg(feature = "parallel")]
pub fn map_indexed_parallel<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

/// Sizes the global pool from [`WORKERS_ENV`] if it is set. Returns the
/// requested worker count, or `None` when the default is kept.
pub fn configure_workers_from_env() -> crate::Result<Option<usize>> {
    let Ok(raw) = std::env::var(WORKERS_ENV) else {
        return Ok(None);
    };
    let workers: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&w| w > 0)
        .ok_or_else(|| crate::Error::config(format!("{WORKERS_ENV} must be a positive integer, got {raw:?}")))?;
    #[cfg(feature = "parallel")]
    {
        // a second initialization attempt (e.g. in tests) keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(workers).build_global();
    }
    Ok(Some(workers))
}
