//! Parallel execution helpers. Work runs on rayon when the `parallel` feature
//! is on and `jobs != 1`, sequentially otherwise.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

pub(crate) fn map_indexed<R, F>(len: usize, jobs: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if jobs != 1 && len > 1 {
            return (0..len).into_par_iter().map(f).collect();
        }
    }
    let _ = jobs;
    (0..len).map(f).collect()
}

/// Whether parallel execution is compiled in.
pub const fn parallel_enabled() -> bool {
    cfg!(feature = "parallel")
}

/// Sizes the global worker pool; `jobs == 0` keeps the default of one worker
/// per core. Has no effect without the `parallel` feature.
pub fn init_thread_pool(jobs: usize) -> Result<(), String> {
    #[cfg(feature = "parallel")]
    {
        if jobs > 0 {
            return rayon::ThreadPoolBuilder::new()
                .num_threads(jobs)
                .build_global()
                .map_err(|e| e.to_string());
        }
    }
    let _ = jobs;
    Ok(())
}
