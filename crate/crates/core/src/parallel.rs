//! Index-ordered map used by the experiment drivers.
//!
//! With the `parallel` feature and `jobs > 1` the work runs on a dedicated
//! rayon pool; otherwise it runs in a plain loop. Either way the output is
//! ordered by index, so results do not depend on scheduling.

/// `(0..n).map(f)` collected in index order, using up to `jobs` threads.
pub fn map_indexed<T, F>(n: usize, jobs: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if jobs > 1 {
        use rayon::prelude::*;
        if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
            return pool.install(|| (0..n).into_par_iter().map(&f).collect());
        }
    }
    let _ = jobs;
    (0..n).map(f).collect()
}

/// Whether this build can run sweeps on more than one thread.
pub const fn parallel_enabled() -> bool {
    cfg!(feature = "parallel")
}
