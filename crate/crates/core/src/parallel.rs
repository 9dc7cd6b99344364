//! Thread-pool sizing. Scale sweeps are embarrassingly parallel; the
//! `EXDIM_THREADS` environment variable caps the rayon pool (0 or unset
//! means "let rayon decide").

use std::sync::Once;

static INIT: Once = Once::new();

/// Number of worker threads requested via `EXDIM_THREADS`, if any.
pub fn requested_threads() -> Option<usize> {
    std::env::var("EXDIM_THREADS")
        .ok()
        .and_then(|s| s.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
}

/// Install the global rayon pool honoring `EXDIM_THREADS`. Safe to call more
/// than once; only the first call takes effect.
pub fn init_thread_pool() {
    INIT.call_once(|| {
        if let Some(n) = requested_threads() {
            // Ignore the error if a pool was already built elsewhere.
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    });
}

/// Effective parallelism after `init_thread_pool`.
pub fn parallelism() -> usize {
    rayon::current_num_threads()
}
