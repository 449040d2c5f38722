use rayon::ThreadPoolBuilder;

/// Runs `f` inside a dedicated pool of `workers` threads (0 means rayon's
/// default sizing). Callers must only use order-preserving collection inside
/// `f` so results do not depend on the worker count.
pub fn run_with_workers<R, F>(workers: usize, f: F) -> R
where
    R: Send,
    F: FnOnce() -> R + Send,
{
    match ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}
