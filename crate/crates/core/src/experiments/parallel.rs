use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Environment variable overriding the worker count.
pub const WORKERS_ENV: &str = "PEANO_WORKERS";

/// Worker count: explicit value, else the environment override, else the
/// number of available cores.
pub fn worker_count(explicit: Option<usize>) -> usize {
    if let Some(n) = explicit.filter(|n| *n > 0) {
        return n;
    }
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|n| *n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Random stream for auxiliary draws tied to a seed, independent of the
/// per-path streams.
pub fn rng_for_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Evaluates `f(i)` for `i` in `range` on `workers` threads and returns the
/// results in index order, so reductions over them do not depend on the
/// worker count.
pub fn map_indexed<T, F>(range: std::ops::Range<u64>, workers: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    if workers <= 1 {
        return range.map(f).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Resource(format!("cannot start worker pool: {e}")))?;
    // Collect every result first so the reported error is the lowest index.
    let all: Vec<Result<T>> = pool.install(|| range.into_par_iter().map(f).collect());
    all.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_preserved() {
        let a = map_indexed(0..100, 1, |i| Ok(i * i)).unwrap();
        let b = map_indexed(0..100, 3, |i| Ok(i * i)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn first_error_surfaces() {
        let r = map_indexed(0..10, 2, |i| if i == 7 { Err(Error::Sampling("x".into())) } else { Ok(i) });
        assert!(r.is_err());
    }
}
