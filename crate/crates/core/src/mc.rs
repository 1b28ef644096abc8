//! Deterministic parallel replication over sampled paths.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fbm::{FbmSampler, SampledPath, SamplerScratch};

/// Runs `op` on a pool of `workers` threads, or on the global pool if `None`.
pub fn with_workers<T: Send>(workers: Option<usize>, op: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        None => Ok(op()),
        Some(0) => Err(Error::Usage("worker count must be at least 1".into())),
        Some(w) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w)
                .build()
                .map_err(|e| Error::Usage(format!("cannot build thread pool: {e}")))?;
            Ok(pool.install(op))
        }
    }
}

/// Applies `f` to paths 0..m of `seed` and returns the results in index order.
///
/// `f` receives the path index and the node values. The output does not
/// depend on the number of threads.
pub fn map_paths<T, F>(sampler: &FbmSampler, seed: u64, m: usize, workers: Option<usize>, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64, &[f64]) -> T + Sync + Send,
{
    let len = sampler.grid().len();
    let pairs = m.div_ceil(2);
    let run = || {
        let nested: Vec<(T, Option<T>)> = (0..pairs as u64)
            .into_par_iter()
            .map_init(
                || (SamplerScratch::default(), vec![0.0; len], vec![0.0; len]),
                |(scratch, a, b), k| {
                    sampler.sample_pair_into(seed, k, scratch, a, b);
                    let first = f(2 * k, a);
                    let second = if ((2 * k + 1) as usize) < m { Some(f(2 * k + 1, b)) } else { None };
                    (first, second)
                },
            )
            .collect();
        let mut out = Vec::with_capacity(m);
        for (a, b) in nested {
            out.push(a);
            out.extend(b);
        }
        out
    };
    with_workers(workers, run)
}

/// Like [`map_paths`] but hands `f` a full [`SampledPath`].
pub fn map_sampled_paths<T, F>(
    sampler: &FbmSampler,
    seed: u64,
    m: usize,
    workers: Option<usize>,
    f: F,
) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&SampledPath) -> T + Sync + Send,
{
    let grid = *sampler.grid();
    let h = sampler.hurst();
    map_paths(sampler, seed, m, workers, |index, w| {
        let path = SampledPath { grid, w: w.to_vec(), seed, path_index: index, h };
        f(&path)
    })
}

/// SplitMix64 mix of a master seed and a salt, for independent sub-streams.
pub fn derive_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Sample mean and standard error of the mean.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
