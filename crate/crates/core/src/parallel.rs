//! Deterministic parallel Monte Carlo driver.
//!
//! Work is split into fixed-size chunks; chunk `c` draws from stream
//! `base.stream + c` and partial results are reduced in chunk order. The
//! chunk layout never depends on the worker count, so a run with one thread
//! and a run with many produce bit-identical aggregates.

use rayon::prelude::*;

use crate::rng::SeedSpec;

/// Samples per stream chunk. Fixed; see module docs.
pub const CHUNK_LEN: usize = 4096;

/// Runs `f(chunk_seed, chunk_len)` over `ceil(n_total / chunk_len)` chunks in
/// parallel and returns the per-chunk outputs in chunk order.
pub fn map_chunks<T: Send>(
    base: SeedSpec,
    n_total: usize,
    chunk_len: usize,
    f: impl Fn(SeedSpec, usize) -> T + Sync,
) -> Vec<T> {
    assert!(chunk_len > 0);
    let n_chunks = n_total.div_ceil(chunk_len);
    (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let len = chunk_len.min(n_total - c * chunk_len);
            f(base.offset(c as u64), len)
        })
        .collect()
}

/// Streaming mean/variance accumulator for scalar Monte Carlo outputs.
#[derive(Debug, Clone, Copy, Default)]
pub struct Accumulator {
    pub n: u64,
    pub sum: f64,
    pub sum_sq: f64,
}

impl Accumulator {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        self.sum += x;
        self.sum_sq += x * x;
    }

    /// Merge in chunk order only; the reduction order is part of the
    /// reproducibility contract.
    pub fn merge(&mut self, other: &Accumulator) {
        self.n += other.n;
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
    }

    pub fn mean(&self) -> f64 {
        self.sum / self.n as f64
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        (self.sum_sq / self.n as f64 - m * m).max(0.0)
    }

    /// Standard error of the mean.
    pub fn std_error(&self) -> f64 {
        if self.n < 2 {
            return f64::INFINITY;
        }
        (self.variance() / (self.n as f64 - 1.0)).sqrt()
    }
}

/// Mean/standard-error estimate of `sample(rng)` over `n_total` draws,
/// reduced deterministically.
pub fn mc_scalar(
    base: SeedSpec,
    n_total: usize,
    sample: impl Fn(&mut crate::rng::RngStream) -> f64 + Sync,
) -> Accumulator {
    let parts = map_chunks(base, n_total, CHUNK_LEN, |seed, len| {
        let mut rng = seed.rng();
        let mut acc = Accumulator::default();
        for _ in 0..len {
            acc.push(sample(&mut rng));
        }
        acc
    });
    let mut total = Accumulator::default();
    for p in &parts {
        total.merge(p);
    }
    total
}

/// Runs `op` inside a rayon pool with the given worker count
/// (`0` keeps the global default pool).
pub fn with_threads<T: Send>(threads: usize, op: impl FnOnce() -> T + Send) -> T {
    if threads == 0 {
        op()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .expect("failed to build worker pool");
        pool.install(op)
    }
}

/// Binomial standard error of an observed proportion.
pub fn binomial_std_error(successes: u64, trials: u64) -> f64 {
    if trials == 0 {
        return f64::INFINITY;
    }
    let p = successes as f64 / trials as f64;
    (p * (1.0 - p) / trials as f64).sqrt()
}
