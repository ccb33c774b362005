//! Seeded Monte Carlo expectation oracle.
//!
//! Every closed form and quadrature in this crate is checked against
//! `mc_expect`, so the estimator has to be reproducible: sampling is batched
//! over independent ChaCha streams derived from the seed, which makes the
//! result identical regardless of how batches are scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

const BATCH: u64 = 65_536;

/// A scalar expectation with its standard error and provenance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KernelEstimate {
    pub value: f64,
    pub std_error: f64,
    pub n_samples: u64,
    pub seed: u64,
}

impl KernelEstimate {
    /// |value - other| measured in standard errors (guarding the se=0 case).
    pub fn sigmas_from(&self, other: f64) -> f64 {
        let diff = (self.value - other).abs();
        if diff == 0.0 {
            0.0
        } else {
            diff / self.std_error.max(f64::MIN_POSITIVE)
        }
    }
}

/// A small-vector expectation; component-wise standard errors.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VectorEstimate {
    pub values: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub n_samples: u64,
    pub seed: u64,
}

/// E[f(x)] for x ~ N(0, I_dim), estimated from `n` samples.
pub fn mc_expect(
    f: impl Fn(&[f64]) -> f64 + Sync,
    dim: usize,
    n: u64,
    seed: u64,
) -> KernelEstimate {
    assert!(n >= 2, "need at least two samples for a standard error");
    let n_batches = n.div_ceil(BATCH);
    let partials: Vec<(f64, f64)> = (0..n_batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream_rng(seed, b);
            let mut x = vec![0.0f64; dim];
            let count = batch_len(n, b);
            let mut sum = 0.0;
            let mut sum_sq = 0.0;
            for _ in 0..count {
                fill_standard_normal(&mut rng, &mut x);
                let v = f(&x);
                sum += v;
                sum_sq += v * v;
            }
            (sum, sum_sq)
        })
        .collect();
    let (sum, sum_sq) = partials
        .iter()
        .fold((0.0, 0.0), |(a, b), &(s, q)| (a + s, b + q));
    let nf = n as f64;
    let mean = sum / nf;
    let var = ((sum_sq - sum * sum / nf) / (nf - 1.0)).max(0.0);
    KernelEstimate {
        value: mean,
        std_error: (var / nf).sqrt(),
        n_samples: n,
        seed,
    }
}

/// Component-wise E[f(x)] for a vector-valued integrand.
pub fn mc_expect_vec(
    f: impl Fn(&[f64], &mut [f64]) + Sync,
    dim: usize,
    out_dim: usize,
    n: u64,
    seed: u64,
) -> VectorEstimate {
    assert!(n >= 2, "need at least two samples for a standard error");
    let n_batches = n.div_ceil(BATCH);
    let partials: Vec<(Vec<f64>, Vec<f64>)> = (0..n_batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream_rng(seed, b);
            let mut x = vec![0.0f64; dim];
            let mut out = vec![0.0f64; out_dim];
            let mut sum = vec![0.0f64; out_dim];
            let mut sum_sq = vec![0.0f64; out_dim];
            for _ in 0..batch_len(n, b) {
                fill_standard_normal(&mut rng, &mut x);
                f(&x, &mut out);
                for j in 0..out_dim {
                    sum[j] += out[j];
                    sum_sq[j] += out[j] * out[j];
                }
            }
            (sum, sum_sq)
        })
        .collect();
    let mut sum = vec![0.0f64; out_dim];
    let mut sum_sq = vec![0.0f64; out_dim];
    for (s, q) in &partials {
        for j in 0..out_dim {
            sum[j] += s[j];
            sum_sq[j] += q[j];
        }
    }
    let nf = n as f64;
    let values: Vec<f64> = sum.iter().map(|s| s / nf).collect();
    let std_errors: Vec<f64> = sum
        .iter()
        .zip(&sum_sq)
        .map(|(&s, &q)| (((q - s * s / nf) / (nf - 1.0)).max(0.0) / nf).sqrt())
        .collect();
    VectorEstimate {
        values,
        std_errors,
        n_samples: n,
        seed,
    }
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn batch_len(n: u64, batch: u64) -> u64 {
    let start = batch * BATCH;
    BATCH.min(n - start)
}

pub(crate) fn fill_standard_normal(rng: &mut ChaCha8Rng, out: &mut [f64]) {
    for v in out.iter_mut() {
        *v = StandardNormal.sample(rng);
    }
}
