//! Independent numeric oracles and seeded sampling helpers, shared by the
//! unit tests, the acceptance suite, and the verification checks.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Standard normal vector scaled by `scale`.
pub fn rng_vec(rng: &mut ChaCha8Rng, dim: usize, scale: f64) -> Vec<f64> {
    (0..dim)
        .map(|_| {
            let g: f64 = StandardNormal.sample(rng);
            g * scale
        })
        .collect()
}

/// Unit vector in a uniformly random direction.
pub fn rng_direction(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let v = rng_vec(rng, dim, 1.0);
        let n = crate::vec_ops::norm(&v);
        if n > 1e-8 {
            return crate::vec_ops::scaled(&v, 1.0 / n);
        }
    }
}

/// Uniform point in the ball of the given radius.
pub fn rng_in_ball(rng: &mut ChaCha8Rng, dim: usize, radius: f64) -> Vec<f64> {
    let dir = rng_direction(rng, dim);
    let r = radius * rng.random_range(0.0f64..1.0).powf(1.0 / dim as f64);
    crate::vec_ops::scaled(&dir, r)
}

/// Central finite differences of a scalar function.
pub fn fd_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], step: f64) -> Vec<f64> {
    let mut g = vec![0.0; x.len()];
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        let orig = probe[i];
        probe[i] = orig + step;
        let hi = f(&probe);
        probe[i] = orig - step;
        let lo = f(&probe);
        probe[i] = orig;
        g[i] = (hi - lo) / (2.0 * step);
    }
    g
}
