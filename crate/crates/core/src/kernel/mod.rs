//! Scalar activations and closed-form Gaussian expectations.
//!
//! The erf activation and its arcsine kernel carry the entire analytic layer:
//! for standard Gaussian `x`,
//!
//! ```text
//! V(u, v) = E[erf(u'x) erf(v'x)] = (2/pi) asin( 2 u'v / (sqrt(1+2|u|^2) sqrt(1+2|v|^2)) )
//! E[cos(z'x)] = exp(-|z|^2 / 2)
//! ```
//!
//! Quadrature and Monte Carlo live in the submodules; both exist so that every
//! closed form in this crate can be checked against an independent route.

pub mod mc;
pub mod quad;

use crate::error::{check_dims, Result};
use crate::vec_ops::{dot, norm_sq, scaled};

/// 2 / sqrt(pi), the derivative of erf at 0.
pub const ERF_DERIV_AT_ZERO: f64 = std::f64::consts::FRAC_2_SQRT_PI;

/// The erf activation: erf(x) = (2/sqrt(pi)) * integral_0^x exp(-t^2) dt.
///
/// Backed by a minimax rational approximation accurate to < 1 ulp; the test
/// suite validates it against a Taylor-series/quadrature oracle.
pub fn erf(x: f64) -> f64 {
    libm::erf(x)
}

/// Derivative of erf: (2/sqrt(pi)) exp(-x^2).
pub fn erf_prime(x: f64) -> f64 {
    ERF_DERIV_AT_ZERO * (-x * x).exp()
}

/// Activation value and derivative at `x`.
pub fn sigma_eval(x: f64) -> (f64, f64) {
    (erf(x), erf_prime(x))
}

/// The arcsine kernel V(u, v) = E[erf(u'x) erf(v'x)] over standard Gaussian x.
///
/// The asin argument is clamped to [-1, 1]; analytically it never leaves that
/// interval, but rounding can push `u = v` cases a few ulp outside.
pub fn v_sigma(u: &[f64], v: &[f64]) -> Result<f64> {
    check_dims("v_sigma", u.len(), v.len())?;
    Ok(v_sigma_unchecked(u, v))
}

pub(crate) fn v_sigma_unchecked(u: &[f64], v: &[f64]) -> f64 {
    v_sigma_from_parts(dot(u, v), norm_sq(u), norm_sq(v))
}

/// Kernel value from the inner product and squared norms.
pub fn v_sigma_from_parts(uv: f64, u_sq: f64, v_sq: f64) -> f64 {
    let denom = ((1.0 + 2.0 * u_sq) * (1.0 + 2.0 * v_sq)).sqrt();
    let arg = (2.0 * uv / denom).clamp(-1.0, 1.0);
    std::f64::consts::FRAC_2_PI * arg.asin()
}

/// phi(a) = exp(-|a|^2 / 2) * a, the Gaussian-damped identity map that shows
/// up in every cosine-model gradient: E[sin(a'x) x] = phi(a).
pub fn phi_map(a: &[f64]) -> Vec<f64> {
    scaled(a, (-0.5 * norm_sq(a)).exp())
}

/// E[cos(z'x)] = exp(-|z|^2 / 2) for standard Gaussian x.
pub fn cos_gaussian_mean(z: &[f64]) -> f64 {
    (-0.5 * norm_sq(z)).exp()
}
