//! The erf-product ("parity") model: p_w(x) = prod_l erf(w_l'x_l) with an
//! optional first-order term erf(w_1'x_1), under standard Gaussian patches.
//!
//! Population losses reduce to products of arcsine-kernel values; gradients
//! decompose per block into a self term E[s(w'x) s'(w'x) x] (parallel to w)
//! and a cross term E[s(u'x) s'(w'x) x] (in span{w, u}), each scaled by a
//! leave-one-out product of kernel values. The two terms are evaluated by
//! Gauss–Hermite quadrature after exact Gaussian-measure reductions; Monte
//! Carlo is the correctness oracle throughout the tests.

use crate::error::{check_dims, Error, Result};
use crate::kernel::quad::QuadratureRule;
use crate::kernel::{erf, v_sigma_unchecked, ERF_DERIV_AT_ZERO};
use crate::optim::WeightState;
use crate::vec_ops::{angle, axpy, dot, norm, scaled, sub};
use std::collections::BTreeMap;
use std::sync::{Arc, Mutex, OnceLock};

/// Which objective: the pure degree-k product, or product plus first-order term.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParityMode {
    KOnly,
    OnePlusK,
}

#[derive(Debug, Clone)]
pub struct ParityParams {
    pub k: usize,
    pub d: usize,
    pub u0: Vec<f64>,
}

impl ParityParams {
    pub fn new(k: usize, u0: Vec<f64>) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidParameter("parity model needs k >= 2".into()));
        }
        let d = u0.len();
        if d == 0 || !u0.iter().all(|x| x.is_finite()) || norm(&u0) == 0.0 {
            return Err(Error::InvalidParameter(
                "u0 must be non-empty, finite, and nonzero".into(),
            ));
        }
        Ok(ParityParams { k, d, u0 })
    }

    /// Teacher norm at the non-degeneracy threshold: |u0|^2 = 12 k^2 / pi^2.
    pub fn nondegenerate_teacher(k: usize, d: usize) -> Result<Self> {
        let norm_sq = nondegeneracy_threshold(k);
        let mut u0 = vec![0.0; d];
        u0[0] = norm_sq.sqrt();
        ParityParams::new(k, u0)
    }

    fn check_weights(&self, weights: &WeightState) -> Result<()> {
        match weights {
            WeightState::Ws(w0) => check_dims("parity WS weights", self.d, w0.len()),
            WeightState::Fc(blocks) => {
                check_dims("parity FC block count", self.k, blocks.len())?;
                for b in blocks {
                    check_dims("parity FC block dim", self.d, b.len())?;
                }
                Ok(())
            }
        }
    }
}

/// Per-block decomposition of the FC gradient: `gradient = self_part - cross_part`,
/// with the leave-one-out kernel products that scale each block kept alongside.
#[derive(Debug, Clone)]
pub struct GradientDecomposition {
    pub self_part: Vec<Vec<f64>>,
    pub cross_part: Vec<Vec<f64>>,
    /// (prod_{j != l} V(w_j, w_j), prod_{j != l} V(u0, w_j)) per block l.
    pub kernel_products: Vec<(f64, f64)>,
}

impl GradientDecomposition {
    pub fn gradient(&self) -> Vec<Vec<f64>> {
        self.self_part
            .iter()
            .zip(&self.cross_part)
            .map(|(s, c)| sub(s, c))
            .collect()
    }
}

/// Angle between the shared weight and the teacher, in [0, pi].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngleState {
    pub alpha: f64,
}

/// alpha = angle(w0, u0); errors on zero vectors, invariant to positive rescaling.
pub fn angle_between(w0: &[f64], u0: &[f64]) -> Result<AngleState> {
    check_dims("angle_between", u0.len(), w0.len())?;
    if norm(w0) == 0.0 || norm(u0) == 0.0 {
        return Err(Error::UndefinedAngle);
    }
    Ok(AngleState {
        alpha: angle(w0, u0),
    })
}

/// Non-degeneracy threshold on the squared teacher norm, 12 k^2 / pi^2.
pub fn nondegeneracy_threshold(k: usize) -> f64 {
    let kf = k as f64;
    12.0 * kf * kf / (std::f64::consts::PI * std::f64::consts::PI)
}

/// Threshold together with the target second moment V(u0,u0)^k evaluated at it;
/// the floor statement is that the moment exceeds 1/4 there.
pub fn nondegeneracy_floor(k: usize) -> (f64, f64) {
    let threshold = nondegeneracy_threshold(k);
    let u0 = [threshold.sqrt()];
    let v = v_sigma_unchecked(&u0, &u0);
    (threshold, v.powi(k as i32))
}

// ---------------------------------------------------------------------------
// Quadrature-backed Gaussian expectations
// ---------------------------------------------------------------------------

/// Shared Gauss–Hermite rules, keyed by order. High orders only materialize
/// when a steep integrand asks for them.
fn cached_rule(order: usize) -> Arc<QuadratureRule> {
    static CACHE: OnceLock<Mutex<BTreeMap<usize, Arc<QuadratureRule>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(BTreeMap::new()));
    let mut guard = cache.lock().expect("quadrature cache poisoned");
    guard
        .entry(order)
        .or_insert_with(|| Arc::new(QuadratureRule::gauss_hermite(order)))
        .clone()
}

/// Upper limit for the complementary-error tail rule; erfc(9) ~ 4e-37.
const TAIL_CUTOFF: f64 = 9.0;

fn tail_rule() -> Arc<QuadratureRule> {
    static RULE: OnceLock<Arc<QuadratureRule>> = OnceLock::new();
    RULE.get_or_init(|| Arc::new(QuadratureRule::gauss_legendre(64, TAIL_CUTOFF)))
        .clone()
}

/// J(g) = E_{t~N(0,1)}[erf(g t) t], the one steep 1D integral every cross
/// term reduces to.
///
/// Gauss–Hermite converges like exp(-pi n / (2 g^2)) here, so it only serves
/// the mild range. For steep arguments, split erf = 1 - erfc on each half
/// line and substitute s = g t:
///
/// ```text
/// J(g) = sqrt(2/pi) - (2/g^2) * integral_0^inf erfc(s) s phi(s/g) ds,
/// ```
///
/// where phi is the standard normal density; the remaining integrand is
/// smooth on [0, 9] for every g above the crossover.
fn steep_erf_moment(g: f64) -> f64 {
    let g = g.abs();
    if g < 1.5 {
        let rule = cached_rule(96);
        let mut acc = 0.0;
        for (&x, &w) in rule.nodes().iter().zip(rule.weights()) {
            acc += w * erf(g * x) * x;
        }
        return acc;
    }
    let rule = tail_rule();
    let mut tail = 0.0;
    let inv_sqrt_2pi = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
    for (&s, &w) in rule.nodes().iter().zip(rule.weights()) {
        let density = inv_sqrt_2pi * (-0.5 * (s / g) * (s / g)).exp();
        tail += w * libm::erfc(s) * s * density;
    }
    (2.0 / std::f64::consts::PI).sqrt() - 2.0 / (g * g) * tail
}

/// Self term: E[s(w'x) s'(w'x) x] = c1(|w|) w. Rotating w onto an axis leaves
/// E[erf(r y) erf'(r y) y]; absorbing the erf' Gaussian into the measure
/// (y = t / s with s = sqrt(1 + 2 r^2)) gives
/// (2/sqrt(pi)) / s^2 * E[erf(r t / s) t], whose remaining scale r/s is
/// always below 1/sqrt(2).
pub fn self_term(w: &[f64]) -> Vec<f64> {
    let r = norm(w);
    if r == 0.0 {
        return vec![0.0; w.len()];
    }
    let s = (1.0 + 2.0 * r * r).sqrt();
    let rule = cached_rule(64);
    let mut moment = 0.0;
    for (&t, &wt) in rule.nodes().iter().zip(rule.weights()) {
        moment += wt * erf(r * t / s) * t;
    }
    let coeff = ERF_DERIV_AT_ZERO / (s * s) * moment / r;
    scaled(w, coeff)
}

/// Coefficient c1(|w|) with self_term(w) = c1 w. The limit at 0 is
/// erf'(0)^2 = 4/pi.
pub fn self_coefficient(w_norm: f64) -> f64 {
    if w_norm == 0.0 {
        return ERF_DERIV_AT_ZERO * ERF_DERIV_AT_ZERO;
    }
    let w = [w_norm];
    self_term(&w)[0] / w_norm
}

/// Cross term: E[s(u'x) s'(w'x) x], a vector in span{u, w}.
///
/// In the orthonormal basis e1 = w/|w|, e2 = unit component of u orthogonal
/// to w, the integral is two-dimensional. The erf' factor is a Gaussian in
/// the e1 coordinate and folds exactly into the measure (y1 = t/s,
/// s = sqrt(1 + 2|w|^2)); rotating the remaining erf direction onto a single
/// axis then leaves the 1D moment J(g) with g^2 = (a/s)^2 + b^2, where
/// a = u'e1 and b = |u - a e1|:
///
/// ```text
/// cross(u, w) = (2/sqrt(pi)) (J(g)/(s g)) * [ (a/s^2) e1 + b e2 ]
/// ```
pub fn cross_term(u: &[f64], w: &[f64]) -> Result<Vec<f64>> {
    check_dims("cross_term", u.len(), w.len())?;
    let nu = norm(u);
    if nu == 0.0 {
        // s(0) = 0 kills the expectation.
        return Ok(vec![0.0; u.len()]);
    }
    let r = norm(w);
    if r == 0.0 {
        // s'(0) is the constant 2/sqrt(pi); a 1D integral along u remains.
        let j = steep_erf_moment(nu);
        return Ok(scaled(u, ERF_DERIV_AT_ZERO * j / nu));
    }
    let e1 = scaled(w, 1.0 / r);
    let a = dot(u, &e1);
    let mut perp = u.to_vec();
    axpy(&mut perp, -a, &e1);
    let b = norm(&perp);
    let s = (1.0 + 2.0 * r * r).sqrt();
    let g = ((a / s) * (a / s) + b * b).sqrt();
    if g == 0.0 {
        return Ok(vec![0.0; u.len()]);
    }
    let j = steep_erf_moment(g);
    let scale = ERF_DERIV_AT_ZERO * j / (s * g);
    let mut out = scaled(&e1, scale * a / (s * s));
    if b > 0.0 {
        // perp / b is e2; fold the division into the coefficient.
        axpy(&mut out, scale, &perp);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Objectives
// ---------------------------------------------------------------------------

fn ws_blocks(w0: &[f64], k: usize) -> Vec<Vec<f64>> {
    vec![w0.to_vec(); k]
}

/// Population objective. Closed form via the arcsine kernel:
/// F_k = (prod_j V(w_j,w_j) - 2 prod_j V(u0,w_j) + V(u0,u0)^k) / 2,
/// F_1 = (V(w_1,w_1) - 2 V(u0,w_1) + V(u0,u0)) / 2,
/// and the mixed objective is their sum (the cross expectation vanishes by
/// sign symmetry of lone erf factors).
pub fn objective(weights: &WeightState, params: &ParityParams, mode: ParityMode) -> Result<f64> {
    params.check_weights(weights)?;
    let blocks_storage;
    let blocks: &[Vec<f64>] = match weights {
        WeightState::Ws(w0) => {
            blocks_storage = ws_blocks(w0, params.k);
            &blocks_storage
        }
        WeightState::Fc(b) => b,
    };
    let u0 = &params.u0;
    let vuu = v_sigma_unchecked(u0, u0);
    let self_kernels: Vec<f64> = blocks.iter().map(|w| v_sigma_unchecked(w, w)).collect();
    let cross_kernels: Vec<f64> = blocks.iter().map(|w| v_sigma_unchecked(u0, w)).collect();
    let prod_self = signed_product(&self_kernels);
    let prod_cross = signed_product(&cross_kernels);
    let f_k = 0.5 * (prod_self - 2.0 * prod_cross + vuu.powi(params.k as i32));
    let value = match mode {
        ParityMode::KOnly => f_k,
        ParityMode::OnePlusK => {
            let f_1 = 0.5 * (self_kernels[0] - 2.0 * cross_kernels[0] + vuu);
            f_1 + f_k
        }
    };
    Ok(value.max(0.0))
}

/// Blockwise FC gradient with its self/cross decomposition.
pub fn fc_gradient(
    weights: &WeightState,
    params: &ParityParams,
    mode: ParityMode,
) -> Result<GradientDecomposition> {
    let blocks = match weights {
        WeightState::Fc(b) => {
            params.check_weights(weights)?;
            b
        }
        WeightState::Ws(_) => {
            return Err(Error::InvalidParameter(
                "fc_gradient requires FC weights; use ws_gradient for the shared form".into(),
            ))
        }
    };
    let u0 = &params.u0;
    let self_kernels: Vec<f64> = blocks.iter().map(|w| v_sigma_unchecked(w, w)).collect();
    let cross_kernels: Vec<f64> = blocks.iter().map(|w| v_sigma_unchecked(u0, w)).collect();
    let loo_self = leave_one_out_products(&self_kernels);
    let loo_cross = leave_one_out_products(&cross_kernels);

    let mut self_part = Vec::with_capacity(params.k);
    let mut cross_part = Vec::with_capacity(params.k);
    let mut kernel_products = Vec::with_capacity(params.k);
    for (l, w_l) in blocks.iter().enumerate() {
        let base_self = self_term(w_l);
        let base_cross = cross_term(u0, w_l)?;
        let first_order = if l == 0 && mode == ParityMode::OnePlusK {
            1.0
        } else {
            0.0
        };
        let s = scaled(&base_self, loo_self[l] + first_order);
        let c = scaled(&base_cross, loo_cross[l] + first_order);
        kernel_products.push((loo_self[l], loo_cross[l]));
        self_part.push(s);
        cross_part.push(c);
    }
    Ok(GradientDecomposition {
        self_part,
        cross_part,
        kernel_products,
    })
}

/// Gradient of the WS objective with respect to the shared vector:
/// k V(w0,w0)^{k-1} c1(w0) w0 - k V(u0,w0)^{k-1} b(u0,w0), plus the
/// first-order blocks in the mixed mode. Equals the blockwise sum of the FC
/// gradient at k duplicates of w0.
pub fn ws_gradient(w0: &[f64], params: &ParityParams, mode: ParityMode) -> Result<Vec<f64>> {
    check_dims("parity WS weights", params.d, w0.len())?;
    let u0 = &params.u0;
    let k = params.k as i32;
    let vss = v_sigma_unchecked(w0, w0);
    let vus = v_sigma_unchecked(u0, w0);
    let kf = params.k as f64;
    let first_order = if mode == ParityMode::OnePlusK {
        1.0
    } else {
        0.0
    };
    let self_coeff = kf * signed_pow(vss, k - 1) + first_order;
    let cross_coeff = kf * signed_pow(vus, k - 1) + first_order;
    let mut g = scaled(&self_term(w0), self_coeff);
    axpy(&mut g, -cross_coeff, &cross_term(u0, w0)?);
    Ok(g)
}

/// Max deviation of p_w(x) g_{w'}(x) - p_w(-x) g_{w'}(-x) over the given
/// inputs, taken componentwise over the predictor-gradient entries.
pub fn symmetry_max_deviation(
    weights: &WeightState,
    weights_prime: &WeightState,
    params: &ParityParams,
    inputs: &[Vec<f64>],
) -> Result<f64> {
    params.check_weights(weights)?;
    params.check_weights(weights_prime)?;
    let mut worst = 0.0f64;
    for x in inputs {
        check_dims("symmetry input", params.d * params.k, x.len())?;
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        let p_pos = predictor(weights, params, x);
        let p_neg = predictor(weights, params, &neg);
        let g_pos = predictor_gradient(weights_prime, params, x);
        let g_neg = predictor_gradient(weights_prime, params, &neg);
        for (gp, gn) in g_pos.iter().zip(&g_neg) {
            worst = worst.max((p_pos * gp - p_neg * gn).abs());
        }
    }
    Ok(worst)
}

/// p_w(x) for a single stacked input x of length k*d (product part only).
pub fn predictor(weights: &WeightState, params: &ParityParams, x: &[f64]) -> f64 {
    let d = params.d;
    match weights {
        WeightState::Ws(w0) => (0..params.k)
            .map(|l| erf(dot(w0, &x[l * d..(l + 1) * d])))
            .product(),
        WeightState::Fc(blocks) => blocks
            .iter()
            .enumerate()
            .map(|(l, w)| erf(dot(w, &x[l * d..(l + 1) * d])))
            .product(),
    }
}

/// Gradient of the predictor with respect to the weights, flattened. For the
/// WS form this is the sum of the per-duplicate block gradients.
fn predictor_gradient(weights: &WeightState, params: &ParityParams, x: &[f64]) -> Vec<f64> {
    let d = params.d;
    let k = params.k;
    let blocks_storage;
    let blocks: &[Vec<f64>] = match weights {
        WeightState::Ws(w0) => {
            blocks_storage = ws_blocks(w0, k);
            &blocks_storage
        }
        WeightState::Fc(b) => b,
    };
    let acts: Vec<(f64, f64)> = (0..k)
        .map(|l| {
            let z = dot(&blocks[l], &x[l * d..(l + 1) * d]);
            (erf(z), ERF_DERIV_AT_ZERO * (-z * z).exp())
        })
        .collect();
    let loo = leave_one_out_products(&acts.iter().map(|a| a.0).collect::<Vec<_>>());
    let per_block: Vec<Vec<f64>> = (0..k)
        .map(|l| scaled(&x[l * d..(l + 1) * d], loo[l] * acts[l].1))
        .collect();
    match weights {
        WeightState::Fc(_) => crate::cosine::flatten(&per_block),
        WeightState::Ws(_) => {
            let mut sum = vec![0.0; d];
            for b in &per_block {
                axpy(&mut sum, 1.0, b);
            }
            sum
        }
    }
}

// ---------------------------------------------------------------------------
// Sign-aware products (the hardness regime needs |V|^{k-1} values far below
// f64 subnormals to keep their sign and relative structure)
// ---------------------------------------------------------------------------

fn signed_pow(v: f64, exp: i32) -> f64 {
    if exp == 0 {
        return 1.0;
    }
    if v == 0.0 {
        return 0.0;
    }
    let sign = if v < 0.0 && exp % 2 != 0 { -1.0 } else { 1.0 };
    sign * (f64::from(exp) * v.abs().ln()).exp()
}

fn signed_product(vals: &[f64]) -> f64 {
    let mut sign = 1.0;
    let mut log_sum = 0.0;
    for &v in vals {
        if v == 0.0 {
            return 0.0;
        }
        if v < 0.0 {
            sign = -sign;
        }
        log_sum += v.abs().ln();
    }
    sign * log_sum.exp()
}

/// prod_{j != l} vals[j] for each l, exact about zeros.
fn leave_one_out_products(vals: &[f64]) -> Vec<f64> {
    let zeros = vals.iter().filter(|v| **v == 0.0).count();
    let n = vals.len();
    match zeros {
        0 => {
            let mut sign_all = 1.0;
            let mut log_all = 0.0;
            for &v in vals {
                if v < 0.0 {
                    sign_all = -sign_all;
                }
                log_all += v.abs().ln();
            }
            vals.iter()
                .map(|&v| {
                    let sign = if v < 0.0 { -sign_all } else { sign_all };
                    sign * (log_all - v.abs().ln()).exp()
                })
                .collect()
        }
        1 => {
            let zero_at = vals.iter().position(|v| *v == 0.0).unwrap();
            (0..n)
                .map(|l| {
                    if l == zero_at {
                        signed_product(
                            &vals
                                .iter()
                                .enumerate()
                                .filter(|(j, _)| *j != zero_at)
                                .map(|(_, &v)| v)
                                .collect::<Vec<_>>(),
                        )
                    } else {
                        0.0
                    }
                })
                .collect()
        }
        _ => vec![0.0; n],
    }
}
