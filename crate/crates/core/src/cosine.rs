//! The cosine model: p_w(x) = c_k w_1'x_1 + cos(sum_i w_i'x_i) under standard
//! Gaussian patches, with its population squared loss in closed form.
//!
//! Weight sharing collapses the model to a single d-dimensional vector and a
//! strongly convex objective; the fully connected variant keeps k independent
//! blocks and develops an exponentially flat ring in the (w_2..w_k) slice.
//! All three derivatives (objective, gradient, Hessian) are exact closed
//! forms; Monte Carlo and finite differences serve as oracles in the tests.

use crate::error::{check_dims, Error, Result};
use crate::kernel::{cos_gaussian_mean, phi_map};
use crate::optim::WeightState;
use crate::vec_ops::{axpy, dist, norm, norm_sq, scaled, sub};
use nalgebra::DMatrix;

#[derive(Debug, Clone)]
pub struct CosineParams {
    pub k: usize,
    pub d: usize,
    pub c_k: f64,
    pub u0: Vec<f64>,
}

impl CosineParams {
    /// `c_k` defaults to its minimum admissible value 3 sqrt(k).
    pub fn new(k: usize, u0: Vec<f64>, c_k: Option<f64>) -> Result<Self> {
        if k < 1 {
            return Err(Error::InvalidParameter("k must be >= 1".into()));
        }
        let d = u0.len();
        if d == 0 || !u0.iter().all(|x| x.is_finite()) {
            return Err(Error::InvalidParameter(
                "u0 must be non-empty and finite".into(),
            ));
        }
        if norm(&u0) == 0.0 {
            return Err(Error::InvalidParameter("u0 must be nonzero".into()));
        }
        let min_ck = 3.0 * (k as f64).sqrt();
        let c_k = c_k.unwrap_or(min_ck);
        if c_k < min_ck - 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "c_k = {c_k} below the admissible minimum 3 sqrt(k) = {min_ck}"
            )));
        }
        Ok(CosineParams { k, d, c_k, u0 })
    }

    fn check_weights(&self, weights: &WeightState) -> Result<()> {
        match weights {
            WeightState::Ws(w0) => check_dims("cosine WS weights", self.d, w0.len()),
            WeightState::Fc(blocks) => {
                check_dims("cosine FC block count", self.k, blocks.len())?;
                for b in blocks {
                    check_dims("cosine FC block dim", self.d, b.len())?;
                }
                Ok(())
            }
        }
    }
}

/// E[(cos(w'x) - cos(v'x))^2] for standard Gaussian x:
/// 1 + exp(-2|w|^2)/2 + exp(-2|v|^2)/2 - exp(-|w-v|^2/2) - exp(-|w+v|^2/2).
pub fn cos_squared_diff_mean(w: &[f64], v: &[f64]) -> Result<f64> {
    check_dims("cos_squared_diff_mean", w.len(), v.len())?;
    let mut acc = 1.0;
    acc += 0.5 * cos_gaussian_mean(&scaled(w, 2.0));
    acc += 0.5 * cos_gaussian_mean(&scaled(v, 2.0));
    acc -= cos_gaussian_mean(&sub(w, v));
    acc -= cos_gaussian_mean(&crate::vec_ops::add(w, v));
    Ok(acc.max(0.0))
}

/// Population objective F(w) = E[(p_w - p_u0)^2] / 2.
pub fn objective(weights: &WeightState, params: &CosineParams) -> Result<f64> {
    params.check_weights(weights)?;
    let ck2 = params.c_k * params.c_k;
    match weights {
        WeightState::Ws(w0) => {
            let b = (params.k as f64).sqrt();
            let quad = 0.5 * ck2 * norm_sq(&sub(w0, &params.u0));
            let cos = 0.5 * cos_squared_diff_mean(&scaled(w0, b), &scaled(&params.u0, b))?;
            Ok(quad + cos)
        }
        WeightState::Fc(blocks) => {
            let w = flatten(blocks);
            let ubar = tile(&params.u0, params.k);
            let quad = 0.5 * ck2 * norm_sq(&sub(&blocks[0], &params.u0));
            let cos = 0.5 * cos_squared_diff_mean(&w, &ubar)?;
            Ok(quad + cos)
        }
    }
}

/// Gradient of the cosine part of the objective,
/// grad_w E[(cos(b w'z) - cos(b u'z))^2] / 2 = -(b/2) (phi(2bw) - phi(b(w-u)) - phi(b(w+u))).
fn cosine_part_gradient(w: &[f64], u: &[f64], b: f64) -> Vec<f64> {
    let two_bw = scaled(w, 2.0 * b);
    let diff = scaled(&sub(w, u), b);
    let sum = scaled(&crate::vec_ops::add(w, u), b);
    let mut g = phi_map(&two_bw);
    axpy(&mut g, -1.0, &phi_map(&diff));
    axpy(&mut g, -1.0, &phi_map(&sum));
    scaled(&g, -0.5 * b)
}

/// Exact gradient of the objective, shaped like the weights.
pub fn gradient(weights: &WeightState, params: &CosineParams) -> Result<WeightState> {
    params.check_weights(weights)?;
    let ck2 = params.c_k * params.c_k;
    match weights {
        WeightState::Ws(w0) => {
            let b = (params.k as f64).sqrt();
            let mut g = cosine_part_gradient(w0, &params.u0, b);
            axpy(&mut g, ck2, &sub(w0, &params.u0));
            Ok(WeightState::Ws(g))
        }
        WeightState::Fc(blocks) => {
            let w = flatten(blocks);
            let ubar = tile(&params.u0, params.k);
            let flat = cosine_part_gradient(&w, &ubar, 1.0);
            let mut out: Vec<Vec<f64>> =
                flat.chunks(params.d).map(|chunk| chunk.to_vec()).collect();
            axpy(&mut out[0], ck2, &sub(&blocks[0], &params.u0));
            Ok(WeightState::Fc(out))
        }
    }
}

/// Norm of the gradient restricted to blocks 2..k of an FC weight state — the
/// quantity that collapses exponentially inside the ring.
pub fn tail_gradient_norm(weights: &WeightState, params: &CosineParams) -> Result<f64> {
    let grad = gradient(weights, params)?;
    match grad {
        WeightState::Fc(blocks) => Ok(blocks[1..].iter().map(|b| norm_sq(b)).sum::<f64>().sqrt()),
        WeightState::Ws(_) => Err(Error::InvalidParameter(
            "tail gradient requires FC weights".into(),
        )),
    }
}

/// Closed-form envelope on the tail gradient norm inside the ring, evaluated
/// at hat(w) = (w_2..w_k) against hat(u) = k-1 copies of u0:
/// (exp(-|hw|^2/2) |hw| + exp(-|hw-hu|^2/2) |hw-hu| + exp(-|hw+hu|^2/2) |hw+hu|) / 2.
pub fn tail_gradient_envelope(blocks: &[Vec<f64>], params: &CosineParams) -> f64 {
    let hw = flatten(&blocks[1..]);
    let hu = tile(&params.u0, params.k - 1);
    let term = |v: Vec<f64>| -> f64 { (-0.5 * norm_sq(&v)).exp() * norm(&v) };
    0.5 * (term(hw.clone()) + term(sub(&hw, &hu)) + term(crate::vec_ops::add(&hw, &hu)))
}

/// Hessian of the WS objective at w0: c_k^2 I plus the cosine-part Hessian,
/// -(b^2) [ e^{-2b^2|w|^2} (I - 4b^2 ww') - e^{-b^2|w-u|^2/2} (I - b^2 (w-u)(w-u)')/2
///          - e^{-b^2|w+u|^2/2} (I - b^2 (w+u)(w+u)')/2 ] with b = sqrt(k).
pub fn hessian_ws(w0: &[f64], params: &CosineParams) -> Result<DMatrix<f64>> {
    check_dims("cosine WS weights", params.d, w0.len())?;
    let d = params.d;
    let b = (params.k as f64).sqrt();
    let b2 = b * b;
    let u0 = &params.u0;

    let mut h = DMatrix::<f64>::identity(d, d) * (params.c_k * params.c_k);
    // Each phi-term contributes coeff * e^{-|a|^2/2} (I - a a') with a in
    // {2bw, b(w-u), b(w+u)} and coefficients {-b^2, b^2/2, b^2/2}.
    let mut add_term = |a: Vec<f64>, coeff: f64| {
        let e = (-0.5 * norm_sq(&a)).exp();
        for i in 0..d {
            for j in 0..d {
                let idm = if i == j { 1.0 } else { 0.0 };
                h[(i, j)] += coeff * e * (idm - a[i] * a[j]);
            }
        }
    };
    add_term(scaled(w0, 2.0 * b), -b2);
    add_term(scaled(&sub(w0, u0), b), 0.5 * b2);
    add_term(scaled(&crate::vec_ops::add(w0, u0), b), 0.5 * b2);
    Ok(h)
}

/// Extreme eigenvalues (min, max) of the WS Hessian at w0.
pub fn hessian_ws_eigen_range(w0: &[f64], params: &CosineParams) -> Result<(f64, f64)> {
    let h = hessian_ws(w0, params)?;
    let eig = h.symmetric_eigen();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in eig.eigenvalues.iter() {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    Ok((lo, hi))
}

/// Analytic upper bound on the largest Hessian eigenvalue over all w0,
/// c_k^2 + 2k + sqrt(k); its reciprocal is the convergence-rate step size.
pub fn ws_step_size(params: &CosineParams) -> f64 {
    let k = params.k as f64;
    1.0 / (params.c_k * params.c_k + 2.0 * k + k.sqrt())
}

/// Distance of an FC iterate to the teacher point (u0 duplicated k times).
pub fn fc_distance_to_teacher(blocks: &[Vec<f64>], u0: &[f64]) -> f64 {
    blocks
        .iter()
        .map(|b| {
            let e = dist(b, u0);
            e * e
        })
        .sum::<f64>()
        .sqrt()
}

pub(crate) fn flatten(blocks: &[Vec<f64>]) -> Vec<f64> {
    let mut out = Vec::with_capacity(blocks.iter().map(Vec::len).sum());
    for b in blocks {
        out.extend_from_slice(b);
    }
    out
}

pub(crate) fn tile(v: &[f64], times: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(v.len() * times);
    for _ in 0..times {
        out.extend_from_slice(v);
    }
    out
}
