//! Deterministic (projected) gradient descent over the analytic models, with
//! per-iteration instrumentation of the quantities the convergence and
//! hardness statements are about: loss, gradient norm, angle to the teacher,
//! block norms, and distance to the optimum.

use crate::cosine::{self, CosineParams};
use crate::error::{Error, Result};
use crate::parity::{self, ParityMode, ParityParams};
use crate::vec_ops::{angle, axpy, dist, is_finite, norm, scaled};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// The optimization variable: one shared vector or k independent blocks.
#[derive(Debug, Clone, PartialEq)]
pub enum WeightState {
    Ws(Vec<f64>),
    Fc(Vec<Vec<f64>>),
}

impl WeightState {
    pub fn block_norms(&self) -> Vec<f64> {
        match self {
            WeightState::Ws(w0) => vec![norm(w0)],
            WeightState::Fc(blocks) => blocks.iter().map(|b| norm(b)).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        match self {
            WeightState::Ws(w0) => is_finite(w0),
            WeightState::Fc(blocks) => blocks.iter().all(|b| is_finite(b)),
        }
    }
}

/// Which analytic objective a GD run optimizes.
#[derive(Debug, Clone)]
pub enum ModelSpec {
    Cosine(CosineParams),
    Parity {
        params: ParityParams,
        mode: ParityMode,
    },
}

impl ModelSpec {
    pub fn teacher(&self) -> &[f64] {
        match self {
            ModelSpec::Cosine(p) => &p.u0,
            ModelSpec::Parity { params, .. } => &params.u0,
        }
    }

    pub fn loss(&self, weights: &WeightState) -> Result<f64> {
        match self {
            ModelSpec::Cosine(p) => cosine::objective(weights, p),
            ModelSpec::Parity { params, mode } => parity::objective(weights, params, *mode),
        }
    }

    pub fn gradient(&self, weights: &WeightState) -> Result<WeightState> {
        match self {
            ModelSpec::Cosine(p) => cosine::gradient(weights, p),
            ModelSpec::Parity { params, mode } => match weights {
                WeightState::Ws(w0) => Ok(WeightState::Ws(parity::ws_gradient(w0, params, *mode)?)),
                WeightState::Fc(_) => Ok(WeightState::Fc(
                    parity::fc_gradient(weights, params, *mode)?.gradient(),
                )),
            },
        }
    }
}

/// Learning-rate rule; every rate must lie in (0, 1].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum StepRule {
    Constant(f64),
    Schedule(Vec<f64>),
}

impl StepRule {
    pub fn at(&self, t: usize) -> f64 {
        match self {
            StepRule::Constant(eta) => *eta,
            StepRule::Schedule(s) => s[t.min(s.len() - 1)],
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match self {
            StepRule::Constant(eta) => *eta > 0.0 && *eta <= 1.0,
            StepRule::Schedule(s) => !s.is_empty() && s.iter().all(|e| *e > 0.0 && *e <= 1.0),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(
                "every learning rate must lie in (0, 1]".into(),
            ))
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GdConfig {
    pub step: StepRule,
    pub max_iters: usize,
    /// Project the iterate onto this ball after every step (per block for FC).
    pub projection_radius: Option<f64>,
    /// Stop once the gradient norm falls below this.
    pub stop_grad_norm: f64,
    /// Stop once the distance to the teacher falls below this.
    pub stop_distance: f64,
    /// Record every n-th iteration (the initial and final states always).
    pub record_every: usize,
    pub seed: u64,
}

impl Default for GdConfig {
    fn default() -> Self {
        GdConfig {
            step: StepRule::Constant(0.5),
            max_iters: 10_000,
            projection_radius: None,
            stop_grad_norm: 1e-8,
            stop_distance: 0.0,
            record_every: 1,
            seed: 0,
        }
    }
}

impl GdConfig {
    pub fn validate(&self) -> Result<()> {
        self.step.validate()?;
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter("max_iters must be >= 1".into()));
        }
        if let Some(r) = self.projection_radius {
            if r <= 0.0 || !r.is_finite() {
                return Err(Error::InvalidParameter(
                    "projection radius must be positive".into(),
                ));
            }
        }
        if self.record_every == 0 {
            return Err(Error::InvalidParameter("record_every must be >= 1".into()));
        }
        Ok(())
    }
}

/// One instrumented iterate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub iter: usize,
    pub loss: f64,
    pub grad_norm: f64,
    /// Angle to the teacher; shared-weight runs only.
    pub alpha: Option<f64>,
    pub weight_norms: Vec<f64>,
    pub dist_to_teacher: f64,
}

#[derive(Debug, Clone)]
pub struct GdRun {
    pub trajectory: Vec<TrajectoryRecord>,
    pub final_state: WeightState,
    pub iterations: usize,
    pub converged: bool,
}

/// Scale `w` back onto the ball of the given radius; identity inside, and the
/// direction (hence any angle to a fixed vector) is unchanged.
pub fn project_to_ball(w: &[f64], radius: f64) -> Vec<f64> {
    let n = norm(w);
    if n <= radius {
        w.to_vec()
    } else {
        scaled(w, radius / n)
    }
}

fn project_state(w: &mut WeightState, radius: Option<f64>) {
    let Some(r) = radius else { return };
    match w {
        WeightState::Ws(w0) => *w0 = project_to_ball(w0, r),
        WeightState::Fc(blocks) => {
            for b in blocks.iter_mut() {
                *b = project_to_ball(b, r);
            }
        }
    }
}

/// Fully connected initialization with every coordinate drawn uniformly from
/// {+c, -c}; each block then has norm exactly c sqrt(d).
pub fn rademacher_init(d: usize, k: usize, c: f64, seed: u64) -> WeightState {
    assert!(c > 0.0, "rademacher scale must be positive");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let blocks = (0..k)
        .map(|_| {
            (0..d)
                .map(|_| if rng.random::<bool>() { c } else { -c })
                .collect()
        })
        .collect();
    WeightState::Fc(blocks)
}

fn measure(
    model: &ModelSpec,
    weights: &WeightState,
    iter: usize,
) -> Result<(TrajectoryRecord, WeightState)> {
    let loss = model.loss(weights)?;
    if !loss.is_finite() {
        return Err(Error::Diverged {
            iteration: iter,
            quantity: "loss",
        });
    }
    let grad = model.gradient(weights)?;
    if !grad.is_finite() {
        return Err(Error::Diverged {
            iteration: iter,
            quantity: "gradient",
        });
    }
    let u0 = model.teacher();
    let (grad_norm, alpha, dist_to_teacher) = match (weights, &grad) {
        (WeightState::Ws(w0), WeightState::Ws(g)) => {
            let a = if norm(w0) > 0.0 {
                Some(angle(w0, u0))
            } else {
                None
            };
            (norm(g), a, dist(w0, u0))
        }
        (WeightState::Fc(blocks), WeightState::Fc(gs)) => {
            let gn = gs.iter().map(|g| norm(g).powi(2)).sum::<f64>().sqrt();
            (gn, None, cosine::fc_distance_to_teacher(blocks, u0))
        }
        _ => unreachable!("gradient shape always matches the weight shape"),
    };
    Ok((
        TrajectoryRecord {
            iter,
            loss,
            grad_norm,
            alpha,
            weight_norms: weights.block_norms(),
            dist_to_teacher,
        },
        grad,
    ))
}

/// Projected gradient descent: w <- project(w - eta_t grad F(w)).
///
/// The trajectory always contains the initial state; with `record_every = 1`
/// its length is the number of executed iterations plus one. Runs are a pure
/// function of (model, init, config).
pub fn gd_run(model: &ModelSpec, init: &WeightState, config: &GdConfig) -> Result<GdRun> {
    config.validate()?;
    let mut weights = init.clone();
    project_state(&mut weights, config.projection_radius);
    let mut trajectory = Vec::new();
    let mut iterations = 0;
    let mut converged = false;

    for t in 0..=config.max_iters {
        let (record, grad) = measure(model, &weights, t)?;
        let stop = record.grad_norm < config.stop_grad_norm
            || record.dist_to_teacher < config.stop_distance;
        if t % config.record_every == 0 || stop || t == config.max_iters {
            trajectory.push(record);
        }
        if stop {
            converged = true;
            break;
        }
        if t == config.max_iters {
            break;
        }
        let eta = config.step.at(t);
        match (&mut weights, &grad) {
            (WeightState::Ws(w0), WeightState::Ws(g)) => axpy(w0, -eta, g),
            (WeightState::Fc(blocks), WeightState::Fc(gs)) => {
                for (b, g) in blocks.iter_mut().zip(gs) {
                    axpy(b, -eta, g);
                }
            }
            _ => unreachable!(),
        }
        project_state(&mut weights, config.projection_radius);
        iterations = t + 1;
    }

    Ok(GdRun {
        trajectory,
        final_state: weights,
        iterations,
        converged,
    })
}
