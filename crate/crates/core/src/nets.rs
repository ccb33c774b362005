//! Teacher–student SGD testbed: a tanh feature layer (shared or per-patch
//! weights) composed with either the known target head or a learnable
//! 50-unit ReLU head, trained with minibatch SGD on the squared loss.
//!
//! The teacher is h*(x) = (tanh(u0'x_1), ..., tanh(u0'x_k)) composed with a
//! target of low frequency (z_1), high frequency (z_1 ... z_5), or their sum.
//! Reported losses are minibatch mean squared errors; parameter updates
//! follow the gradient of (f - y)^2 / 2 per example.

use crate::error::{Error, Result};
use crate::kernel::mc::{mc_expect, KernelEstimate};
use crate::optim::WeightState;
use crate::vec_ops::{axpy, dot, norm, scaled};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::io::BufRead;
use std::path::Path;

pub const HIDDEN_UNITS: usize = 50;
/// The high-frequency target multiplies the first five feature coordinates.
pub const HIGH_DEGREE: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GMode {
    Low,
    High,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arch {
    Ws,
    Fc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeadMode {
    Known,
    Learnable,
}

#[derive(Debug, Clone)]
pub struct TargetSpec {
    pub gmode: GMode,
    pub u0: Vec<f64>,
}

impl TargetSpec {
    pub fn new(gmode: GMode, u0: Vec<f64>, k: usize) -> Result<Self> {
        if matches!(gmode, GMode::High | GMode::Both) && k < HIGH_DEGREE {
            return Err(Error::InvalidParameter(format!(
                "high mode requires k >= {HIGH_DEGREE}, got k = {k}"
            )));
        }
        Ok(TargetSpec { gmode, u0 })
    }
}

/// The learnable head: one hidden ReLU layer of 50 units and a linear output.
#[derive(Debug, Clone)]
pub struct Mlp {
    /// hidden x k, row-major.
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
    pub inputs: usize,
}

impl Mlp {
    fn zeros_like(&self) -> Mlp {
        Mlp {
            w1: vec![0.0; self.w1.len()],
            b1: vec![0.0; self.b1.len()],
            w2: vec![0.0; self.w2.len()],
            b2: 0.0,
            inputs: self.inputs,
        }
    }
}

#[derive(Debug, Clone)]
pub enum Head {
    Known(GMode),
    Learnable(Mlp),
}

#[derive(Debug, Clone)]
pub struct NetParams {
    pub conv: WeightState,
    pub head: Head,
    pub k: usize,
    pub d: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DataSource {
    Gaussian,
    File,
}

/// n examples of k patches in d dimensions, stored example-major then
/// patch-major.
#[derive(Debug, Clone)]
pub struct PatchDataset {
    pub n: usize,
    pub k: usize,
    pub d: usize,
    pub data: Vec<f64>,
    pub source: DataSource,
}

impl PatchDataset {
    pub fn example(&self, i: usize) -> &[f64] {
        let w = self.k * self.d;
        &self.data[i * w..(i + 1) * w]
    }
}

/// i.i.d. standard normal patches, reproducible from the seed.
pub fn sample_gaussian_batch(n: usize, k: usize, d: usize, seed: u64) -> PatchDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..n * k * d)
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    PatchDataset {
        n,
        k,
        d,
        data,
        source: DataSource::Gaussian,
    }
}

/// Load a patch CSV: a `#k=<k>,d=<d>` header line, then one example per row
/// as k*d comma-separated floats in patch-major order. Every patch is
/// centered to zero mean on load.
pub fn load_patch_file(path: &Path) -> Result<PatchDataset> {
    let display = path.display().to_string();
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: display.clone(),
        source,
    })?;
    let reader = std::io::BufReader::new(file);
    let mut lines = reader.lines().enumerate();

    let (_, header) = lines.next().ok_or_else(|| Error::Parse {
        path: display.clone(),
        row: 1,
        message: "empty file; expected a #k=<k>,d=<d> header".into(),
    })?;
    let header = header.map_err(|source| Error::Io {
        path: display.clone(),
        source,
    })?;
    let (k, d) = parse_header(&header).ok_or_else(|| Error::Parse {
        path: display.clone(),
        row: 1,
        message: format!("malformed header {header:?}; expected #k=<k>,d=<d>"),
    })?;

    let mut data = Vec::new();
    let mut n = 0;
    for (idx, line) in lines {
        let row = idx + 1; // 1-based file line number
        let line = line.map_err(|source| Error::Io {
            path: display.clone(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != k * d {
            return Err(Error::Parse {
                path: display,
                row,
                message: format!("expected {} fields, found {}", k * d, fields.len()),
            });
        }
        let start = data.len();
        for f in fields {
            let v: f64 = f.trim().parse().map_err(|_| Error::Parse {
                path: display.clone(),
                row,
                message: format!("non-numeric field {f:?}"),
            })?;
            data.push(v);
        }
        // Zero-mean normalization, per patch.
        for patch in data[start..].chunks_mut(d) {
            let mean = patch.iter().sum::<f64>() / d as f64;
            for v in patch.iter_mut() {
                *v -= mean;
            }
        }
        n += 1;
    }
    Ok(PatchDataset {
        n,
        k,
        d,
        data,
        source: DataSource::File,
    })
}

fn parse_header(line: &str) -> Option<(usize, usize)> {
    let rest = line.strip_prefix("#k=")?;
    let (k_str, d_part) = rest.split_once(",d=")?;
    Some((k_str.trim().parse().ok()?, d_part.trim().parse().ok()?))
}

fn g_eval(gmode: GMode, z: &[f64]) -> f64 {
    match gmode {
        GMode::Low => z[0],
        GMode::High => z[..HIGH_DEGREE].iter().product(),
        GMode::Both => z[0] + z[..HIGH_DEGREE].iter().product::<f64>(),
    }
}

/// Gradient of g with respect to its feature inputs.
fn g_grad(gmode: GMode, z: &[f64], out: &mut [f64]) {
    out.iter_mut().for_each(|v| *v = 0.0);
    if matches!(gmode, GMode::Low | GMode::Both) {
        out[0] += 1.0;
    }
    if matches!(gmode, GMode::High | GMode::Both) {
        for (i, o) in out.iter_mut().take(HIGH_DEGREE).enumerate() {
            let mut p = 1.0;
            for (j, zj) in z[..HIGH_DEGREE].iter().enumerate() {
                if j != i {
                    p *= zj;
                }
            }
            *o += p;
        }
    }
}

/// Teacher value g*(tanh(u0'x_1), ..., tanh(u0'x_k)) at one stacked example.
pub fn target_eval(spec: &TargetSpec, x: &[f64], k: usize, d: usize) -> Result<f64> {
    if matches!(spec.gmode, GMode::High | GMode::Both) && k < HIGH_DEGREE {
        return Err(Error::InvalidParameter(format!(
            "high mode requires k >= {HIGH_DEGREE}, got k = {k}"
        )));
    }
    let z: Vec<f64> = (0..k)
        .map(|l| dot(&spec.u0, &x[l * d..(l + 1) * d]).tanh())
        .collect();
    Ok(g_eval(spec.gmode, &z))
}

fn features(params: &NetParams, x: &[f64]) -> Vec<f64> {
    let d = params.d;
    match &params.conv {
        WeightState::Ws(w0) => (0..params.k)
            .map(|l| dot(w0, &x[l * d..(l + 1) * d]).tanh())
            .collect(),
        WeightState::Fc(blocks) => blocks
            .iter()
            .enumerate()
            .map(|(l, w)| dot(w, &x[l * d..(l + 1) * d]).tanh())
            .collect(),
    }
}

fn forward_from_features(head: &Head, z: &[f64]) -> f64 {
    match head {
        Head::Known(gmode) => g_eval(*gmode, z),
        Head::Learnable(mlp) => {
            let mut acc = mlp.b2;
            for h in 0..HIDDEN_UNITS {
                let mut pre = mlp.b1[h];
                for (j, zj) in z.iter().enumerate() {
                    pre += mlp.w1[h * mlp.inputs + j] * zj;
                }
                if pre > 0.0 {
                    acc += mlp.w2[h] * pre;
                }
            }
            acc
        }
    }
}

/// Student prediction at one stacked example.
pub fn net_forward(params: &NetParams, x: &[f64]) -> f64 {
    forward_from_features(&params.head, &features(params, x))
}

/// Gradient of (net_forward(x) - y)^2 / 2 with respect to every trainable
/// parameter, shaped like the parameters, given the residual f - y.
pub fn net_backward(params: &NetParams, x: &[f64], residual: f64) -> NetParams {
    let z = features(params, x);
    backward_from_features(params, x, &z, residual)
}

fn backward_from_features(params: &NetParams, x: &[f64], z: &[f64], residual: f64) -> NetParams {
    let d = params.d;
    let k = params.k;
    let mut dz = vec![0.0; k];
    let head_grad = match &params.head {
        Head::Known(gmode) => {
            g_grad(*gmode, z, &mut dz);
            Head::Known(*gmode)
        }
        Head::Learnable(mlp) => {
            let mut grad = mlp.zeros_like();
            for h in 0..HIDDEN_UNITS {
                let mut pre = mlp.b1[h];
                for (j, zj) in z.iter().enumerate() {
                    pre += mlp.w1[h * mlp.inputs + j] * zj;
                }
                // ReLU subgradient at exactly 0 is taken as 0.
                if pre > 0.0 {
                    grad.w2[h] = residual * pre;
                    let dh = residual * mlp.w2[h];
                    grad.b1[h] = dh;
                    for (j, zj) in z.iter().enumerate() {
                        grad.w1[h * mlp.inputs + j] = dh * zj;
                        dz[j] += mlp.w1[h * mlp.inputs + j] * mlp.w2[h] * residual;
                    }
                }
            }
            grad.b2 = residual;
            Head::Learnable(grad)
        }
    };
    // dz carries the residual already for the learnable head; the known
    // head's g_grad is residual-free. Unify to d(loss)/d(preactivation).
    let conv_grad = match &params.conv {
        WeightState::Ws(_) => {
            let mut g = vec![0.0; d];
            for l in 0..k {
                let factor = pre_activation_grad(&params.head, residual, dz[l], z[l]);
                axpy(&mut g, factor, &x[l * d..(l + 1) * d]);
            }
            WeightState::Ws(g)
        }
        WeightState::Fc(_) => WeightState::Fc(
            (0..k)
                .map(|l| {
                    let factor = pre_activation_grad(&params.head, residual, dz[l], z[l]);
                    scaled(&x[l * d..(l + 1) * d], factor)
                })
                .collect(),
        ),
    };
    NetParams {
        conv: conv_grad,
        head: head_grad,
        k,
        d,
    }
}

fn pre_activation_grad(head: &Head, residual: f64, dz: f64, z: f64) -> f64 {
    let upstream = match head {
        Head::Known(_) => residual * dz,
        Head::Learnable(_) => dz, // residual already folded in
    };
    upstream * (1.0 - z * z)
}

/// Everything one training run depends on; runs are a pure function of this.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub arch: Arch,
    pub gmode: GMode,
    pub head: HeadMode,
    pub k: usize,
    pub d: usize,
    pub u0_norm: f64,
    pub eta: f64,
    pub batch: usize,
    pub iters: usize,
    pub seed: u64,
    /// None trains on fresh Gaussian batches; Some cycles through the file data.
    pub dataset: Option<PatchDataset>,
}

impl Experiment {
    pub fn validate(&self) -> Result<()> {
        if matches!(self.gmode, GMode::High | GMode::Both) && self.k < HIGH_DEGREE {
            return Err(Error::InvalidParameter(format!(
                "high mode requires k >= {HIGH_DEGREE}, got k = {}",
                self.k
            )));
        }
        if self.batch == 0 || self.iters == 0 || self.k == 0 || self.d == 0 {
            return Err(Error::InvalidParameter(
                "batch, iters, k, d must all be positive".into(),
            ));
        }
        if self.eta <= 0.0 || !self.eta.is_finite() || self.u0_norm <= 0.0 {
            return Err(Error::InvalidParameter(
                "eta and u0_norm must be positive".into(),
            ));
        }
        if let Some(ds) = &self.dataset {
            if ds.k != self.k || ds.d != self.d {
                return Err(Error::InvalidParameter(format!(
                    "dataset is k={}, d={} but the experiment wants k={}, d={}",
                    ds.k, ds.d, self.k, self.d
                )));
            }
            if ds.n == 0 {
                return Err(Error::InvalidParameter("dataset has no examples".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SgdOutcome {
    /// Minibatch mean squared error per iteration, plus one final evaluation:
    /// length = iters + 1.
    pub losses: Vec<f64>,
    pub params: NetParams,
    pub target: TargetSpec,
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Teacher vector: standard normal direction rescaled to the requested norm
/// (stream 0 of the seed).
pub fn sample_teacher(d: usize, u0_norm: f64, seed: u64) -> Vec<f64> {
    let mut rng = stream_rng(seed, 0);
    let mut u0: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
    let n = norm(&u0);
    u0 = scaled(&u0, u0_norm / n);
    u0
}

/// Student initialization (stream 1): conv entries N(0, 1/d) so blocks have
/// unit expected norm; head entries uniform in +-1/sqrt(fan_in).
pub fn init_net(
    arch: Arch,
    head: HeadMode,
    k: usize,
    d: usize,
    gmode: GMode,
    seed: u64,
) -> NetParams {
    let mut rng = stream_rng(seed, 1);
    let scale = 1.0 / (d as f64).sqrt();
    let conv_vec = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        (0..d)
            .map(|_| {
                let g: f64 = StandardNormal.sample(rng);
                g * scale
            })
            .collect()
    };
    let conv = match arch {
        Arch::Ws => WeightState::Ws(conv_vec(&mut rng)),
        Arch::Fc => WeightState::Fc((0..k).map(|_| conv_vec(&mut rng)).collect()),
    };
    let head = match head {
        HeadMode::Known => Head::Known(gmode),
        HeadMode::Learnable => {
            let lim1 = 1.0 / (k as f64).sqrt();
            let lim2 = 1.0 / (HIDDEN_UNITS as f64).sqrt();
            Head::Learnable(Mlp {
                w1: (0..HIDDEN_UNITS * k)
                    .map(|_| rng.random_range(-lim1..lim1))
                    .collect(),
                b1: (0..HIDDEN_UNITS)
                    .map(|_| rng.random_range(-lim1..lim1))
                    .collect(),
                w2: (0..HIDDEN_UNITS)
                    .map(|_| rng.random_range(-lim2..lim2))
                    .collect(),
                b2: rng.random_range(-lim2..lim2),
                inputs: k,
            })
        }
    };
    NetParams { conv, head, k, d }
}

fn apply_update(params: &mut NetParams, grad: &NetParams, step: f64) {
    match (&mut params.conv, &grad.conv) {
        (WeightState::Ws(w), WeightState::Ws(g)) => axpy(w, -step, g),
        (WeightState::Fc(ws), WeightState::Fc(gs)) => {
            for (w, g) in ws.iter_mut().zip(gs) {
                axpy(w, -step, g);
            }
        }
        _ => unreachable!(),
    }
    if let (Head::Learnable(mlp), Head::Learnable(g)) = (&mut params.head, &grad.head) {
        axpy(&mut mlp.w1, -step, &g.w1);
        axpy(&mut mlp.b1, -step, &g.b1);
        axpy(&mut mlp.w2, -step, &g.w2);
        mlp.b2 -= step * g.b2;
    }
}

/// Minibatch SGD on the squared loss. Gaussian data draws a fresh batch per
/// iteration (stream 2 + t); file data cycles through the examples in order.
/// The loss curve records the pre-update minibatch MSE for iterations
/// 0..iters-1 and one final held-out evaluation.
pub fn sgd_train(exp: &Experiment) -> Result<SgdOutcome> {
    exp.validate()?;
    let target = TargetSpec::new(
        exp.gmode,
        sample_teacher(exp.d, exp.u0_norm, exp.seed),
        exp.k,
    )?;
    let mut params = init_net(exp.arch, exp.head, exp.k, exp.d, exp.gmode, exp.seed);
    let mut losses = Vec::with_capacity(exp.iters + 1);
    let width = exp.k * exp.d;
    let mut cursor = 0usize;
    let mut batch = vec![0.0f64; exp.batch * width];

    for t in 0..=exp.iters {
        // Materialize the batch for this iteration.
        match &exp.dataset {
            None => {
                let mut rng = stream_rng(exp.seed, 2 + t as u64);
                for v in batch.iter_mut() {
                    *v = StandardNormal.sample(&mut rng);
                }
            }
            Some(ds) => {
                for b in 0..exp.batch {
                    let ex = ds.example((cursor + b) % ds.n);
                    batch[b * width..(b + 1) * width].copy_from_slice(ex);
                }
                cursor = (cursor + exp.batch) % ds.n;
            }
        }

        let mut loss = 0.0;
        let mut grad_acc: Option<NetParams> = None;
        for b in 0..exp.batch {
            let x = &batch[b * width..(b + 1) * width];
            let y = target_eval(&target, x, exp.k, exp.d)?;
            let z = features(&params, x);
            let r = forward_from_features(&params.head, &z) - y;
            loss += r * r;
            if t < exp.iters {
                let g = backward_from_features(&params, x, &z, r);
                match &mut grad_acc {
                    None => grad_acc = Some(g),
                    Some(acc) => accumulate(acc, &g),
                }
            }
        }
        loss /= exp.batch as f64;
        if !loss.is_finite() {
            return Err(Error::Diverged {
                iteration: t,
                quantity: "minibatch loss",
            });
        }
        losses.push(loss);
        if t < exp.iters {
            let g = grad_acc.expect("non-empty batch");
            apply_update(&mut params, &g, exp.eta / exp.batch as f64);
        }
    }
    Ok(SgdOutcome {
        losses,
        params,
        target,
    })
}

fn accumulate(acc: &mut NetParams, g: &NetParams) {
    match (&mut acc.conv, &g.conv) {
        (WeightState::Ws(a), WeightState::Ws(b)) => axpy(a, 1.0, b),
        (WeightState::Fc(aa), WeightState::Fc(bb)) => {
            for (a, b) in aa.iter_mut().zip(bb) {
                axpy(a, 1.0, b);
            }
        }
        _ => unreachable!(),
    }
    if let (Head::Learnable(a), Head::Learnable(b)) = (&mut acc.head, &g.head) {
        axpy(&mut a.w1, 1.0, &b.w1);
        axpy(&mut a.b1, 1.0, &b.b1);
        axpy(&mut a.w2, 1.0, &b.w2);
        a.b2 += b.b2;
    }
}

/// Monte Carlo estimate of E[(g* o h*)^2], the scale that normalizes the
/// final losses. Only the teacher norm matters: each feature is
/// tanh(|u0| y_i) with independent standard Gaussian y_i.
pub fn baseline_second_moment(gmode: GMode, u0_norm: f64, n: u64, seed: u64) -> KernelEstimate {
    let dims = HIGH_DEGREE;
    mc_expect(
        move |y| {
            let z: Vec<f64> = y.iter().map(|v| (u0_norm * v).tanh()).collect();
            let g = g_eval(gmode, &z);
            g * g
        },
        dims,
        n,
        seed,
    )
}
