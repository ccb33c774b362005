//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line
//! (run with `cargo test --test acceptance -- --nocapture` to see them).
//!
//! Every tolerance is pinned here, not computed. Monte Carlo comparisons use
//! fixed seeds so the whole suite is deterministic.

use convsep_core::cosine::{self, CosineParams};
use convsep_core::kernel::mc::{mc_expect, mc_expect_vec};
use convsep_core::kernel::{self, erf, erf_prime};
use convsep_core::nets::{
    self, baseline_second_moment, net_backward, net_forward, sgd_train, Arch, Experiment, GMode,
    HeadMode,
};
use convsep_core::oracles::{fd_gradient, rng_direction, rng_vec, seeded_rng};
use convsep_core::parity::{self, ParityMode, ParityParams};
use convsep_core::suite;
use convsep_core::vec_ops::{dist, dot, norm, scaled};
use convsep_core::WeightState;
use rand::Rng;

const MC_SAMPLES: u64 = 1_000_000;

fn verdict(criterion: &str, passed: bool, detail: &str) {
    println!(
        "ACCEPTANCE {criterion}: {} ({detail})",
        if passed { "PASS" } else { "FAIL" }
    );
    assert!(passed, "{criterion} failed: {detail}");
}

/// z-score of a scalar estimate against its oracle value.
fn sigmas(value: f64, oracle: f64, se: f64) -> f64 {
    (value - oracle).abs() / se.max(1e-300)
}

// ---------------------------------------------------------------------------
// Criterion 1: kernel closed forms and quadratures vs the MC oracle,
// 100 cases per operation, n = 1e6, within 3 standard errors.
// Vector-valued operations compare |quad - mc| against 3 |se| in the
// Euclidean norm, the aggregate form of the same per-component budget.
// ---------------------------------------------------------------------------

#[test]
fn c1_kernel_mc_agreement() {
    let mut rng = seeded_rng(20_240_001);
    let mut max_z = 0.0f64;
    let cases = 100;

    for case in 0..cases {
        let d = 2 + case % 5;

        // v_sigma
        let u = scaled(&rng_direction(&mut rng, d), rng.random_range(0.2..2.5));
        let v = scaled(&rng_direction(&mut rng, d), rng.random_range(0.2..2.5));
        let closed = kernel::v_sigma(&u, &v).unwrap();
        let est = {
            let (u, v) = (u.clone(), v.clone());
            mc_expect(
                move |x| erf(dot(&u, x)) * erf(dot(&v, x)),
                d,
                MC_SAMPLES,
                5_009_000 + case as u64,
            )
        };
        max_z = max_z.max(sigmas(est.value, closed, est.std_error));

        // cos_gaussian_mean
        let z = scaled(&rng_direction(&mut rng, d), rng.random_range(0.0..2.5));
        let closed = kernel::cos_gaussian_mean(&z);
        let est = {
            let z = z.clone();
            mc_expect(
                move |x| dot(&z, x).cos(),
                d,
                MC_SAMPLES,
                5_019_000 + case as u64,
            )
        };
        max_z = max_z.max(sigmas(est.value, closed, est.std_error));

        // cos_squared_diff_mean
        let w = scaled(&rng_direction(&mut rng, d), rng.random_range(0.0..2.0));
        let v2 = scaled(&rng_direction(&mut rng, d), rng.random_range(0.0..2.0));
        let closed = cosine::cos_squared_diff_mean(&w, &v2).unwrap();
        let est = {
            let (w, v2) = (w.clone(), v2.clone());
            mc_expect(
                move |x| {
                    let dc = dot(&w, x).cos() - dot(&v2, x).cos();
                    dc * dc
                },
                d,
                MC_SAMPLES,
                5_029_000 + case as u64,
            )
        };
        max_z = max_z.max(sigmas(est.value, closed, est.std_error));

        // self_term (vector): |quad - mc| <= 3 |se|
        let ws = scaled(&rng_direction(&mut rng, d), rng.random_range(0.1..2.5));
        let quad = parity::self_term(&ws);
        let est = {
            let ws = ws.clone();
            mc_expect_vec(
                move |x, out| {
                    let zz = dot(&ws, x);
                    let f = erf(zz) * erf_prime(zz);
                    for (o, xi) in out.iter_mut().zip(x) {
                        *o = f * xi;
                    }
                },
                d,
                d,
                MC_SAMPLES,
                5_039_000 + case as u64,
            )
        };
        let z_vec = dist(&quad, &est.values) / norm(&est.std_errors).max(1e-300);
        max_z = max_z.max(z_vec);

        // cross_term (vector)
        let uu = scaled(&rng_direction(&mut rng, d), rng.random_range(0.1..2.5));
        let wc = scaled(&rng_direction(&mut rng, d), rng.random_range(0.0..2.5));
        let quad = parity::cross_term(&uu, &wc).unwrap();
        let est = {
            let (uu, wc) = (uu.clone(), wc.clone());
            mc_expect_vec(
                move |x, out| {
                    let f = erf(dot(&uu, x)) * erf_prime(dot(&wc, x));
                    for (o, xi) in out.iter_mut().zip(x) {
                        *o = f * xi;
                    }
                },
                d,
                d,
                MC_SAMPLES,
                5_049_000 + case as u64,
            )
        };
        let z_vec = dist(&quad, &est.values) / norm(&est.std_errors).max(1e-300);
        max_z = max_z.max(z_vec);
    }

    verdict(
        "C1 kernel-vs-mc",
        max_z < 3.0,
        &format!("{cases} cases per op, n=1e6, max z = {max_z:.3}"),
    );
}

// ---------------------------------------------------------------------------
// Criterion 2: analytic gradients vs central finite differences.
// ---------------------------------------------------------------------------

#[test]
fn c2_gradients_match_finite_differences() {
    let mut rng = seeded_rng(20_240_002);
    let step = 1e-5;
    let mut worst_analytic = 0.0f64;
    let mut worst_net = 0.0f64;

    // cosine_gradient, 50 configs (FC and WS interleaved).
    for i in 0..50 {
        let d = rng.random_range(2..=8);
        let k = rng.random_range(2..=5);
        let p = CosineParams::new(k, rng_vec(&mut rng, d, 1.0), None).unwrap();
        if i % 2 == 0 {
            let blocks: Vec<Vec<f64>> = (0..k).map(|_| rng_vec(&mut rng, d, 1.0)).collect();
            let g = match cosine::gradient(&WeightState::Fc(blocks.clone()), &p).unwrap() {
                WeightState::Fc(b) => b.concat(),
                _ => unreachable!(),
            };
            let fd = fd_gradient(
                |v| {
                    let bl: Vec<Vec<f64>> = v.chunks(d).map(|c| c.to_vec()).collect();
                    cosine::objective(&WeightState::Fc(bl), &p).unwrap()
                },
                &blocks.concat(),
                step,
            );
            worst_analytic = worst_analytic.max(dist(&g, &fd) / norm(&g).max(1.0));
        } else {
            let w0 = rng_vec(&mut rng, d, 1.0);
            let g = match cosine::gradient(&WeightState::Ws(w0.clone()), &p).unwrap() {
                WeightState::Ws(g) => g,
                _ => unreachable!(),
            };
            let fd = fd_gradient(
                |v| cosine::objective(&WeightState::Ws(v.to_vec()), &p).unwrap(),
                &w0,
                step,
            );
            worst_analytic = worst_analytic.max(dist(&g, &fd) / norm(&g).max(1.0));
        }
    }

    // parity_gradient (FC) and ws_gradient, 50 configs each.
    for _ in 0..50 {
        let d = rng.random_range(2..=8);
        let k = rng.random_range(2..=5);
        let p = ParityParams::new(k, rng_vec(&mut rng, d, 0.8)).unwrap();
        let mode = if rng.random_bool(0.5) {
            ParityMode::OnePlusK
        } else {
            ParityMode::KOnly
        };
        let blocks: Vec<Vec<f64>> = (0..k).map(|_| rng_vec(&mut rng, d, 1.0)).collect();
        let g = parity::fc_gradient(&WeightState::Fc(blocks.clone()), &p, mode)
            .unwrap()
            .gradient()
            .concat();
        let fd = fd_gradient(
            |v| {
                let bl: Vec<Vec<f64>> = v.chunks(d).map(|c| c.to_vec()).collect();
                parity::objective(&WeightState::Fc(bl), &p, mode).unwrap()
            },
            &blocks.concat(),
            step,
        );
        worst_analytic = worst_analytic.max(dist(&g, &fd) / norm(&g).max(1e-6));

        let w0 = rng_vec(&mut rng, d, 1.0);
        let g = parity::ws_gradient(&w0, &p, mode).unwrap();
        let fd = fd_gradient(
            |v| parity::objective(&WeightState::Ws(v.to_vec()), &p, mode).unwrap(),
            &w0,
            step,
        );
        worst_analytic = worst_analytic.max(dist(&g, &fd) / norm(&g).max(1e-6));
    }

    // net_backward, 50 configs over all arch/head combinations; configs with
    // a ReLU pre-activation near its kink are re-drawn (the subgradient
    // convention makes finite differences meaningless there).
    let combos = [
        (Arch::Ws, HeadMode::Known),
        (Arch::Fc, HeadMode::Known),
        (Arch::Ws, HeadMode::Learnable),
        (Arch::Fc, HeadMode::Learnable),
    ];
    let mut done = 0;
    let mut attempt = 0u64;
    while done < 50 {
        attempt += 1;
        let (arch, head) = combos[done % combos.len()];
        let d = rng.random_range(2..=8);
        let k = 5;
        let u0 = rng_vec(&mut rng, d, 0.8);
        let spec = nets::TargetSpec::new(GMode::Both, u0, k).unwrap();
        let params = nets::init_net(arch, head, k, d, GMode::Both, 7000 + attempt);
        let x = rng_vec(&mut rng, k * d, 1.0);
        if near_relu_kink(&params, &x) {
            continue;
        }
        let y = nets::target_eval(&spec, &x, k, d).unwrap();
        let r = net_forward(&params, &x) - y;
        let grad = flatten_net(&net_backward(&params, &x, r));
        let flat = flatten_net(&params);
        let template = params.clone();
        let fd = fd_gradient(
            |v| {
                let p = unflatten_net(&template, v);
                let f = net_forward(&p, &x);
                0.5 * (f - y) * (f - y)
            },
            &flat,
            step,
        );
        worst_net = worst_net.max(dist(&grad, &fd) / norm(&grad).max(1e-6));
        done += 1;
    }

    let passed = worst_analytic < 1e-5 && worst_net < 1e-4;
    verdict(
        "C2 gradient-vs-fd",
        passed,
        &format!("analytic rel {worst_analytic:.2e} (< 1e-5), net rel {worst_net:.2e} (< 1e-4)"),
    );
}

fn near_relu_kink(params: &nets::NetParams, x: &[f64]) -> bool {
    let nets::Head::Learnable(mlp) = &params.head else {
        return false;
    };
    let d = params.d;
    let z: Vec<f64> = match &params.conv {
        WeightState::Ws(w0) => (0..params.k)
            .map(|l| dot(w0, &x[l * d..(l + 1) * d]).tanh())
            .collect(),
        WeightState::Fc(blocks) => blocks
            .iter()
            .enumerate()
            .map(|(l, w)| dot(w, &x[l * d..(l + 1) * d]).tanh())
            .collect(),
    };
    (0..nets::HIDDEN_UNITS).any(|h| {
        let mut pre = mlp.b1[h];
        for (j, zj) in z.iter().enumerate() {
            pre += mlp.w1[h * mlp.inputs + j] * zj;
        }
        pre.abs() < 1e-3
    })
}

fn flatten_net(p: &nets::NetParams) -> Vec<f64> {
    let mut v = Vec::new();
    match &p.conv {
        WeightState::Ws(w) => v.extend_from_slice(w),
        WeightState::Fc(blocks) => {
            for b in blocks {
                v.extend_from_slice(b);
            }
        }
    }
    if let nets::Head::Learnable(m) = &p.head {
        v.extend_from_slice(&m.w1);
        v.extend_from_slice(&m.b1);
        v.extend_from_slice(&m.w2);
        v.push(m.b2);
    }
    v
}

fn unflatten_net(template: &nets::NetParams, v: &[f64]) -> nets::NetParams {
    let mut out = template.clone();
    let mut at = 0;
    match &mut out.conv {
        WeightState::Ws(w) => {
            let n = w.len();
            w.copy_from_slice(&v[..n]);
            at += n;
        }
        WeightState::Fc(blocks) => {
            for b in blocks.iter_mut() {
                let n = b.len();
                b.copy_from_slice(&v[at..at + n]);
                at += n;
            }
        }
    }
    if let nets::Head::Learnable(m) = &mut out.head {
        let (n1, nb1, n2) = (m.w1.len(), m.b1.len(), m.w2.len());
        m.w1.copy_from_slice(&v[at..at + n1]);
        at += n1;
        m.b1.copy_from_slice(&v[at..at + nb1]);
        at += nb1;
        m.w2.copy_from_slice(&v[at..at + n2]);
        at += n2;
        m.b2 = v[at];
    }
    out
}

// ---------------------------------------------------------------------------
// Criterion 3: WS cosine strong convexity and the 5 log(.) + 2 GD bound.
// ---------------------------------------------------------------------------

#[test]
fn c3_cosine_ws_convergence() {
    let report = suite::check_cosine_ws(20_240_003).unwrap();
    verdict(
        "C3 cosine-ws",
        report.passed,
        &format!(
            "lambda floor margin {:.2e}, condition ratio {:.3} (<= 5), iter excess {:.0}",
            report.measured["min_lambda_floor_margin"],
            report.measured["max_condition_ratio"],
            report.measured["max_iterations_minus_bound"]
        ),
    );
}

// ---------------------------------------------------------------------------
// Criterion 4: FC cosine ring-gradient decay and inner-ball loss floor.
// ---------------------------------------------------------------------------

#[test]
fn c4_cosine_fc_ring() {
    let report = suite::check_cosine_fc_ring(20_240_004).unwrap();
    verdict(
        "C4 cosine-fc-ring",
        report.passed,
        &format!(
            "slope {:.4} (< -0.05), strictly decreasing = {}, min gap {:.3} (>= 0.9)",
            report.measured["fit_slope"],
            report.measured["strictly_decreasing"] == 1.0,
            report.measured["min_inner_ball_gap"]
        ),
    );
}

// ---------------------------------------------------------------------------
// Criterion 5: non-degeneracy floor in closed form, no tolerance.
// ---------------------------------------------------------------------------

#[test]
fn c5_nondegeneracy_floor() {
    let mut detail = String::new();
    let mut passed = true;
    for k in 2..=6usize {
        let (threshold, moment) = parity::nondegeneracy_floor(k);
        let u0 = [threshold.sqrt()];
        let v = kernel::v_sigma(&u0, &u0).unwrap();
        let ok = v > 1.0 - 1.0 / k as f64 && moment > 0.25;
        passed &= ok;
        detail.push_str(&format!("k={k}: V={v:.4}, V^k={moment:.4}; "));
    }
    verdict("C5 nondegeneracy", passed, detail.trim_end_matches("; "));
}

// ---------------------------------------------------------------------------
// Criterion 6: FC parity stuck at the proof budget, d in {30, 50}, k = 3.
// ---------------------------------------------------------------------------

#[test]
fn c6_parity_fc_stuck() {
    let report =
        suite::check_parity_fc_stuck(20_240_006, &suite::FcStuckOptions::default()).unwrap();
    verdict(
        "C6 parity-fc-stuck",
        report.passed,
        &format!(
            "floor fraction {:.2} (>= 0.9), envelope violations {:.0}, min loss {:.3} at proof budget; extended-horizon floor fraction {:.2}",
            report.measured["min_floor_fraction"],
            report.measured["envelope_violations"],
            report.measured["min_loss_within_proof_budget"],
            report.measured["extended_floor_fraction"],
        ),
    );
}

// ---------------------------------------------------------------------------
// Criterion 7: WS parity two-phase convergence, k in {2,3,4}, eps = 0.05.
// ---------------------------------------------------------------------------

#[test]
fn c7_parity_ws_converges() {
    let report = suite::check_parity_ws_converges(20_240_007).unwrap();
    verdict(
        "C7 parity-ws-converges",
        report.passed,
        &format!(
            "max angle increase {:.2e} (<= 1e-10), kappa {:.3} (> 0), max final dist {:.4} (<= 0.05)",
            report.measured["max_angle_increase"],
            report.measured["kappa_min"],
            report.measured["max_final_dist"]
        ),
    );
}

// ---------------------------------------------------------------------------
// Criterion 8: the 12-cell separation sweep at the experiment defaults
// (d = 75, k = 10, eta = 0.5, batch 128, 3000 iterations, Gaussian data).
// The teacher norm is set to 5 in the sweep configuration; per-mode baselines
// B = E[(g* o h*)^2] normalize the final losses.
// ---------------------------------------------------------------------------

#[test]
fn c8_figure1_separation() {
    let (d, k, eta, batch, iters) = (75, 10, 0.5, 128, 3000);
    let u0_norm = 5.0;
    let seeds: [u64; 5] = [101, 102, 103, 104, 105];

    let mut detail = String::new();
    let mut passed = true;
    for gmode in [GMode::Low, GMode::High, GMode::Both] {
        let b = baseline_second_moment(gmode, u0_norm, MC_SAMPLES, 20_240_008).value;
        for head in [HeadMode::Known, HeadMode::Learnable] {
            for arch in [Arch::Ws, Arch::Fc] {
                let mut finals: Vec<f64> = seeds
                    .iter()
                    .map(|&seed| {
                        let exp = Experiment {
                            arch,
                            gmode,
                            head,
                            k,
                            d,
                            u0_norm,
                            eta,
                            batch,
                            iters,
                            seed,
                            dataset: None,
                        };
                        *sgd_train(&exp).unwrap().losses.last().unwrap()
                    })
                    .collect();
                finals.sort_by(f64::total_cmp);
                let median = finals[finals.len() / 2];
                let ratio = median / b;
                let ok = match (gmode, arch) {
                    (GMode::Low, _) => ratio < 0.1,
                    (GMode::High, _) => ratio >= 0.6,
                    (GMode::Both, Arch::Ws) => ratio < 0.1,
                    (GMode::Both, Arch::Fc) => ratio >= 0.3,
                };
                passed &= ok;
                detail.push_str(&format!(
                    "{gmode:?}/{arch:?}/{head:?}: {ratio:.3}{} ",
                    if ok { "" } else { "(!)" }
                ));
            }
        }
    }
    verdict("C8 figure1-separation", passed, detail.trim());
}

// ---------------------------------------------------------------------------
// Criterion 9: identity suite plus negative controls.
// ---------------------------------------------------------------------------

#[test]
fn c9_identities_and_negative_controls() {
    let clean = suite::check_identities(20_240_009, 0.0).unwrap();
    let corrupted = suite::check_identities(20_240_009, 1e-6).unwrap();
    let aligned = suite::check_parity_fc_stuck(
        20_240_009,
        &suite::FcStuckOptions {
            dims: vec![30],
            n_seeds: 2,
            aligned_init: true,
            ..suite::FcStuckOptions::default()
        },
    )
    .unwrap();
    let passed = clean.passed
        && !corrupted.passed
        && !aligned.passed
        && aligned.measured["in_hypothesis_fraction"] == 0.0
        && aligned.measured["min_loss_within_proof_budget"] < 0.125;
    verdict(
        "C9 identities",
        passed,
        &format!(
            "decomposition residual {:.2e}, symmetry deviation {:.2e} (< 1e-10); corrupted-F1 control fails = {}, aligned-init control excluded = {}",
            clean.measured["max_decomposition_residual"],
            clean.measured["max_symmetry_deviation"],
            !corrupted.passed,
            aligned.measured["in_hypothesis_fraction"] == 0.0,
        ),
    );
}
