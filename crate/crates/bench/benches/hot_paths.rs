//! Hot-path benchmarks: kernel evaluations, analytic gradients, one GD step,
//! one SGD iteration, and the Monte Carlo oracle throughput.

use convsep_core::kernel::{self, mc::mc_expect};
use convsep_core::nets::{self, Arch, GMode, HeadMode};
use convsep_core::oracles::{rng_vec, seeded_rng};
use convsep_core::parity::{self, ParityMode, ParityParams};
use convsep_core::vec_ops::dot;
use convsep_core::WeightState;
use criterion::{black_box, criterion_group, criterion_main, Criterion};

fn bench_kernels(c: &mut Criterion) {
    let mut rng = seeded_rng(1);
    let u = rng_vec(&mut rng, 8, 1.0);
    let v = rng_vec(&mut rng, 8, 1.0);
    c.bench_function("v_sigma_d8", |b| {
        b.iter(|| kernel::v_sigma(black_box(&u), black_box(&v)).unwrap())
    });
    c.bench_function("self_term_d8", |b| {
        b.iter(|| parity::self_term(black_box(&u)))
    });
    c.bench_function("cross_term_d8", |b| {
        b.iter(|| parity::cross_term(black_box(&u), black_box(&v)).unwrap())
    });
}

fn bench_gradients(c: &mut Criterion) {
    let mut rng = seeded_rng(2);
    let params = ParityParams::nondegenerate_teacher(3, 8).unwrap();
    let w0 = rng_vec(&mut rng, 8, 1.0);
    c.bench_function("parity_ws_gradient_k3_d8", |b| {
        b.iter(|| parity::ws_gradient(black_box(&w0), &params, ParityMode::OnePlusK).unwrap())
    });
    let blocks: Vec<Vec<f64>> = (0..3).map(|_| rng_vec(&mut rng, 50, 0.2)).collect();
    let params50 = ParityParams::nondegenerate_teacher(3, 50).unwrap();
    c.bench_function("parity_fc_gradient_k3_d50", |b| {
        b.iter(|| {
            parity::fc_gradient(
                black_box(&WeightState::Fc(blocks.clone())),
                &params50,
                ParityMode::OnePlusK,
            )
            .unwrap()
        })
    });
}

fn bench_sgd_iteration(c: &mut Criterion) {
    let (k, d, batch) = (10, 75, 128);
    let params = nets::init_net(Arch::Ws, HeadMode::Learnable, k, d, GMode::Both, 3);
    let u0 = nets::sample_teacher(d, 5.0, 3);
    let spec = nets::TargetSpec::new(GMode::Both, u0, k).unwrap();
    let data = nets::sample_gaussian_batch(batch, k, d, 5);
    c.bench_function("net_forward_backward_batch128", |b| {
        b.iter(|| {
            let mut acc = 0.0;
            for i in 0..batch {
                let x = data.example(i);
                let y = nets::target_eval(&spec, x, k, d).unwrap();
                let r = nets::net_forward(&params, x) - y;
                let g = nets::net_backward(&params, x, r);
                if let WeightState::Ws(gw) = &g.conv {
                    acc += dot(gw, gw);
                }
            }
            black_box(acc)
        })
    });
}

fn bench_mc(c: &mut Criterion) {
    c.bench_function("mc_expect_100k_d4", |b| {
        b.iter(|| {
            mc_expect(
                |x| kernel::erf(x[0]) * kernel::erf(x[1] + x[2]),
                4,
                100_000,
                9,
            )
        })
    });
}

criterion_group!(
    benches,
    bench_kernels,
    bench_gradients,
    bench_sgd_iteration,
    bench_mc
);
criterion_main!(benches);
