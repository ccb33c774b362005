//! Command dispatch: experiment, verify, estimate, sweep.

use crate::config::{Command, Config, DataCfg, Model};
use crate::csv_out::{emit_csv, emit_loss_csv};
use convsep_core::cosine::CosineParams;
use convsep_core::kernel::mc::{mc_expect, KernelEstimate};
use convsep_core::kernel::{self, erf};
use convsep_core::nets::{
    self, baseline_second_moment, load_patch_file, sample_teacher, sgd_train, Experiment, GMode,
};
use convsep_core::optim::{gd_run, rademacher_init, GdConfig, ModelSpec, StepRule, WeightState};
use convsep_core::oracles::{rng_direction, rng_vec, seeded_rng};
use convsep_core::parity::{self, ParityParams};
use convsep_core::vec_ops::{dot, norm, scaled};
use convsep_core::Error as CoreError;
use serde::Serialize;
use std::path::{Path, PathBuf};

/// Process exit codes, per the interface contract.
pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_DIVERGED: i32 = 2;
pub const EXIT_CHECKS_FAILED: i32 = 3;

pub struct Invocation {
    pub command: Command,
    pub config: Config,
    pub out_dir: PathBuf,
}

pub fn dispatch(inv: &Invocation) -> i32 {
    if let Some(declared) = inv.config.command {
        if declared != inv.command {
            eprintln!(
                "config declares command {declared:?} but the CLI invoked {:?}",
                inv.command
            );
            return EXIT_VALIDATION;
        }
    }
    if let Err(e) = std::fs::create_dir_all(&inv.out_dir) {
        eprintln!(
            "cannot create output directory {}: {e}",
            inv.out_dir.display()
        );
        return EXIT_VALIDATION;
    }
    let result = match inv.command {
        Command::Experiment => run_experiment(&inv.config, &inv.out_dir).map(|_| EXIT_OK),
        Command::Verify => run_verify(&inv.config, &inv.out_dir),
        Command::Estimate => run_estimate(&inv.config, &inv.out_dir).map(|_| EXIT_OK),
        Command::Sweep => run_sweep(&inv.config, &inv.out_dir).map(|_| EXIT_OK),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("{e:#}");
            classify(&e)
        }
    }
}

/// Divergence gets its own exit code; everything else that errors before or
/// during a run is a validation failure.
fn classify(e: &anyhow::Error) -> i32 {
    for cause in e.chain() {
        if let Some(CoreError::Diverged { .. }) = cause.downcast_ref::<CoreError>() {
            return EXIT_DIVERGED;
        }
    }
    EXIT_VALIDATION
}

#[derive(Serialize)]
pub struct RunSummary {
    model: String,
    arch: String,
    gmode: Option<String>,
    head: Option<String>,
    k: usize,
    d: usize,
    u0_norm: f64,
    seed: u64,
    iterations: usize,
    initial_loss: f64,
    final_loss: f64,
    converged: Option<bool>,
}

pub fn run_experiment(cfg: &Config, out_dir: &Path) -> anyhow::Result<RunOutcome> {
    match cfg.model() {
        Model::Net => run_net_experiment(cfg, out_dir),
        Model::Cosine | Model::Parity => run_gd_experiment(cfg, out_dir),
    }
}

pub struct RunOutcome {
    pub initial_loss: f64,
    pub final_loss: f64,
    pub summary: RunSummary,
}

fn write_summary(out_dir: &Path, summary: &RunSummary) -> anyhow::Result<()> {
    let path = out_dir.join("run_summary.json");
    std::fs::write(&path, serde_json::to_string_pretty(summary)?)
        .map_err(|e| anyhow::anyhow!("cannot write {}: {e}", path.display()))?;
    Ok(())
}

fn run_net_experiment(cfg: &Config, out_dir: &Path) -> anyhow::Result<RunOutcome> {
    let dataset = match &cfg.data {
        Some(DataCfg::File { path }) => {
            let ds = load_patch_file(path)?;
            if ds.k != cfg.k() || ds.d != cfg.d() {
                anyhow::bail!(
                    "patch file is k={}, d={} but the config wants k={}, d={}",
                    ds.k,
                    ds.d,
                    cfg.k(),
                    cfg.d()
                );
            }
            Some(ds)
        }
        _ => None,
    };
    let exp = Experiment {
        arch: cfg.arch(),
        gmode: cfg.gmode(),
        head: cfg.head(),
        k: cfg.k(),
        d: cfg.d(),
        u0_norm: cfg.u0_norm(),
        eta: cfg.optimizer.eta,
        batch: cfg.optimizer.batch,
        iters: cfg.optimizer.iters,
        seed: cfg.seed,
        dataset,
    };
    exp.validate()?;
    let outcome = sgd_train(&exp)?;
    emit_loss_csv(&outcome.losses, &out_dir.join("trajectory.csv"))?;
    let summary = RunSummary {
        model: "net".into(),
        arch: format!("{:?}", cfg.arch()).to_lowercase(),
        gmode: Some(format!("{:?}", cfg.gmode()).to_lowercase()),
        head: Some(format!("{:?}", cfg.head()).to_lowercase()),
        k: cfg.k(),
        d: cfg.d(),
        u0_norm: cfg.u0_norm(),
        seed: cfg.seed,
        iterations: cfg.optimizer.iters,
        initial_loss: outcome.losses[0],
        final_loss: *outcome.losses.last().unwrap(),
        converged: None,
    };
    write_summary(out_dir, &summary)?;
    Ok(RunOutcome {
        initial_loss: summary.initial_loss,
        final_loss: summary.final_loss,
        summary,
    })
}

fn run_gd_experiment(cfg: &Config, out_dir: &Path) -> anyhow::Result<RunOutcome> {
    let d = cfg.d();
    let k = cfg.k();
    let u0 = sample_teacher(d, cfg.u0_norm(), cfg.seed);
    let mut rng = seeded_rng(cfg.seed.wrapping_add(1));

    let (model, init, default_projection) = match cfg.model() {
        Model::Cosine => {
            let params = CosineParams::new(k, u0, cfg.c_k)?;
            let init = match cfg.arch() {
                nets::Arch::Ws => WeightState::Ws(rng_vec(&mut rng, d, 1.0)),
                nets::Arch::Fc => WeightState::Fc(
                    (0..k)
                        .map(|_| rng_vec(&mut rng, d, 1.0 / (d as f64).sqrt()))
                        .collect(),
                ),
            };
            (ModelSpec::Cosine(params), init, None)
        }
        Model::Parity => {
            let params = ParityParams::new(k, u0)?;
            let radius = norm(&params.u0);
            let init = match cfg.arch() {
                nets::Arch::Ws => {
                    let mut w0 = rng_direction(&mut rng, d);
                    if dot(&w0, &params.u0) < 0.0 {
                        w0 = scaled(&w0, -1.0);
                    }
                    WeightState::Ws(scaled(&w0, 0.5 * radius))
                }
                nets::Arch::Fc => rademacher_init(d, k, 1.0 / (d as f64).sqrt(), cfg.seed),
            };
            let projection = match cfg.arch() {
                nets::Arch::Ws => Some(radius),
                nets::Arch::Fc => None,
            };
            (
                ModelSpec::Parity {
                    params,
                    mode: cfg.parity_mode(),
                },
                init,
                projection,
            )
        }
        Model::Net => unreachable!(),
    };

    let gd_cfg = GdConfig {
        step: StepRule::Constant(cfg.optimizer.eta),
        max_iters: cfg.optimizer.iters,
        projection_radius: cfg.optimizer.projection_radius.or(default_projection),
        stop_grad_norm: cfg.optimizer.stop_grad_norm,
        stop_distance: cfg.optimizer.stop_distance,
        record_every: cfg.optimizer.record_every,
        seed: cfg.seed,
    };
    let run = gd_run(&model, &init, &gd_cfg)?;
    emit_csv(&run.trajectory, &out_dir.join("trajectory.csv"))?;
    let summary = RunSummary {
        model: format!("{:?}", cfg.model()).to_lowercase(),
        arch: format!("{:?}", cfg.arch()).to_lowercase(),
        gmode: None,
        head: None,
        k,
        d,
        u0_norm: cfg.u0_norm(),
        seed: cfg.seed,
        iterations: run.iterations,
        initial_loss: run.trajectory.first().map(|r| r.loss).unwrap_or(f64::NAN),
        final_loss: run.trajectory.last().map(|r| r.loss).unwrap_or(f64::NAN),
        converged: Some(run.converged),
    };
    write_summary(out_dir, &summary)?;
    Ok(RunOutcome {
        initial_loss: summary.initial_loss,
        final_loss: summary.final_loss,
        summary,
    })
}

fn run_verify(cfg: &Config, out_dir: &Path) -> anyhow::Result<i32> {
    use convsep_core::suite;
    let seed = cfg.seed;
    let all = [
        "identities",
        "cosine_ws_convergence",
        "cosine_fc_ring",
        "parity_fc_stuck",
        "parity_ws_converges",
    ];
    let wanted: Vec<&str> = if cfg.checks.is_empty() {
        all.to_vec()
    } else {
        for c in &cfg.checks {
            if !all.contains(&c.as_str()) {
                anyhow::bail!("unknown check {c:?}; available: {all:?}");
            }
        }
        cfg.checks.iter().map(String::as_str).collect()
    };

    let mut reports = Vec::new();
    for name in wanted {
        // Seed offsets match run_all so a subset reproduces the full run.
        let report = match name {
            "identities" => suite::check_identities(seed, 0.0)?,
            "cosine_ws_convergence" => suite::check_cosine_ws(seed.wrapping_add(1))?,
            "cosine_fc_ring" => suite::check_cosine_fc_ring(seed.wrapping_add(2))?,
            "parity_fc_stuck" => suite::check_parity_fc_stuck(
                seed.wrapping_add(3),
                &suite::FcStuckOptions::default(),
            )?,
            "parity_ws_converges" => suite::check_parity_ws_converges(seed.wrapping_add(4))?,
            _ => unreachable!(),
        };
        println!(
            "check {}: {}",
            report.check_id,
            if report.passed { "PASS" } else { "FAIL" }
        );
        reports.push(report);
    }
    let path = out_dir.join("report.json");
    std::fs::write(&path, serde_json::to_string_pretty(&reports)?)
        .map_err(|e| anyhow::anyhow!("cannot write {}: {e}", path.display()))?;
    let all_passed = reports.iter().all(|r| r.passed);
    Ok(if all_passed {
        EXIT_OK
    } else {
        EXIT_CHECKS_FAILED
    })
}

#[derive(Serialize)]
struct EstimateEntry {
    name: String,
    closed_form: Option<f64>,
    mc: KernelEstimate,
    z_score: Option<f64>,
}

fn entry(name: &str, closed: Option<f64>, mc: KernelEstimate) -> EstimateEntry {
    let z_score = closed.map(|c| (mc.value - c).abs() / mc.std_error.max(1e-300));
    EstimateEntry {
        name: name.to_string(),
        closed_form: closed,
        mc,
        z_score,
    }
}

/// Closed forms against the Monte Carlo oracle for the configured model.
fn run_estimate(cfg: &Config, out_dir: &Path) -> anyhow::Result<()> {
    let d = cfg.d();
    let n = cfg.samples;
    let seed = cfg.seed;
    let u0 = sample_teacher(d, cfg.u0_norm(), seed);
    let mut rng = seeded_rng(seed.wrapping_add(1));
    let w = scaled(&rng_direction(&mut rng, d), 0.7 * norm(&u0));

    let mut entries = Vec::new();
    match cfg.model() {
        Model::Cosine => {
            let closed = kernel::cos_gaussian_mean(&u0);
            let u = u0.clone();
            let mc = mc_expect(move |x| dot(&u, x).cos(), d, n, seed ^ 0xA1);
            entries.push(entry("cos_gaussian_mean(u0)", Some(closed), mc));

            let closed = convsep_core::cosine::cos_squared_diff_mean(&w, &u0)?;
            let (wc, uc) = (w.clone(), u0.clone());
            let mc = mc_expect(
                move |x| {
                    let dc = dot(&wc, x).cos() - dot(&uc, x).cos();
                    dc * dc
                },
                d,
                n,
                seed ^ 0xA2,
            );
            entries.push(entry("cos_squared_diff_mean(w,u0)", Some(closed), mc));
        }
        Model::Parity => {
            let closed = kernel::v_sigma(&u0, &u0)?;
            let u = u0.clone();
            let mc = mc_expect(
                move |x| {
                    let e = erf(dot(&u, x));
                    e * e
                },
                d,
                n,
                seed ^ 0xB1,
            );
            entries.push(entry("v_sigma(u0,u0)", Some(closed), mc));

            let closed = kernel::v_sigma(&u0, &w)?;
            let (uc, wc) = (u0.clone(), w.clone());
            let mc = mc_expect(
                move |x| erf(dot(&uc, x)) * erf(dot(&wc, x)),
                d,
                n,
                seed ^ 0xB2,
            );
            entries.push(entry("v_sigma(u0,w)", Some(closed), mc));

            let (threshold, moment) = parity::nondegeneracy_floor(cfg.k());
            entries.push(entry(
                "nondegeneracy_threshold",
                Some(threshold),
                KernelEstimate {
                    value: threshold,
                    std_error: 0.0,
                    n_samples: 0,
                    seed,
                },
            ));
            entries.push(entry(
                "second_moment_at_threshold",
                Some(moment),
                KernelEstimate {
                    value: moment,
                    std_error: 0.0,
                    n_samples: 0,
                    seed,
                },
            ));
        }
        Model::Net => {
            for gmode in [GMode::Low, GMode::High, GMode::Both] {
                let mc = baseline_second_moment(gmode, cfg.u0_norm(), n, seed ^ 0xC1);
                entries.push(entry(
                    &format!("baseline_{:?}", gmode).to_lowercase(),
                    None,
                    mc,
                ));
            }
        }
    }
    let path = out_dir.join("estimates.json");
    std::fs::write(&path, serde_json::to_string_pretty(&entries)?)
        .map_err(|e| anyhow::anyhow!("cannot write {}: {e}", path.display()))?;
    for e in &entries {
        match (e.closed_form, e.z_score) {
            (Some(c), Some(z)) => {
                println!(
                    "{}: closed {:.6}, mc {:.6} ({z:.2} sigma)",
                    e.name, c, e.mc.value
                )
            }
            _ => println!("{}: mc {:.6} +- {:.2e}", e.name, e.mc.value, e.mc.std_error),
        }
    }
    Ok(())
}

fn run_sweep(cfg: &Config, out_dir: &Path) -> anyhow::Result<()> {
    anyhow::ensure!(
        !cfg.cells.is_empty(),
        "sweep config needs a non-empty cells array"
    );
    let mut summary =
        String::from("cell,label,model,arch,gmode,head,seed,iterations,initial_loss,final_loss\n");
    for (i, cell) in cfg.cells.iter().enumerate() {
        let mut merged = cfg.with_overrides(cell)?;
        merged.command = None;
        let label = cell_label(&merged);
        let cell_dir = out_dir.join(format!("cell_{i:02}_{label}"));
        std::fs::create_dir_all(&cell_dir)
            .map_err(|e| anyhow::anyhow!("cannot create {}: {e}", cell_dir.display()))?;
        let outcome = run_experiment(&merged, &cell_dir)
            .map_err(|e| e.context(format!("sweep cell {i} ({label})")))?;
        let s = &outcome.summary;
        summary.push_str(&format!(
            "{i},{label},{},{},{},{},{},{},{},{}\n",
            s.model,
            s.arch,
            s.gmode.clone().unwrap_or_default(),
            s.head.clone().unwrap_or_default(),
            s.seed,
            s.iterations,
            s.initial_loss,
            s.final_loss
        ));
        println!(
            "cell {i:02} {label}: initial {:.4} -> final {:.4}",
            outcome.initial_loss, outcome.final_loss
        );
    }
    let path = out_dir.join("summary.csv");
    std::fs::write(&path, summary)
        .map_err(|e| anyhow::anyhow!("cannot write {}: {e}", path.display()))?;
    Ok(())
}

fn cell_label(cfg: &Config) -> String {
    match cfg.model() {
        Model::Net => {
            format!("net_{:?}_{:?}_{:?}", cfg.arch(), cfg.gmode(), cfg.head()).to_lowercase()
        }
        m => format!("{m:?}_{:?}", cfg.arch()).to_lowercase(),
    }
}
