//! Experiment runner for the NPE stabilization toolkit.
//!
//! Every command reads a single JSON config, writes its artifacts (binary
//! field files, CSV tables, plan JSON) atomically into the output
//! directory, and finishes with a `report.json` listing each emitted file
//! with a checksum. Exit codes: 0 ok, 2 config, 3 invariant, 4
//! certification, 5 blow-up, 6 quadrature, 7 envelope violation.

use clap::{Args, Parser, Subcommand};
use npe_core::config::{DatumSpec, ExperimentConfig};
use npe_core::control::{
    self, build_control_u, certify_decay, choose_p, control_trace_integral, decay_envelope,
    decay_rows, log_grid, translate_support, verify_psi_bound, ControlParams, SynthesisOptions,
};
use npe_core::dynamics::{self, TrajectoryStatus};
use npe_core::io::{self, fmt_f64};
use npe_core::report::RunReport;
use npe_core::{Error, LatticeSpec, Result, SpectralField};
use serde_json::json;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "npe",
    about = "Simulation and starting-control synthesis for the normal parabolic equation",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (JSON)
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides the config's output_dir)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (reserved; commands currently run single-threaded)
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Seed override for randomized estimators and generators
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Build the compactly supported control u and write it as a field file
    BuildControl(Common),
    /// Evaluate the decay certificate Psi(S(t;u)) e^{18t} and report beta
    Certify(Common),
    /// Sample the closed-form solution on a time grid
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Also run the splitting time-stepper and report the deviation
        #[arg(long)]
        oracle: bool,
    },
    /// Classify the initial datum into Stability/Explosion/Growing
    Classify(Common),
    /// Synthesize v = y0 - lambda u and verify the decay envelope
    Stabilize(Common),
    /// Parameter sweeps (lambda_factor, mu_times_g_inf, cutoff_k)
    Sweep(Common),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::BuildControl(c) => with_config(c, cmd_build_control),
        Command::Certify(c) => with_config(c, cmd_certify),
        Command::Simulate { common, oracle } => {
            let force = *oracle;
            with_config(common, move |ctx| cmd_simulate(ctx, force))
        }
        Command::Classify(c) => with_config(c, cmd_classify),
        Command::Stabilize(c) => with_config(c, cmd_stabilize),
        Command::Sweep(c) => with_config(c, cmd_sweep),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("npe: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

struct Ctx {
    cfg: ExperimentConfig,
    hash: String,
    out: PathBuf,
    seed: u64,
}

fn with_config<F>(common: &Common, f: F) -> Result<i32>
where
    F: FnOnce(&mut Ctx) -> Result<i32>,
{
    let (cfg, hash) = ExperimentConfig::load(&common.config)?;
    let out = common
        .out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&out)?;
    let seed = common.seed.or(cfg.seed).unwrap_or(0x5eed);
    let mut ctx = Ctx {
        cfg,
        hash,
        out,
        seed,
    };
    f(&mut ctx)
}

/// Build the configured control, translated into its support box.
fn build_control(
    cfg: &ExperimentConfig,
    lattice: LatticeSpec,
) -> Result<(SpectralField, ControlParams, control::ControlDiagnostics)> {
    let params = cfg.control_params()?;
    let (centered, diag) = build_control_u(&params, lattice)?;
    Ok((translate_support(&centered, &params.support), params, diag))
}

/// Resolve the initial datum, building the control first if the datum
/// needs it.
fn resolve_datum(cfg: &ExperimentConfig, lattice: LatticeSpec) -> Result<SpectralField> {
    match cfg.datum {
        Some(DatumSpec::ControlMultiple { .. }) => {
            let (u, _, _) = build_control(cfg, lattice)?;
            let g_inf = control_trace_integral(&u, &cfg.quadrature_spec())?;
            cfg.resolve_datum(lattice, Some((&u, g_inf)))
        }
        _ => cfg.resolve_datum(lattice, None),
    }
}

fn status_label(status: &TrajectoryStatus) -> String {
    match status {
        TrajectoryStatus::Completed => "completed".into(),
        TrajectoryStatus::BlowUp(t) => format!("blow_up@{}", fmt_f64(*t)),
        TrajectoryStatus::QuadratureFailure => "quadrature_failure".into(),
    }
}

const TRAJECTORY_HEADER: [&str; 5] = ["t", "norm0", "denominator", "envelope", "status"];

/// Write a trajectory CSV; the envelope column is the caller's bound, or
/// nan when no bound applies.
fn write_trajectory(
    path: &Path,
    traj: &dynamics::Trajectory,
    envelope: Option<&dyn Fn(f64) -> f64>,
) -> Result<()> {
    let rows: Vec<Vec<String>> = traj
        .times
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            vec![
                fmt_f64(t),
                fmt_f64(traj.norm0[i]),
                fmt_f64(traj.denominator[i]),
                fmt_f64(envelope.map(|f| f(t)).unwrap_or(f64::NAN)),
                "ok".into(),
            ]
        })
        .collect();
    io::write_csv(path, &TRAJECTORY_HEADER, &rows)
}

fn trajectory_summary(traj: &dynamics::Trajectory) -> serde_json::Value {
    json!({
        "status": status_label(&traj.status),
        "points": traj.times.len(),
        "alpha": traj.alpha,
        "final_time": traj.times.last().copied(),
        "final_norm0": traj.norm0.last().copied(),
        "blowup_time": match traj.status {
            TrajectoryStatus::BlowUp(t) => Some(t),
            _ => None,
        },
    })
}

fn cmd_build_control(ctx: &mut Ctx) -> Result<i32> {
    let cfg = &ctx.cfg;
    let lattice = cfg.lattice_spec()?;
    let mut report = RunReport::new("build-control", &ctx.hash);
    let (u, params, diag) = build_control(cfg, lattice)?;

    let field_path = ctx.out.join("u.field");
    io::write_field(&field_path, &u)?;
    report.add_file(&field_path)?;
    report.plan_summary = Some(json!({
        "p": params.p,
        "amplitudes": params.amplitudes,
        "support": params.support,
        "norm0": u.norm0(),
        "pre_projection_divergence": diag.pre_projection_divergence,
        "truncation_residual": diag.truncation_residual,
    }));

    if cfg.k_doubling {
        let fine = LatticeSpec::new(2 * lattice.n, 2 * lattice.k)?;
        let (centered2, diag2) = build_control_u(&params, fine)?;
        let u2 = translate_support(&centered2, &params.support);
        let fine_path = ctx.out.join("u_doubled.field");
        io::write_field(&fine_path, &u2)?;
        report.add_file(&fine_path)?;

        // L2 distance on the shared modes
        let mut restricted = SpectralField::zeros(lattice);
        for (idx, kv) in lattice.wavevectors().enumerate() {
            let c = u2.coeff(kv);
            restricted.coeffs_mut()[3 * idx..3 * idx + 3].copy_from_slice(&c);
        }
        let diff = restricted.axpy(-1.0, &u)?.norm0();
        let table = ctx.out.join("convergence.csv");
        io::write_csv(
            &table,
            &[
                "k",
                "n",
                "pre_projection_divergence",
                "truncation_residual",
                "shared_mode_l2_diff",
            ],
            &[
                vec![
                    lattice.k.to_string(),
                    lattice.n.to_string(),
                    fmt_f64(diag.pre_projection_divergence),
                    fmt_f64(diag.truncation_residual),
                    fmt_f64(diff),
                ],
                vec![
                    fine.k.to_string(),
                    fine.n.to_string(),
                    fmt_f64(diag2.pre_projection_divergence),
                    fmt_f64(diag2.truncation_residual),
                    fmt_f64(0.0),
                ],
            ],
        )?;
        report.add_file(&table)?;
        report.note(format!("k_doubling: shared-mode L2 difference {diff:e}"));
    }

    report.finish(&ctx.out, 0)?;
    Ok(0)
}

const CERT_HEADER: [&str; 5] = ["t", "psi", "ratio", "threshold", "margin"];

fn cmd_certify(ctx: &mut Ctx) -> Result<i32> {
    let cfg = &ctx.cfg;
    let lattice = cfg.lattice_spec()?;
    let mut report = RunReport::new("certify", &ctx.hash);
    let (mut u, params, _) = build_control(cfg, lattice)?;
    if cfg.negate_control {
        u = u.scaled(-1.0);
        report.note("certifying the sign-flipped control -u");
    }

    let grid = log_grid(cfg.cert_points, 1e-4, 3.0);
    let (rows, min_ratio, min_time) = decay_rows(&u, &grid)?;
    let beta_hat = min_ratio / 3.0;

    let cert_path = ctx.out.join("certificate.csv");
    let csv_rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                fmt_f64(r.t),
                fmt_f64(r.psi),
                fmt_f64(r.ratio),
                fmt_f64(0.0),
                fmt_f64(r.ratio),
            ]
        })
        .collect();
    io::write_csv(&cert_path, &CERT_HEADER, &csv_rows)?;
    report.add_file(&cert_path)?;
    report.certificate_summary = Some(json!({
        "beta_hat": beta_hat,
        "min_ratio": min_ratio,
        "min_time": min_time,
        "points": rows.len(),
        "p": params.p,
        "amplitudes": params.amplitudes,
        "negated": cfg.negate_control,
    }));

    let code = if min_ratio > 0.0 {
        0
    } else {
        report.note(format!(
            "certification failed: min ratio {min_ratio:e} at t = {min_time}"
        ));
        4
    };
    report.finish(&ctx.out, code)?;
    Ok(code)
}

fn cmd_simulate(ctx: &mut Ctx, oracle_flag: bool) -> Result<i32> {
    let cfg = &ctx.cfg;
    let lattice = cfg.lattice_spec()?;
    let q = cfg.quadrature_spec();
    let mut report = RunReport::new("simulate", &ctx.hash);
    let y0 = resolve_datum(cfg, lattice)?;
    let grid = cfg.time_grid.times()?;
    let traj = dynamics::simulate(&y0, &grid, &q)?;

    let traj_path = ctx.out.join("trajectory.csv");
    write_trajectory(&traj_path, &traj, None)?;
    report.add_file(&traj_path)?;
    report.trajectory_summary = Some(trajectory_summary(&traj));

    if oracle_flag || cfg.oracle.is_some() {
        let (dt, t_end) = match cfg.oracle {
            Some(o) => (o.dt, o.t_end),
            None => (1e-3, cfg.time_grid.t_end.min(1.0)),
        };
        let oracle = dynamics::timestep_oracle(&y0, dt, t_end)?;
        let formula = dynamics::simulate(&y0, &oracle.times, &q)?;
        let mut rows = Vec::new();
        let mut max_dev = 0.0_f64;
        for i in 0..formula.times.len().min(oracle.times.len()) {
            let dev = (oracle.norm0[i] - formula.norm0[i]).abs() / formula.norm0[i].max(1e-300);
            max_dev = max_dev.max(dev);
            rows.push(vec![
                fmt_f64(oracle.times[i]),
                fmt_f64(oracle.norm0[i]),
                fmt_f64(formula.norm0[i]),
                fmt_f64(dev),
            ]);
        }
        let oracle_path = ctx.out.join("oracle.csv");
        io::write_csv(
            &oracle_path,
            &["t", "oracle_norm0", "formula_norm0", "rel_deviation"],
            &rows,
        )?;
        report.add_file(&oracle_path)?;
        report.note(format!("oracle max relative deviation {max_dev:e}"));
    }

    let code = match traj.status {
        TrajectoryStatus::Completed => 0,
        TrajectoryStatus::BlowUp(_) => 5,
        TrajectoryStatus::QuadratureFailure => 6,
    };
    report.finish(&ctx.out, code)?;
    Ok(code)
}

fn cmd_classify(ctx: &mut Ctx) -> Result<i32> {
    let cfg = &ctx.cfg;
    let lattice = cfg.lattice_spec()?;
    let q = cfg.quadrature_spec();
    let mut report = RunReport::new("classify", &ctx.hash);
    let y0 = resolve_datum(cfg, lattice)?;
    let cls = dynamics::classify(&y0, &q, cfg.classification_tolerance)?;
    report.trajectory_summary = Some(json!({
        "verdict": format!("{:?}", cls.verdict),
        "sup_trace": cls.sup_trace,
        "argmax_time": cls.argmax_time,
        "attained": cls.attained,
        "tail_bound": cls.tail_bound,
        "tolerance": cls.tolerance,
        "norm0": y0.norm0(),
    }));
    report.finish(&ctx.out, 0)?;
    Ok(0)
}

fn cmd_stabilize(ctx: &mut Ctx) -> Result<i32> {
    let cfg = &ctx.cfg;
    let lattice = cfg.lattice_spec()?;
    let q = cfg.quadrature_spec();
    let mut report = RunReport::new("stabilize", &ctx.hash);
    let y0 = resolve_datum(cfg, lattice)?;
    let support = cfg.support_box()?;
    let opts = SynthesisOptions {
        quadrature: q,
        seed: ctx.seed,
        amplitudes: cfg.amplitudes,
        cert_points: cfg.cert_points,
        constant_samples: cfg.estimator_samples,
        ..SynthesisOptions::default()
    };
    let (mut plan, mut v) = control::synthesize(&y0, &support, lattice, &opts)?;

    if let Some(forced) = cfg.lambda_override {
        report.note(format!(
            "lambda override: {forced} replaces synthesized {}",
            plan.lambda
        ));
        plan.lambda = forced;
        v = if forced == 0.0 {
            y0.clone()
        } else {
            y0.axpy(-forced, &plan.u)?
        };
        plan.v_norm0 = v.norm0();
    }

    let plan_path = ctx.out.join("plan.json");
    io::write_json(&plan_path, &plan)?;
    report.add_file(&plan_path)?;
    report.plan_summary = Some(serde_json::to_value(&plan)?);

    if plan.lambda > 7.0 * y0.norm0() {
        let grid = log_grid(cfg.cert_points, 1e-4, plan.horizon_t.max(1e-3));
        let cert = verify_psi_bound(&y0, plan.lambda, &plan.u, &grid, plan.beta_hat)?;
        let cert_path = ctx.out.join("certificate.csv");
        let rows: Vec<Vec<String>> = cert
            .rows
            .iter()
            .map(|r| {
                vec![
                    fmt_f64(r.t),
                    fmt_f64(r.neg_psi),
                    fmt_f64(r.ratio),
                    fmt_f64(r.threshold),
                    fmt_f64(r.margin),
                ]
            })
            .collect();
        io::write_csv(&cert_path, &CERT_HEADER, &rows)?;
        report.add_file(&cert_path)?;
        report.certificate_summary = Some(json!({
            "pass": cert.pass,
            "worst_margin": cert.worst_margin,
            "worst_time": cert.worst_time,
        }));
    }

    // Shared sample grid over [0, T + 10] with T itself as a node.
    let t_hi = plan.horizon_t + 10.0;
    let points = cfg.time_grid.points.max(121);
    let mut grid: Vec<f64> = (0..points)
        .map(|i| t_hi * i as f64 / (points - 1) as f64)
        .collect();
    grid.push(plan.horizon_t);
    grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
    grid.dedup_by(|a, b| (*a - *b).abs() < 1e-12);

    let uncontrolled = dynamics::simulate(&y0, &grid, &q)?;
    let unc_path = ctx.out.join("uncontrolled.csv");
    write_trajectory(&unc_path, &uncontrolled, None)?;
    report.add_file(&unc_path)?;

    let v_norm = v.norm0();
    let beta = plan.beta_hat;
    let envelope = move |t: f64| decay_envelope(t, v_norm, beta);
    let controlled = dynamics::simulate(&v, &grid, &q)?;
    let ctl_path = ctx.out.join("controlled.csv");
    write_trajectory(&ctl_path, &controlled, Some(&envelope))?;
    report.add_file(&ctl_path)?;

    report.trajectory_summary = Some(json!({
        "uncontrolled": trajectory_summary(&uncontrolled),
        "controlled": trajectory_summary(&controlled),
    }));

    // Acceptance: controlled run completes, obeys the envelope on [0, T],
    // enters the small ball by T, and decays exponentially afterwards.
    let code = if plan.lambda == 0.0 {
        report.note("datum already classified stable: lambda = 0, envelope check skipped");
        0
    } else {
        let completed = matches!(controlled.status, TrajectoryStatus::Completed);
        let mut envelope_ok = completed;
        let mut norm_at_t = f64::NAN;
        let mut alpha_tail = 0.0_f64;
        for (i, &t) in controlled.times.iter().enumerate() {
            let n = controlled.norm0[i];
            if t <= plan.horizon_t + 1e-12 && n > envelope(t) * (1.0 + 1e-6) {
                envelope_ok = false;
            }
            if (t - plan.horizon_t).abs() < 1e-9 {
                norm_at_t = n;
            }
            if t >= plan.horizon_t - 1e-12 && v_norm > 0.0 {
                alpha_tail = alpha_tail.max(n * t.exp() / v_norm);
            }
        }
        let ball_ok = norm_at_t <= plan.r0;
        report.note(format!(
            "norm at T = {norm_at_t:e} (r0 = {:e}), realized alpha on [T, T+10] = {alpha_tail:e}",
            plan.r0
        ));
        if envelope_ok && ball_ok {
            0
        } else {
            report.note(format!(
                "envelope check failed: envelope_ok = {envelope_ok}, ball_ok = {ball_ok}"
            ));
            7
        }
    };
    report.finish(&ctx.out, code)?;
    Ok(code)
}

fn cmd_sweep(ctx: &mut Ctx) -> Result<i32> {
    let cfg = &ctx.cfg;
    let sweep = cfg
        .sweep
        .clone()
        .ok_or_else(|| Error::Config("sweep command needs a sweep section".into()))?;
    let lattice = cfg.lattice_spec()?;
    let q = cfg.quadrature_spec();
    let mut report = RunReport::new("sweep", &ctx.hash);
    let mut rows: Vec<Vec<String>> = Vec::new();

    match sweep.axis.as_str() {
        "lambda_factor" => {
            let y0 = resolve_datum(cfg, lattice)?;
            let support = cfg.support_box()?;
            let opts = SynthesisOptions {
                quadrature: q,
                seed: ctx.seed,
                amplitudes: cfg.amplitudes,
                cert_points: cfg.cert_points,
                constant_samples: cfg.estimator_samples,
                ..SynthesisOptions::default()
            };
            let (plan, _) = control::synthesize(&y0, &support, lattice, &opts)?;
            let grid = log_grid(cfg.cert_points.min(80), 1e-4, plan.horizon_t.max(1e-3));
            for &f in &sweep.values {
                let lambda = f * plan.lambda;
                let margin = match verify_psi_bound(&y0, lambda, &plan.u, &grid, plan.beta_hat) {
                    Ok(cert) => cert.worst_margin,
                    Err(_) => f64::NAN,
                };
                rows.push(vec![
                    "lambda_factor".into(),
                    fmt_f64(f),
                    "worst_margin".into(),
                    fmt_f64(margin),
                ]);
            }
        }
        "mu_times_g_inf" => {
            let (u, _, _) = build_control(cfg, lattice)?;
            let g_inf = control_trace_integral(&u, &q)?;
            for &r in &sweep.values {
                let y0 = u.scaled(r / g_inf);
                let cls = dynamics::classify(&y0, &q, cfg.classification_tolerance)?;
                rows.push(vec![
                    "mu_times_g_inf".into(),
                    fmt_f64(r),
                    "verdict".into(),
                    format!("{:?}", cls.verdict),
                ]);
                rows.push(vec![
                    "mu_times_g_inf".into(),
                    fmt_f64(r),
                    "sup_trace".into(),
                    fmt_f64(cls.sup_trace),
                ]);
            }
        }
        "cutoff_k" => {
            let grid = log_grid(cfg.cert_points.min(80), 1e-4, 3.0);
            for &kv in &sweep.values {
                let k = kv as usize;
                let mut n = 3 * k + 1;
                if n % 2 == 1 {
                    n += 1;
                }
                let lat = LatticeSpec::new(n, k)?;
                let params = ControlParams {
                    support: cfg.support_box()?,
                    p: choose_p(&cfg.support_box()?),
                    amplitudes: cfg.amplitudes,
                };
                let (centered, _) = build_control_u(&params, lat)?;
                let u = translate_support(&centered, &params.support);
                let beta = certify_decay(&u, &grid)?.beta_hat;
                rows.push(vec![
                    "cutoff_k".into(),
                    fmt_f64(kv),
                    "beta_hat".into(),
                    fmt_f64(beta),
                ]);
            }
        }
        other => return Err(Error::Config(format!("unknown sweep axis '{other}'"))),
    }

    let sweep_path = ctx.out.join("sweep.csv");
    io::write_csv(&sweep_path, &["axis", "value", "metric", "result"], &rows)?;
    report.add_file(&sweep_path)?;
    report.note(format!("{} rows on axis {}", rows.len(), sweep.axis));
    report.finish(&ctx.out, 0)?;
    Ok(0)
}
