//! Experiment construction, runs, comparison tables and CSV emission.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use phs::audit::{build_ledger, reference_states, BalanceLedger};
use phs::disgrad::DiscreteGradientScheme;
use phs::integrators::ReferenceMethod;
use phs::systems::{self, Experiment, MicrophoneParams, RigidBodyParams};
use phs::{integrate, ControlLaw, Method, StepperConfig, Trajectory, Vector};

use crate::options::Options;

/// Failure modes mapped to process exit codes.
pub enum CliError {
    /// Exit code 1.
    Config(String),
    /// Exit code 2.
    Solver(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Solver(_) => 2,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Solver(m) => m,
        }
    }
}

fn config_err<T: std::fmt::Display>(msg: T) -> CliError {
    CliError::Config(msg.to_string())
}

/// Significand-preserving float formatting (17 significant digits).
fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn build_experiment(opts: &Options) -> Result<Experiment, CliError> {
    let ov = &opts.overrides;
    let mut exp = match opts.experiment.as_str() {
        "pendulum" => systems::pendulum(),
        "rigid-body" => {
            let mut params = RigidBodyParams::default();
            if let Some(inertia) = ov.inertia {
                params.inertia = inertia;
            }
            if let Some(kd) = ov.kd {
                params.k_d = kd;
            }
            systems::rigid_body(params)
        }
        "microphone" => {
            let mut params = MicrophoneParams::default();
            if let Some(r) = ov.resistance {
                params.resistance = r;
            }
            if let Some(c) = ov.damping {
                params.damping = c;
            }
            if let Some(m) = ov.mass {
                params.mass = m;
            }
            if let Some(q) = ov.rest_position {
                params.rest_position = q;
            }
            if let Some(x0) = &ov.x0 {
                if x0.len() != 3 {
                    return Err(config_err("microphone x0 override needs 3 values"));
                }
                params.x0 = [x0[0], x0[1], x0[2]];
            }
            systems::microphone(params)
        }
        "custom" => systems::random_linear_phs(
            ov.seed.unwrap_or(42),
            ov.state_dim.unwrap_or(4),
            ov.port_dim.unwrap_or(2),
        ),
        other => return Err(config_err(format!("unknown experiment {other}"))),
    };
    if opts.experiment != "microphone" {
        if let Some(x0) = &ov.x0 {
            if x0.len() != exp.system.state_dim() {
                return Err(config_err(format!(
                    "x0 override needs {} values, got {}",
                    exp.system.state_dim(),
                    x0.len()
                )));
            }
            exp.x0 = phs::StateVector::from_slice(x0).map_err(config_err)?;
        }
    }
    Ok(exp)
}

pub fn build_method(name: &str, opts: &Options) -> Result<Method, CliError> {
    match name {
        "avfphs" => Ok(Method::AvfPhs),
        "disgrad-secant" => Ok(Method::DiscreteGradient(
            DiscreteGradientScheme::MidpointSecant,
        )),
        "collocation" => Method::collocation_gauss(opts.stages).map_err(config_err),
        "implicit-midpoint" => Ok(Method::Reference(ReferenceMethod::ImplicitMidpoint)),
        "plain-avf" => Ok(Method::Reference(ReferenceMethod::PlainAvf)),
        "improved-euler" => Ok(Method::Reference(ReferenceMethod::ImprovedEuler)),
        "splitting" => {
            if opts.experiment != "rigid-body" {
                return Err(config_err(
                    "splitting is bundled only for the rigid body (exact sub-flows required)",
                ));
            }
            let mut params = RigidBodyParams::default();
            if let Some(inertia) = opts.overrides.inertia {
                params.inertia = inertia;
            }
            if let Some(kd) = opts.overrides.kd {
                params.k_d = kd;
            }
            let spec = systems::rigid_body_splitting(&params, true).map_err(config_err)?;
            Ok(Method::Splitting(spec))
        }
        other => Err(config_err(format!(
            "unknown method {other} (expected avfphs, disgrad-secant, collocation, splitting, \
             implicit-midpoint, plain-avf or improved-euler)"
        ))),
    }
}

/// The control law a run actually applies: the splitting composition embeds
/// pure damping instead of the experiment's full feedback.
fn effective_law(method_name: &str, exp: &Experiment, opts: &Options) -> ControlLaw {
    if method_name == "splitting" {
        let kd = opts.overrides.kd.unwrap_or(RigidBodyParams::default().k_d);
        let inertia = opts
            .overrides
            .inertia
            .unwrap_or(RigidBodyParams::default().inertia);
        ControlLaw::output_feedback(move |y: &Vector| {
            Vector::from_fn(3, |i, _| kd[i] * inertia[i] * y[i])
        })
    } else {
        exp.law.clone()
    }
}

fn stepper_config(opts: &Options) -> StepperConfig {
    StepperConfig::new(opts.step_size)
        .with_tolerance(opts.tol)
        .with_max_iterations(opts.max_iter)
}

struct RunResult {
    trajectory: Trajectory,
    ledger: Option<BalanceLedger>,
}

fn run_method(method_name: &str, opts: &Options, exp: &Experiment) -> Result<RunResult, CliError> {
    let method = build_method(method_name, opts)?;
    let law = effective_law(method_name, exp, opts);
    let cfg = stepper_config(opts);
    cfg.validate().map_err(config_err)?;
    let trajectory = integrate(&method, &exp.system, &law, &exp.x0, opts.steps, &cfg)
        .map_err(|e| CliError::Solver(format!("step {} failed: {}", e.step_index, e.error)))?;
    let ledger = if matches!(method, Method::Splitting(_)) {
        None
    } else {
        Some(build_ledger(&trajectory).map_err(config_err)?)
    };
    Ok(RunResult { trajectory, ledger })
}

fn ensure_parent(path: &str) -> Result<(), CliError> {
    if let Some(parent) = Path::new(path).parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .map_err(|e| config_err(format!("cannot create {}: {e}", parent.display())))?;
        }
    }
    Ok(())
}

fn open(path: &str) -> Result<BufWriter<File>, CliError> {
    ensure_parent(path)?;
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| config_err(format!("cannot write {path}: {e}")))
}

/// Port values shown for a record: recorded stage means while stepping, the
/// pointwise closed-loop values on the final record (and everywhere for
/// methods without stage data).
fn display_ports(exp: &Experiment, law: &ControlLaw, rec: &phs::StepRecord) -> (Vector, Vector) {
    match (rec.mean_output(), rec.mean_input()) {
        (Some(y), Some(u)) => (y, u),
        _ => {
            let x = rec.state.as_vector();
            let grad = exp.system.gradient(x);
            let y = exp.system.conjugate_output(x, &grad);
            let u = law.input(rec.time, x, &y);
            (y, u)
        }
    }
}

fn write_trajectory_csv(
    path: &str,
    exp: &Experiment,
    law: &ControlLaw,
    traj: &Trajectory,
) -> Result<(), CliError> {
    let mut w = open(path)?;
    let n = exp.system.state_dim();
    let m = exp.system.port_dim();
    let rigid = exp.name.starts_with("rigid-body");
    let mut header = String::from("step,t");
    for i in 1..=n {
        header.push_str(&format!(",x_{i}"));
    }
    header.push_str(",H");
    for i in 1..=m {
        header.push_str(&format!(",y_{i}"));
    }
    for i in 1..=m {
        header.push_str(&format!(",u_{i}"));
    }
    if rigid {
        header.push_str(",q_norm_drift");
    }
    writeln!(w, "{header}").map_err(config_err)?;

    let q_norm0 = if rigid {
        exp.x0.as_vector().rows(3, 4).norm()
    } else {
        0.0
    };
    for rec in &traj.records {
        let mut line = format!("{},{}", rec.index, fmt(rec.time));
        for v in rec.state.as_vector().iter() {
            line.push_str(&format!(",{}", fmt(*v)));
        }
        line.push_str(&format!(",{}", fmt(rec.energy)));
        let (y, u) = display_ports(exp, law, rec);
        for v in y.iter() {
            line.push_str(&format!(",{}", fmt(*v)));
        }
        for v in u.iter() {
            line.push_str(&format!(",{}", fmt(*v)));
        }
        if rigid {
            let drift = rec.state.as_vector().rows(3, 4).norm() - q_norm0;
            line.push_str(&format!(",{}", fmt(drift)));
        }
        writeln!(w, "{line}").map_err(config_err)?;
    }
    Ok(())
}

fn write_ledger_csv(path: &str, ledger: &BalanceLedger) -> Result<(), CliError> {
    let mut w = open(path)?;
    writeln!(w, "step,t,H,dH,supply,residual,A_ext_cumulative").map_err(config_err)?;
    for row in &ledger.rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            row.index,
            fmt(row.time),
            fmt(row.energy),
            fmt(row.delta_h),
            fmt(row.supply),
            fmt(row.residual),
            fmt(row.a_ext_cumulative)
        )
        .map_err(config_err)?;
    }
    Ok(())
}

fn print_summary(opts: &Options, method_name: &str, exp: &Experiment, result: &RunResult) {
    let traj = &result.trajectory;
    let final_state = traj.final_state().expect("non-empty trajectory");
    println!(
        "experiment={} method={} h={} steps={} effective_step={}",
        opts.experiment, method_name, opts.step_size, opts.steps, traj.step_size
    );
    println!("final H = {}", fmt(traj.records.last().unwrap().energy));
    let (total_iters, max_iters) = traj.records.iter().fold((0usize, 0usize), |(t, m), r| {
        (t + r.solver_iterations, m.max(r.solver_iterations))
    });
    println!("solver iterations: total {total_iters}, max per step {max_iters}");
    match &result.ledger {
        Some(ledger) => {
            println!(
                "max |balance residual| = {}",
                fmt(ledger.max_abs_residual())
            );
            println!("|dH_total + A_ext| = {}", fmt(ledger.closure_defect()));
        }
        None => {
            eprintln!(
                "note: {} exposes no stage data; ledger skipped",
                method_name
            );
        }
    }
    if opts.experiment == "pendulum" {
        let rotations = (final_state[0] / std::f64::consts::TAU).round() as i64;
        println!("rotation count = {rotations}");
    }
    if opts.experiment == "rigid-body" {
        let drift =
            final_state.as_vector().rows(3, 4).norm() - exp.x0.as_vector().rows(3, 4).norm();
        println!("quaternion norm drift = {}", fmt(drift));
    }
}

/// Run one experiment/method pair and write its files.
pub fn run_single(opts: &Options) -> Result<(), CliError> {
    let exp = build_experiment(opts)?;
    let result = run_method(&opts.method, opts, &exp)?;
    let law = effective_law(&opts.method, &exp, opts);

    let traj_path = format!("{}.trajectory.csv", opts.out);
    write_trajectory_csv(&traj_path, &exp, &law, &result.trajectory)?;
    let mut written = vec![traj_path];
    if let Some(ledger) = &result.ledger {
        let ledger_path = format!("{}.ledger.csv", opts.out);
        write_ledger_csv(&ledger_path, ledger)?;
        written.push(ledger_path);
    }
    print_summary(opts, &opts.method, &exp, &result);
    println!("wrote: {}", written.join(" "));
    Ok(())
}

/// Run several methods, write per-method files plus an aligned comparison
/// table with state, energy-error and input columns per method.
pub fn run_compare(opts: &Options, methods: &[String]) -> Result<(), CliError> {
    if methods.is_empty() {
        return Err(config_err("--compare needs at least one method"));
    }
    let exp = build_experiment(opts)?;
    let substeps = (opts.step_size / opts.oracle_h).round().max(1.0) as usize;
    let oracle = reference_states(
        &exp.system,
        &exp.law,
        &exp.x0,
        opts.steps,
        opts.step_size,
        substeps,
    )
    .map_err(|e| CliError::Solver(format!("oracle solve failed: {e}")))?;

    // A failing method is dropped with a note; the survivors still get a
    // (partial) comparison table.
    let mut runs = Vec::new();
    let mut failed: Option<CliError> = None;
    for name in methods {
        let result = match run_method(name, opts, &exp) {
            Ok(result) => result,
            Err(err @ CliError::Solver(_)) => {
                eprintln!(
                    "method {name} dropped from the comparison: {}",
                    err.message()
                );
                failed.get_or_insert(err);
                continue;
            }
            Err(err) => return Err(err),
        };
        let law = effective_law(name, &exp, opts);
        let base = format!("{}.{}", opts.out, name);
        write_trajectory_csv(
            &format!("{base}.trajectory.csv"),
            &exp,
            &law,
            &result.trajectory,
        )?;
        if let Some(ledger) = &result.ledger {
            write_ledger_csv(&format!("{base}.ledger.csv"), ledger)?;
        }
        runs.push((name.clone(), law, result));
    }
    if runs.is_empty() {
        return Err(failed.unwrap_or_else(|| config_err("no method completed")));
    }

    let cmp_path = format!("{}.comparison.csv", opts.out);
    let mut w = open(&cmp_path)?;
    let mut header = String::from("step,t");
    for (name, _, _) in &runs {
        header.push_str(&format!(",x1_{name},Herr_{name},u1_{name}"));
    }
    writeln!(w, "{header}").map_err(config_err)?;
    for k in 0..=opts.steps {
        let h_ref = exp.system.hamiltonian(&oracle[k]);
        let mut line = format!("{},{}", k, fmt(k as f64 * opts.step_size));
        for (_, law, result) in &runs {
            let rec = &result.trajectory.records[k];
            let (_, u) = display_ports(&exp, law, rec);
            let u1 = u.get(0).copied().unwrap_or(0.0);
            line.push_str(&format!(
                ",{},{},{}",
                fmt(rec.state.as_vector()[0]),
                fmt((rec.energy - h_ref).abs()),
                fmt(u1)
            ));
        }
        writeln!(w, "{line}").map_err(config_err)?;
    }
    drop(w);

    println!(
        "comparison on {} ({} steps, h = {}, oracle substeps {substeps})",
        opts.experiment, opts.steps, opts.step_size
    );
    println!(
        "{:<18} {:>14} {:>14}",
        "method", "max |H error|", "final x1"
    );
    for (name, _, result) in &runs {
        let max_err = result
            .trajectory
            .records
            .iter()
            .enumerate()
            .map(|(k, r)| (r.energy - exp.system.hamiltonian(&oracle[k])).abs())
            .fold(0.0, f64::max);
        let final_x1 = result.trajectory.final_state().unwrap()[0];
        println!("{name:<18} {max_err:>14.6e} {final_x1:>14.6}");
    }
    println!("wrote: {cmp_path}");
    match failed {
        Some(err) => Err(err),
        None => Ok(()),
    }
}
