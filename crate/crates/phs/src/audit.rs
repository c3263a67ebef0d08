//! The energy-balance ledger and the machine-checkable claims built on it:
//! per-step balance residuals, Lyapunov decrease under damping, convergence
//! order estimation against a reference solve, and the one-step quadrature
//! defect that rules out classical Runge-Kutta balance.

use crate::error::{PhsError, Result};
use crate::integrators::{integrate, Method};
use crate::solver::StepperConfig;
use crate::system::{ControlLaw, PortHamiltonianSystem, StateVector, Vector};
use crate::trajectory::Trajectory;

/// One audited step.
#[derive(Debug, Clone, Copy)]
pub struct LedgerRow {
    pub index: usize,
    pub time: f64,
    pub energy: f64,
    /// `H_{n+1} - H_n`.
    pub delta_h: f64,
    /// `h sum_j b_j (y_j^T u_j + structure power_j)` recorded by the step.
    pub supply: f64,
    /// `delta_h - supply`.
    pub residual: f64,
    /// Running `-sum supply`.
    pub a_ext_cumulative: f64,
}

/// Balance ledger of a trajectory.
#[derive(Debug, Clone)]
pub struct BalanceLedger {
    pub rows: Vec<LedgerRow>,
    pub initial_energy: f64,
    pub final_energy: f64,
}

impl BalanceLedger {
    pub fn max_abs_residual(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| r.residual.abs())
            .fold(0.0, f64::max)
    }

    /// Total external work `A_ext = -sum supply`.
    pub fn external_work(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r.a_ext_cumulative)
    }

    pub fn total_energy_change(&self) -> f64 {
        self.final_energy - self.initial_energy
    }

    /// `|delta H_total + A_ext|`, the closure of the whole ledger.
    pub fn closure_defect(&self) -> f64 {
        (self.total_energy_change() + self.external_work()).abs()
    }
}

/// Build the ledger of a trajectory whose records carry stage data.
pub fn build_ledger(traj: &Trajectory) -> Result<BalanceLedger> {
    if traj.records.len() < 2 {
        return Err(PhsError::Configuration(
            "ledger needs a trajectory with at least one step".into(),
        ));
    }
    let mut rows = Vec::with_capacity(traj.records.len() - 1);
    let mut a_ext = 0.0;
    for pair in traj.records.windows(2) {
        let (from, to) = (&pair[0], &pair[1]);
        if from.stages.is_empty() {
            return Err(PhsError::Configuration(format!(
                "record {} carries no stage data; the method does not expose \
                 its discrete ports",
                from.index
            )));
        }
        let delta_h = to.energy - from.energy;
        a_ext -= from.supply;
        let row = LedgerRow {
            index: from.index,
            time: from.time,
            energy: from.energy,
            delta_h,
            supply: from.supply,
            residual: delta_h - from.supply,
            a_ext_cumulative: a_ext,
        };
        if !row.residual.is_finite() {
            return Err(PhsError::NonFinite("ledger residual"));
        }
        rows.push(row);
    }
    Ok(BalanceLedger {
        rows,
        initial_energy: traj.records[0].energy,
        final_energy: traj.records.last().expect("non-empty").energy,
    })
}

/// Result of scanning a damped trajectory for energy increases.
#[derive(Debug, Clone, Copy)]
pub struct LyapunovReport {
    /// Steps with `delta H > threshold`.
    pub violations: usize,
    /// Largest observed `delta H` (may be negative when all steps decrease).
    pub max_delta_h: f64,
}

/// Count energy increases above `threshold` (typically ten times the solver
/// tolerance) along a trajectory driven by damping injection.
pub fn lyapunov_decrease(traj: &Trajectory, threshold: f64) -> LyapunovReport {
    let mut violations = 0;
    let mut max_delta = f64::NEG_INFINITY;
    for pair in traj.records.windows(2) {
        let delta = pair[1].energy - pair[0].energy;
        max_delta = max_delta.max(delta);
        if delta > threshold {
            violations += 1;
        }
    }
    LyapunovReport {
        violations,
        max_delta_h: max_delta,
    }
}

/// Per-step error samples and the fitted slope of a convergence study.
#[derive(Debug, Clone)]
pub struct OrderEstimate {
    /// Least-squares slope of `log error` against `log h`.
    pub slope: f64,
    /// `(h, error at t_end)` pairs in the order supplied.
    pub samples: Vec<(f64, f64)>,
}

impl OrderEstimate {
    /// Whether refining `h` never increased the error.
    pub fn errors_monotone(&self) -> bool {
        self.samples.windows(2).all(|w| w[1].1 <= w[0].1)
    }
}

/// Default reference solve: three-stage Gauss collocation at the given step.
pub fn reference_solve(
    sys: &PortHamiltonianSystem,
    law: &ControlLaw,
    x0: &StateVector,
    t_end: f64,
    h: f64,
) -> Result<Vector> {
    let n_steps = (t_end / h).round() as usize;
    if n_steps == 0 || (n_steps as f64 * h - t_end).abs() > 1e-9 * t_end.abs().max(1.0) {
        return Err(PhsError::Configuration(format!(
            "reference step {h} does not divide horizon {t_end}"
        )));
    }
    let method = Method::collocation_gauss(3)?;
    let cfg = StepperConfig::new(h)
        .with_tolerance(1e-13)
        .with_max_iterations(500);
    let traj = integrate(&method, sys, law, x0, n_steps, &cfg).map_err(|e| e.error)?;
    Ok(traj.final_state().expect("non-empty").as_vector().clone())
}

/// Reference states sampled every `sample_dt` on `0..=n_samples`, computed
/// with three-stage Gauss collocation using `substeps` steps per sample
/// interval.
pub fn reference_states(
    sys: &PortHamiltonianSystem,
    law: &ControlLaw,
    x0: &StateVector,
    n_samples: usize,
    sample_dt: f64,
    substeps: usize,
) -> Result<Vec<Vector>> {
    if substeps == 0 {
        return Err(PhsError::Configuration("substeps must be positive".into()));
    }
    let method = Method::collocation_gauss(3)?;
    let h = sample_dt / substeps as f64;
    let cfg = StepperConfig::new(h)
        .with_tolerance(1e-13)
        .with_max_iterations(500);
    let mut states = Vec::with_capacity(n_samples + 1);
    let mut x = x0.as_vector().clone();
    states.push(x.clone());
    for k in 0..n_samples {
        for j in 0..substeps {
            let t = (k * substeps + j) as f64 * h;
            let (next, _) = method.step(sys, law, t, &x, &cfg).map_err(|error| {
                PhsError::Configuration(format!("reference solve failed at t={t}: {error}"))
            })?;
            x = next;
        }
        states.push(x.clone());
    }
    Ok(states)
}

/// Estimate the global convergence order of `method` on the closed-loop
/// system over `[0, t_end]` for the given step sizes. The reference state is
/// a three-stage Gauss collocation solve at `min(h) / 100`.
pub fn estimate_order(
    method: &Method,
    sys: &PortHamiltonianSystem,
    law: &ControlLaw,
    x0: &StateVector,
    t_end: f64,
    h_list: &[f64],
) -> Result<OrderEstimate> {
    if h_list.len() < 3 {
        return Err(PhsError::Configuration(
            "order estimation needs at least three step sizes".into(),
        ));
    }
    let h_min = h_list.iter().cloned().fold(f64::INFINITY, f64::min);
    let reference = reference_solve(sys, law, x0, t_end, h_min / 100.0)?;
    let mut samples = Vec::with_capacity(h_list.len());
    for &h in h_list {
        let n_steps = (t_end / h).round() as usize;
        if n_steps == 0 || (n_steps as f64 * h - t_end).abs() > 1e-9 {
            return Err(PhsError::Configuration(format!(
                "step {h} does not divide horizon {t_end}"
            )));
        }
        let cfg = StepperConfig::new(h)
            .with_tolerance(1e-13)
            .with_max_iterations(200);
        let traj = integrate(method, sys, law, x0, n_steps, &cfg).map_err(|e| e.error)?;
        let err = (traj.final_state().expect("non-empty").as_vector() - &reference).norm();
        samples.push((h, err));
    }
    Ok(OrderEstimate {
        slope: log_log_slope(&samples),
        samples,
    })
}

fn log_log_slope(samples: &[(f64, f64)]) -> f64 {
    let n = samples.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for &(h, e) in samples {
        let (x, y) = (h.ln(), e.max(f64::MIN_POSITIVE).ln());
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

/// A Runge-Kutta coefficient table.
#[derive(Debug, Clone)]
pub struct ButcherTableau {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

impl ButcherTableau {
    /// Improved Euler (Heun): the canonical falsified method.
    pub fn improved_euler() -> Self {
        Self {
            a: vec![vec![0.0, 0.0], vec![1.0, 0.0]],
            b: vec![0.5, 0.5],
            c: vec![0.0, 1.0],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let s = self.b.len();
        if self.a.len() != s || self.c.len() != s || self.a.iter().any(|row| row.len() != s) {
            return Err(PhsError::Configuration("ragged Butcher tableau".into()));
        }
        if (self.b.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(PhsError::Configuration(
                "tableau weights must sum to 1".into(),
            ));
        }
        for (i, row) in self.a.iter().enumerate() {
            if (row.iter().sum::<f64>() - self.c[i]).abs() > 1e-12 {
                return Err(PhsError::Configuration(format!(
                    "row {i} of the tableau violates c_i = sum_j a_ij"
                )));
            }
        }
        Ok(())
    }
}

/// One-step balance report of a Runge-Kutta method on the degenerate probe
/// system `H = p - F(q)`, `q' = 1`, `p' = f(q) + u_bar`.
#[derive(Debug, Clone, Copy)]
pub struct RkBalanceReport {
    /// `H(x_1) - H(x_0)` after one step.
    pub energy_change: f64,
    /// The stage supply `h * u_bar` (every stage output pairs to `u_bar`).
    pub supply: f64,
    /// `|F(q_1) - F(q_0) - h sum_i b_i f(q_0 + c_i h)|` computed directly
    /// from the quadrature data.
    pub quadrature_defect: f64,
}

impl RkBalanceReport {
    /// Balance residual `supply - energy change`; coincides with the
    /// quadrature defect.
    pub fn balance_residual(&self) -> f64 {
        self.supply - self.energy_change
    }
}

/// Run one Runge-Kutta step on the probe system and isolate its quadrature
/// defect. With `q' = 1`, every tableau evaluates the stages at
/// `q_0 + c_i h`, so the defect measures how far the method's weights are
/// from integrating `f` exactly over the step.
pub fn rk_counterexample<F, Df>(
    f_antiderivative: F,
    f: Df,
    u_bar: f64,
    q0: f64,
    h: f64,
    tableau: &ButcherTableau,
) -> Result<RkBalanceReport>
where
    F: Fn(f64) -> f64,
    Df: Fn(f64) -> f64,
{
    tableau.validate()?;
    let p0 = 0.0;
    // Stage states: q_i = q0 + c_i h for any tableau because q' = 1.
    let q1 = q0 + h;
    let weighted_f: f64 = tableau
        .b
        .iter()
        .zip(&tableau.c)
        .map(|(&b, &c)| b * f(q0 + c * h))
        .sum();
    let p1 = p0 + h * (weighted_f + u_bar);
    let h_of = |q: f64, p: f64| p - f_antiderivative(q);
    let energy_change = h_of(q1, p1) - h_of(q0, p0);
    let supply = h * u_bar;
    let quadrature_defect = (f_antiderivative(q1) - f_antiderivative(q0) - h * weighted_f).abs();
    Ok(RkBalanceReport {
        energy_change,
        supply,
        quadrature_defect,
    })
}

/// First step index whose state has `|grad H| < tol`, if any.
pub fn stabilization_step(
    traj: &Trajectory,
    sys: &PortHamiltonianSystem,
    tol: f64,
) -> Option<usize> {
    traj.records.iter().position(|r| {
        let grad = sys.gradient(r.state.as_vector());
        grad.norm() < tol
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrators::ReferenceMethod;
    use crate::systems;
    use approx::assert_relative_eq;

    fn tight(h: f64) -> StepperConfig {
        StepperConfig::new(h)
            .with_tolerance(1e-13)
            .with_max_iterations(200)
    }

    #[test]
    fn zero_input_ledger_residuals_vanish() {
        let exp = systems::pendulum();
        let cfg = StepperConfig::new(0.5)
            .with_tolerance(1e-15)
            .with_max_iterations(200);
        let traj = integrate(
            &Method::AvfPhs,
            &exp.system,
            &ControlLaw::Zero,
            &exp.x0,
            100,
            &cfg,
        )
        .unwrap();
        let ledger = build_ledger(&traj).unwrap();
        let h0 = ledger.initial_energy;
        assert!(ledger.max_abs_residual() <= 1e-12 * (1.0 + h0.abs()));
        // Supply vanishes too, so delta H does.
        for row in &ledger.rows {
            assert!(row.supply.abs() <= 1e-12);
        }
    }

    #[test]
    fn rigid_body_ledger_closes_to_machine_precision() {
        let exp = systems::rigid_body(systems::RigidBodyParams::default());
        let cfg = StepperConfig::new(0.5)
            .with_tolerance(1e-15)
            .with_max_iterations(400);
        let traj = integrate(&Method::AvfPhs, &exp.system, &exp.law, &exp.x0, 120, &cfg).unwrap();
        let ledger = build_ledger(&traj).unwrap();
        let h0 = ledger.initial_energy.abs();
        assert!(
            ledger.closure_defect() <= 1e-12 * h0,
            "closure defect {} vs allowance {}",
            ledger.closure_defect(),
            1e-12 * h0
        );
        // The feedback spins the body down overall; the energy may rise
        // transiently while the attitude term reorients it, so only the
        // aggregate decrease is asserted.
        assert!(ledger.final_energy < ledger.initial_energy * 0.5);
    }

    #[test]
    fn improved_euler_fails_the_balance_visibly() {
        let exp = systems::pendulum();
        let traj = integrate(
            &Method::Reference(ReferenceMethod::ImprovedEuler),
            &exp.system,
            &exp.law,
            &exp.x0,
            200,
            &StepperConfig::new(0.5),
        )
        .unwrap();
        let ledger = build_ledger(&traj).unwrap();
        assert!(ledger.max_abs_residual() >= 1e-4);
    }

    #[test]
    fn ledger_requires_stage_data() {
        let params = systems::RigidBodyParams::default();
        let spec = systems::rigid_body_splitting(&params, true).unwrap();
        let exp = systems::rigid_body(params);
        let traj = integrate(
            &Method::Splitting(spec),
            &exp.system,
            &ControlLaw::Zero,
            &exp.x0,
            3,
            &StepperConfig::new(0.5),
        )
        .unwrap();
        assert!(build_ledger(&traj).is_err());
    }

    #[test]
    fn lyapunov_scan_counts_no_violations_for_damped_pendulum() {
        let exp = systems::pendulum();
        let traj = integrate(
            &Method::AvfPhs,
            &exp.system,
            &exp.law,
            &exp.x0,
            500,
            &tight(0.5),
        )
        .unwrap();
        let report = lyapunov_decrease(&traj, 1e-12);
        assert_eq!(report.violations, 0);
        assert!(report.max_delta_h <= 1e-12);
    }

    #[test]
    fn lyapunov_scan_flags_improved_euler() {
        let exp = systems::pendulum();
        let traj = integrate(
            &Method::Reference(ReferenceMethod::ImprovedEuler),
            &exp.system,
            &exp.law,
            &exp.x0,
            500,
            &StepperConfig::new(0.5),
        )
        .unwrap();
        let report = lyapunov_decrease(&traj, 1e-12);
        assert!(report.violations > 0);
        assert!(report.max_delta_h > 1e-6);
    }

    #[test]
    fn zero_input_energy_is_flat_within_tolerance() {
        let exp = systems::pendulum();
        let cfg = StepperConfig::new(0.5)
            .with_tolerance(1e-15)
            .with_max_iterations(200);
        let traj = integrate(
            &Method::AvfPhs,
            &exp.system,
            &ControlLaw::Zero,
            &exp.x0,
            200,
            &cfg,
        )
        .unwrap();
        let report = lyapunov_decrease(&traj, 1e-12);
        assert_eq!(report.violations, 0);
        assert!(report.max_delta_h.abs() <= 1e-12);
    }

    #[test]
    fn improved_euler_is_second_order_in_the_harness() {
        let exp = systems::pendulum();
        let est = estimate_order(
            &Method::Reference(ReferenceMethod::ImprovedEuler),
            &exp.system,
            &exp.law,
            &exp.x0,
            2.0,
            &[0.2, 0.1, 0.05, 0.025],
        )
        .unwrap();
        assert!((est.slope - 2.0).abs() <= 0.2, "slope {}", est.slope);
        assert!(est.errors_monotone());
    }

    #[test]
    fn quadratic_antiderivative_makes_heun_exact() {
        let report = rk_counterexample(
            |q| q * q,
            |q| 2.0 * q,
            0.7,
            0.0,
            1.0,
            &ButcherTableau::improved_euler(),
        )
        .unwrap();
        assert_relative_eq!(report.quadrature_defect, 0.0, epsilon = 1e-14);
        assert_relative_eq!(report.balance_residual(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn quintic_antiderivative_defeats_heun_by_exactly_three_halves() {
        let report = rk_counterexample(
            |q| q.powi(5),
            |q| 5.0 * q.powi(4),
            0.7,
            0.0,
            1.0,
            &ButcherTableau::improved_euler(),
        )
        .unwrap();
        // Hand arithmetic: increment 1, trapezoid (0 + 5)/2 = 2.5.
        assert_relative_eq!(report.quadrature_defect, 1.5, epsilon = 1e-13);
        assert_relative_eq!(report.balance_residual().abs(), 1.5, epsilon = 1e-13);
    }

    #[test]
    fn averaged_step_balances_the_quintic_probe() {
        let exp = systems::quadrature_probe_system(|q| q.powi(5), |q| 5.0 * q.powi(4), 0.7);
        let cfg = tight(1.0);
        let (z, record) =
            crate::integrators::step_avfphs(&exp.system, &exp.law, 0.0, exp.x0.as_vector(), &cfg)
                .unwrap();
        let dh = exp.system.hamiltonian(&z) - exp.system.hamiltonian(exp.x0.as_vector());
        assert!((dh - record.supply).abs() <= 1e-12);
    }

    #[test]
    fn tableau_validation_catches_bad_weights() {
        let mut t = ButcherTableau::improved_euler();
        t.b = vec![0.6, 0.6];
        assert!(t.validate().is_err());
    }
}
