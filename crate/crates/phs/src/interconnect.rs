//! Power-conserving interconnection of two systems.
//!
//! Closing the ports with `u = -y_c`, `u_c = y` yields a larger system over
//! the stacked state with block structure
//!
//! ```text
//!   C = [ B      -G G_c^T ]
//!       [ G_c G^T    B_c  ]
//! ```
//!
//! and summed Hamiltonian. `C` inherits skewness from the components, so the
//! composed system conserves the total energy; the discrete-gradient step on
//! the composed system conserves it exactly up to the solver tolerance.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::disgrad::DiscreteGradientScheme;
use crate::error::{PhsError, Result};
use crate::integrators::step_disgrad;
use crate::solver::StepperConfig;
use crate::system::{ControlLaw, Matrix, PortHamiltonianSystem, StateVector, Vector};
use crate::trajectory::{StepRecord, Trajectory};

/// Two systems joined through their ports, with the composed closed system.
#[derive(Debug, Clone)]
pub struct InterconnectedSystem {
    sys_a: PortHamiltonianSystem,
    sys_b: PortHamiltonianSystem,
    composed: PortHamiltonianSystem,
    dim_a: usize,
    dim_b: usize,
}

/// Join two systems by the canonical port substitution `u = -y_c`, `u_c = y`.
pub fn interconnect(
    sys_a: &PortHamiltonianSystem,
    sys_b: &PortHamiltonianSystem,
) -> Result<InterconnectedSystem> {
    if sys_a.port_dim() != sys_b.port_dim() {
        return Err(PhsError::Configuration(format!(
            "port dimensions differ: {} vs {}",
            sys_a.port_dim(),
            sys_b.port_dim()
        )));
    }
    if sys_a.port_dim() == 0 {
        return Err(PhsError::Configuration(
            "interconnection needs at least one port".into(),
        ));
    }
    if sys_a.is_dissipative() || sys_b.is_dissipative() {
        return Err(PhsError::Configuration(
            "interconnection requires skew component structures".into(),
        ));
    }

    let dim_a = sys_a.state_dim();
    let dim_b = sys_b.state_dim();
    let n = dim_a + dim_b;

    let (a_h, b_h) = (sys_a.clone(), sys_b.clone());
    let hamiltonian = move |x: &Vector| {
        a_h.hamiltonian(&x.rows(0, dim_a).into_owned())
            + b_h.hamiltonian(&x.rows(dim_a, dim_b).into_owned())
    };
    let (a_g, b_g) = (sys_a.clone(), sys_b.clone());
    let gradient = move |x: &Vector| {
        let mut grad = Vector::zeros(n);
        grad.rows_mut(0, dim_a)
            .copy_from(&a_g.gradient(&x.rows(0, dim_a).into_owned()));
        grad.rows_mut(dim_a, dim_b)
            .copy_from(&b_g.gradient(&x.rows(dim_a, dim_b).into_owned()));
        grad
    };
    let (a_s, b_s) = (sys_a.clone(), sys_b.clone());
    let structure = move |x: &Vector| {
        let xa = x.rows(0, dim_a).into_owned();
        let xb = x.rows(dim_a, dim_b).into_owned();
        let ga = a_s.input_matrix(&xa);
        let gb = b_s.input_matrix(&xb);
        let mut c = Matrix::zeros(n, n);
        c.view_mut((0, 0), (dim_a, dim_a))
            .copy_from(&a_s.structure(&xa));
        c.view_mut((dim_a, dim_a), (dim_b, dim_b))
            .copy_from(&b_s.structure(&xb));
        let coupling = &ga * gb.transpose();
        c.view_mut((0, dim_a), (dim_a, dim_b))
            .copy_from(&(-&coupling));
        c.view_mut((dim_a, 0), (dim_b, dim_a))
            .copy_from(&coupling.transpose());
        c
    };

    let mut builder = PortHamiltonianSystem::builder(n, 0)
        .hamiltonian(hamiltonian)
        .gradient(gradient)
        .structure(structure);

    // Blockwise closed-form averages compose, because the Hamiltonian is
    // separable across the two components.
    if let (Some(avg_a), Some(avg_b)) = (sys_a.averaged_gradient(), sys_b.averaged_gradient()) {
        let (avg_a, avg_b) = (avg_a.clone(), avg_b.clone());
        builder = builder.averaged_gradient(move |x: &Vector, xp: &Vector| {
            let mut g = Vector::zeros(n);
            g.rows_mut(0, dim_a).copy_from(&avg_a(
                &x.rows(0, dim_a).into_owned(),
                &xp.rows(0, dim_a).into_owned(),
            ));
            g.rows_mut(dim_a, dim_b).copy_from(&avg_b(
                &x.rows(dim_a, dim_b).into_owned(),
                &xp.rows(dim_a, dim_b).into_owned(),
            ));
            g
        });
    }

    match (sys_a.mass_matrix(), sys_b.mass_matrix()) {
        (None, None) => {}
        (ma, mb) => {
            let mut mass = Matrix::identity(n, n);
            if let Some(ma) = ma {
                mass.view_mut((0, 0), (dim_a, dim_a)).copy_from(ma);
            }
            if let Some(mb) = mb {
                mass.view_mut((dim_a, dim_a), (dim_b, dim_b)).copy_from(mb);
            }
            builder = builder.mass_matrix(mass);
        }
    }

    Ok(InterconnectedSystem {
        sys_a: sys_a.clone(),
        sys_b: sys_b.clone(),
        composed: builder.build()?,
        dim_a,
        dim_b,
    })
}

impl InterconnectedSystem {
    /// The closed composed system (no external ports).
    pub fn composed(&self) -> &PortHamiltonianSystem {
        &self.composed
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.dim_a, self.dim_b)
    }

    pub fn join_states(&self, x: &Vector, gamma: &Vector) -> Vector {
        let mut joined = Vector::zeros(self.dim_a + self.dim_b);
        joined.rows_mut(0, self.dim_a).copy_from(x);
        joined.rows_mut(self.dim_a, self.dim_b).copy_from(gamma);
        joined
    }

    pub fn split_state(&self, joined: &Vector) -> (Vector, Vector) {
        (
            joined.rows(0, self.dim_a).into_owned(),
            joined.rows(self.dim_a, self.dim_b).into_owned(),
        )
    }

    /// Component storage values `(H(x), H_c(gamma))`.
    pub fn component_energies(&self, joined: &Vector) -> (f64, f64) {
        let (x, gamma) = self.split_state(joined);
        (self.sys_a.hamiltonian(&x), self.sys_b.hamiltonian(&gamma))
    }

    /// Discrete port values of the step from `from` to `to`: the outputs of
    /// both components at the midpoint-evaluated discrete gradients, plus
    /// the substituted inputs `u = -y_c`, `u_c = y`.
    pub fn discrete_ports(
        &self,
        scheme: &DiscreteGradientScheme,
        from: &Vector,
        to: &Vector,
    ) -> DiscretePorts {
        let (xa, ga_state) = (self.split_state(from).0, self.split_state(to).0);
        let (xb, gb_state) = (self.split_state(from).1, self.split_state(to).1);
        let grad_a = scheme.eval(&self.sys_a, &xa, &ga_state);
        let grad_b = scheme.eval(&self.sys_b, &xb, &gb_state);
        let mid_a = (&xa + &ga_state) * 0.5;
        let mid_b = (&xb + &gb_state) * 0.5;
        let y = self.sys_a.input_matrix(&mid_a).transpose() * &grad_a;
        let y_c = self.sys_b.input_matrix(&mid_b).transpose() * &grad_b;
        DiscretePorts {
            input: -&y_c,
            input_c: y.clone(),
            output: y,
            output_c: y_c,
        }
    }
}

/// Discrete stage port values under the canonical substitution.
#[derive(Debug, Clone)]
pub struct DiscretePorts {
    pub output: Vector,
    pub input: Vector,
    pub output_c: Vector,
    pub input_c: Vector,
}

impl DiscretePorts {
    /// `y^T u + y_c^T u_c`; identically zero under the substitution.
    pub fn power_balance(&self) -> f64 {
        self.output.dot(&self.input) + self.output_c.dot(&self.input_c)
    }
}

/// One coupled discrete-gradient step of the composed system.
pub fn step_interconnected_disgrad(
    isys: &InterconnectedSystem,
    scheme: &DiscreteGradientScheme,
    states: (&Vector, &Vector),
    cfg: &StepperConfig,
) -> Result<((Vector, Vector), StepRecord)> {
    let joined = isys.join_states(states.0, states.1);
    let (next, record) = step_disgrad(
        isys.composed(),
        scheme,
        &ControlLaw::Zero,
        0.0,
        &joined,
        cfg,
    )?;
    Ok((isys.split_state(&next), record))
}

/// Findings of the structure pairing check.
#[derive(Debug, Clone)]
pub struct DiracReport {
    /// Max of `|g^T C g|` scaled by `|g|^2 (1 + |C|)` over all samples.
    pub max_pairing_defect: f64,
    /// Whether the graph `{(C g, g)}` has full dimension at every sample.
    pub graph_dimension_ok: bool,
}

/// Check the concrete pairing properties of the composed structure matrix:
/// the quadratic form of `C` vanishes on generated gradient-like vectors and
/// the graph of `C` has the state dimension.
pub fn check_dirac(
    isys: &InterconnectedSystem,
    sample_states: &[StateVector],
    n_pairs: usize,
) -> Result<DiracReport> {
    if sample_states.is_empty() || n_pairs == 0 {
        return Err(PhsError::Configuration(
            "check_dirac needs samples and at least one pair".into(),
        ));
    }
    let n = isys.composed().state_dim();
    let mut rng = ChaCha8Rng::seed_from_u64(0x44495241);
    let mut report = DiracReport {
        max_pairing_defect: 0.0,
        graph_dimension_ok: true,
    };
    for state in sample_states {
        let c = isys.composed().structure(state.as_vector());
        let scale = 1.0 + c.norm();
        for _ in 0..n_pairs {
            let g = Vector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
            let pairing = g.dot(&(&c * &g)).abs();
            report.max_pairing_defect = report
                .max_pairing_defect
                .max(pairing / (g.norm_squared() * scale));
        }
        // dim {(C g, g)} = rank of [C; I] stacked, which must equal n.
        let mut stacked = DMatrix::zeros(2 * n, n);
        stacked.view_mut((0, 0), (n, n)).copy_from(&c);
        stacked
            .view_mut((n, 0), (n, n))
            .copy_from(&Matrix::identity(n, n));
        if stacked.rank(1e-10) != n {
            report.graph_dimension_ok = false;
        }
    }
    Ok(report)
}

/// Pairing defect of the discrete flow/effort pairs recorded along a
/// trajectory of the composed system: `|gbar^T (X_{n+1} - X_n) / h|`, the
/// per-step conservation statement.
pub fn check_dirac_trajectory(
    isys: &InterconnectedSystem,
    scheme: &DiscreteGradientScheme,
    traj: &Trajectory,
) -> f64 {
    let mut max_defect = 0.0f64;
    for pair in traj.records.windows(2) {
        let from = pair[0].state.as_vector();
        let to = pair[1].state.as_vector();
        let grad = scheme.eval(isys.composed(), from, to);
        let flow = (to - from) / traj.step_size;
        max_defect = max_defect.max(grad.dot(&flow).abs());
    }
    max_defect
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrators::{integrate, Method};
    use crate::systems;
    use approx::assert_relative_eq;

    fn coupled_oscillators() -> InterconnectedSystem {
        let a = systems::harmonic_oscillator();
        let b = systems::oscillator_with_stiffness(2.0);
        interconnect(&a.system, &b.system).unwrap()
    }

    #[test]
    fn mismatched_ports_and_dissipation_are_rejected() {
        let pend = systems::pendulum();
        let rigid = systems::rigid_body(systems::RigidBodyParams::default());
        assert!(interconnect(&pend.system, &rigid.system).is_err());
        let mic = systems::microphone(systems::MicrophoneParams::default());
        assert!(interconnect(&pend.system, &mic.system).is_err());
    }

    #[test]
    fn decoupled_controller_leaves_block_diagonal_structure() {
        let a = systems::harmonic_oscillator();
        let b = PortHamiltonianSystem::builder(2, 1)
            .hamiltonian(|x: &Vector| 0.5 * x.norm_squared())
            .gradient(|x: &Vector| x.clone())
            .structure(crate::system::constant_matrix(Matrix::from_row_slice(
                2,
                2,
                &[0.0, 1.0, -1.0, 0.0],
            )))
            .input_matrix(crate::system::constant_matrix(Matrix::zeros(2, 1)))
            .build()
            .unwrap();
        let isys = interconnect(&a.system, &b).unwrap();
        let c = isys.composed().structure(&Vector::zeros(4));
        assert_eq!(c.view((0, 2), (2, 2)).norm(), 0.0);
        assert_eq!(c.view((2, 0), (2, 2)).norm(), 0.0);
    }

    #[test]
    fn composed_structure_is_skew_and_balances_power() {
        let isys = coupled_oscillators();
        let x = Vector::from_row_slice(&[1.0, -0.5, 0.3, 0.8]);
        let c = isys.composed().structure(&x);
        assert_eq!(c.nrows(), 4);
        assert!((&c + c.transpose()).norm() <= 1e-14);

        let ports = isys.discrete_ports(
            &DiscreteGradientScheme::AvfClosedForm,
            &x,
            &Vector::from_row_slice(&[0.9, -0.2, 0.5, 0.6]),
        );
        assert_eq!(ports.power_balance(), 0.0);
        assert_relative_eq!((&ports.input + &ports.output_c).norm(), 0.0);
    }

    #[test]
    fn swapping_components_permutes_and_flips_the_coupling() {
        let a = systems::harmonic_oscillator();
        let b = systems::oscillator_with_stiffness(2.0);
        let ab = interconnect(&a.system, &b.system).unwrap();
        let ba = interconnect(&b.system, &a.system).unwrap();
        let xa = Vector::from_row_slice(&[1.0, -0.5]);
        let xb = Vector::from_row_slice(&[0.3, 0.8]);
        let c_ab = ab.composed().structure(&ab.join_states(&xa, &xb));
        let c_ba = ba.composed().structure(&ba.join_states(&xb, &xa));
        // Permute the swapped matrix back into (a, b) ordering.
        let mut p = Matrix::zeros(4, 4);
        p.view_mut((0, 2), (2, 2))
            .copy_from(&Matrix::identity(2, 2));
        p.view_mut((2, 0), (2, 2))
            .copy_from(&Matrix::identity(2, 2));
        let permuted = &p * &c_ba * p.transpose();
        // Diagonal blocks agree; the off-diagonal coupling flips sign.
        assert_relative_eq!(
            (permuted.view((0, 0), (2, 2)) - c_ab.view((0, 0), (2, 2))).norm(),
            0.0,
            epsilon = 1e-14
        );
        assert_relative_eq!(
            (permuted.view((0, 2), (2, 2)) + c_ab.view((0, 2), (2, 2))).norm(),
            0.0,
            epsilon = 1e-14
        );
    }

    #[test]
    fn total_energy_is_conserved_while_components_exchange() {
        let isys = coupled_oscillators();
        let x0 = StateVector::from_slice(&[1.0, 0.0, 0.0, 0.0]).unwrap();
        let cfg = StepperConfig::new(0.5)
            .with_tolerance(1e-15)
            .with_max_iterations(200);
        let traj = integrate(
            &Method::AvfPhs,
            isys.composed(),
            &ControlLaw::Zero,
            &x0,
            1000,
            &cfg,
        )
        .unwrap();
        let h0 = traj.initial_energy().unwrap();
        let mut max_drift = 0.0f64;
        let mut min_a = f64::INFINITY;
        let mut max_a = f64::NEG_INFINITY;
        for r in &traj.records {
            max_drift = max_drift.max((r.energy - h0).abs());
            let (ha, _) = isys.component_energies(r.state.as_vector());
            min_a = min_a.min(ha);
            max_a = max_a.max(ha);
        }
        assert!(max_drift <= 1e-11, "total energy drift {max_drift}");
        assert!(max_a - min_a >= 1e-3, "no visible energy exchange");
    }

    #[test]
    fn origin_is_a_fixed_point_of_the_coupled_step() {
        let isys = coupled_oscillators();
        let cfg = StepperConfig::new(0.5);
        let zero = Vector::zeros(2);
        let ((x, gamma), _) = step_interconnected_disgrad(
            &isys,
            &DiscreteGradientScheme::AvfClosedForm,
            (&zero, &zero),
            &cfg,
        )
        .unwrap();
        assert_eq!(x.norm(), 0.0);
        assert_eq!(gamma.norm(), 0.0);
    }

    #[test]
    fn pendulum_with_linear_controller_conserves_along_accurate_flow() {
        // Finite differences of the total energy along a high-accuracy solve.
        let pend = systems::pendulum();
        let ctrl = systems::oscillator_with_stiffness(1.5);
        let isys = interconnect(&pend.system, &ctrl.system).unwrap();
        let x0 = StateVector::from_slice(&[2.8, 1.4, 0.2, 0.0]).unwrap();
        let cfg = StepperConfig::new(1e-3).with_tolerance(1e-14);
        let traj = integrate(
            &Method::collocation_gauss(3).unwrap(),
            isys.composed(),
            &ControlLaw::Zero,
            &x0,
            2000,
            &cfg,
        )
        .unwrap();
        let h0 = traj.initial_energy().unwrap();
        for r in traj.records.iter().step_by(200) {
            assert!((r.energy - h0).abs() <= 1e-10);
        }
    }

    #[test]
    fn dirac_pairing_vanishes_for_skew_structures() {
        let isys = coupled_oscillators();
        let samples: Vec<StateVector> = (0..5)
            .map(|k| {
                let v: Vec<f64> = (0..4).map(|i| ((i + 4 * k) as f64 * 0.71).cos()).collect();
                StateVector::from_slice(&v).unwrap()
            })
            .collect();
        let report = check_dirac(&isys, &samples, 20).unwrap();
        assert!(report.max_pairing_defect <= 1e-13);
        assert!(report.graph_dimension_ok);
    }

    #[test]
    fn dirac_defect_grows_linearly_with_symmetric_perturbation() {
        let a = systems::harmonic_oscillator();
        let mut defects = Vec::new();
        for &eps in &[1e-6, 1e-4, 1e-2] {
            let b = PortHamiltonianSystem::builder(2, 1)
                .hamiltonian(|x: &Vector| 0.5 * x.norm_squared())
                .gradient(|x: &Vector| x.clone())
                .structure(move |_: &Vector| Matrix::from_row_slice(2, 2, &[eps, 1.0, -1.0, eps]))
                .input_matrix(crate::system::constant_matrix(Matrix::from_row_slice(
                    2,
                    1,
                    &[0.0, 1.0],
                )))
                .build()
                .unwrap();
            let isys = interconnect(&a.system, &b).unwrap();
            let samples = vec![StateVector::from_slice(&[0.4, 0.1, -0.3, 0.9]).unwrap()];
            let report = check_dirac(&isys, &samples, 50).unwrap();
            defects.push((eps, report.max_pairing_defect));
        }
        // Regress log defect on log eps: slope close to one.
        let slope = (defects[2].1 / defects[0].1).ln() / (defects[2].0 / defects[0].0).ln();
        assert!((slope - 1.0).abs() < 0.1, "slope {slope}");
    }

    #[test]
    fn trajectory_pairs_live_on_the_discrete_structure() {
        let isys = coupled_oscillators();
        let x0 = StateVector::from_slice(&[1.0, 0.0, 0.0, 0.0]).unwrap();
        let cfg = StepperConfig::new(0.5)
            .with_tolerance(1e-13)
            .with_max_iterations(200);
        let traj = integrate(
            &Method::AvfPhs,
            isys.composed(),
            &ControlLaw::Zero,
            &x0,
            50,
            &cfg,
        )
        .unwrap();
        let defect = check_dirac_trajectory(&isys, &DiscreteGradientScheme::AvfClosedForm, &traj);
        assert!(defect <= 1e-12, "pairing defect {defect}");
    }

    use crate::system::PortHamiltonianSystem;
}
