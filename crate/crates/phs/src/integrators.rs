//! One-step maps.
//!
//! The structure-respecting step is the discrete-gradient method: the state
//! increment follows the structure and input matrices frozen at the chord
//! midpoint, applied to a discrete gradient, with the input evaluated on the
//! discrete output. Classical reference methods (implicit midpoint, chord
//! averaging of the full field, improved Euler) are provided for comparison
//! runs, along with `integrate` to drive any of them.

use crate::collocation::{step_collocation, CollocationTableau};
use crate::disgrad::DiscreteGradientScheme;
use crate::error::{PhsError, Result};
use crate::quadrature::QuadratureRule;
use crate::solver::{solve_implicit, StepperConfig};
use crate::splitting::{step_splitting, SplittingSpec};
use crate::system::{ControlLaw, PortHamiltonianSystem, StateVector, Vector};
use crate::trajectory::{Stage, StepRecord, Trajectory};

/// Closed-loop right-hand side `M^{-1}(B gradH + G u)` with the law closed
/// over the natural output.
pub fn closed_loop_field(
    sys: &PortHamiltonianSystem,
    law: &ControlLaw,
    t: f64,
    x: &Vector,
) -> Vector {
    let grad = sys.gradient(x);
    let y = sys.conjugate_output(x, &grad);
    let u = law.input(t, x, &y);
    let mut rhs = sys.structure(x) * &grad;
    if sys.port_dim() > 0 {
        rhs += sys.input_matrix(x) * u;
    }
    sys.apply_mass_inverse(&rhs)
}

/// One step of the discrete-gradient method.
///
/// Solves `(z - x)/h = M^{-1} (B(mid) g(x, z) + G(mid) u)` with
/// `mid = (x + z)/2`, the discrete output `y = G(mid)^T M^{-1} g(x, z)` and
/// `u` the law applied to that output (or to the midpoint state / midpoint
/// time for state-feedback and open-loop laws).
pub fn step_disgrad(
    sys: &PortHamiltonianSystem,
    scheme: &DiscreteGradientScheme,
    law: &ControlLaw,
    t: f64,
    x: &Vector,
    cfg: &StepperConfig,
) -> Result<(Vector, StepRecord)> {
    cfg.validate()?;
    let h = cfg.step_size;
    let t_mid = t + 0.5 * h;

    let guess = x + closed_loop_field(sys, law, t, x) * h;
    let residual = |z: &Vector| {
        let mid = (x + z) * 0.5;
        let g = scheme.eval(sys, x, z);
        let y = sys.conjugate_output(&mid, &g);
        let u = law.input(t_mid, &mid, &y);
        let mut rhs = sys.structure(&mid) * &g;
        if sys.port_dim() > 0 {
            rhs += sys.input_matrix(&mid) * u;
        }
        z - x - sys.apply_mass_inverse(&rhs) * h
    };
    let outcome = solve_implicit(residual, &guess, cfg)?;
    let z = outcome.solution;

    let mid = (x + &z) * 0.5;
    let g = scheme.eval(sys, x, &z);
    let stage = make_stage(sys, law, t_mid, &mid, &g, 1.0);
    let supply = h * stage.power();
    let record = StepRecord {
        index: 0,
        time: t,
        state: StateVector::new(x.clone())?,
        energy: sys.hamiltonian(x),
        supply,
        stages: vec![stage],
        solver_iterations: outcome.iterations,
    };
    Ok((z, record))
}

/// One step of the averaged-gradient method: the discrete-gradient step
/// specialized to the chord average of the gradient (closed form when the
/// system registers one, Gauss-Legendre quadrature otherwise).
pub fn step_avfphs(
    sys: &PortHamiltonianSystem,
    law: &ControlLaw,
    t: f64,
    x: &Vector,
    cfg: &StepperConfig,
) -> Result<(Vector, StepRecord)> {
    step_disgrad(sys, &DiscreteGradientScheme::AvfClosedForm, law, t, x, cfg)
}

/// Classical one-step methods applied to the closed-loop field.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReferenceMethod {
    ImplicitMidpoint,
    /// Chord average of the full closed-loop field (control term included in
    /// the average).
    PlainAvf,
    ImprovedEuler,
}

impl ReferenceMethod {
    pub fn name(self) -> &'static str {
        match self {
            Self::ImplicitMidpoint => "implicit-midpoint",
            Self::PlainAvf => "plain-avf",
            Self::ImprovedEuler => "improved-euler",
        }
    }
}

/// One step of a reference method. Stage data records the method's own
/// evaluation states so the ledger can expose where the balance fails.
pub fn step_reference(
    method: ReferenceMethod,
    sys: &PortHamiltonianSystem,
    law: &ControlLaw,
    t: f64,
    x: &Vector,
    cfg: &StepperConfig,
) -> Result<(Vector, StepRecord)> {
    cfg.validate()?;
    let h = cfg.step_size;
    let (z, stages, iterations) = match method {
        ReferenceMethod::ImplicitMidpoint => {
            let guess = x + closed_loop_field(sys, law, t, x) * h;
            let outcome = solve_implicit(
                |z| z - x - closed_loop_field(sys, law, t + 0.5 * h, &(0.5 * (x + z))) * h,
                &guess,
                cfg,
            )?;
            let mid = (x + &outcome.solution) * 0.5;
            let grad = sys.gradient(&mid);
            let stage = make_stage(sys, law, t + 0.5 * h, &mid, &grad, 1.0);
            (outcome.solution, vec![stage], outcome.iterations)
        }
        ReferenceMethod::PlainAvf => {
            let rule = QuadratureRule::gauss_legendre(8).expect("valid rule");
            let guess = x + closed_loop_field(sys, law, t, x) * h;
            let t_mid = t + 0.5 * h;
            let outcome = solve_implicit(
                |z| {
                    let avg = rule.integrate_vector(x.len(), |alpha| {
                        closed_loop_field(sys, law, t_mid, &(x * (1.0 - alpha) + z * alpha))
                    });
                    z - x - avg * h
                },
                &guess,
                cfg,
            )?;
            let mid = (x + &outcome.solution) * 0.5;
            let grad = sys.gradient(&mid);
            let stage = make_stage(sys, law, t_mid, &mid, &grad, 1.0);
            (outcome.solution, vec![stage], outcome.iterations)
        }
        ReferenceMethod::ImprovedEuler => {
            let k1 = closed_loop_field(sys, law, t, x);
            let predictor = x + &k1 * h;
            let k2 = closed_loop_field(sys, law, t + h, &predictor);
            let z = x + (k1 + k2) * (0.5 * h);
            let g1 = sys.gradient(x);
            let g2 = sys.gradient(&predictor);
            let stages = vec![
                make_stage(sys, law, t, x, &g1, 0.5),
                make_stage(sys, law, t + h, &predictor, &g2, 0.5),
            ];
            (z, stages, 0)
        }
    };
    let supply = h * stages.iter().map(|s| s.weight * s.power()).sum::<f64>();
    let record = StepRecord {
        index: 0,
        time: t,
        state: StateVector::new(x.clone())?,
        energy: sys.hamiltonian(x),
        supply,
        stages,
        solver_iterations: iterations,
    };
    Ok((z, record))
}

/// Build a weighted stage from a stage state and gradient-like vector.
pub(crate) fn make_stage(
    sys: &PortHamiltonianSystem,
    law: &ControlLaw,
    t: f64,
    state: &Vector,
    grad: &Vector,
    weight: f64,
) -> Stage {
    let y = sys.conjugate_output(state, grad);
    let u = law.input(t, state, &y);
    let structure_power = sys
        .apply_mass_inverse(grad)
        .dot(&(sys.structure(state) * grad));
    Stage {
        weight,
        output: y,
        input: u,
        structure_power,
    }
}

/// A one-step map usable by [`integrate`] and the benchmark driver.
#[derive(Clone)]
pub enum Method {
    /// Discrete-gradient step with the given scheme.
    DiscreteGradient(DiscreteGradientScheme),
    /// Discrete-gradient step with the chord-averaged gradient.
    AvfPhs,
    /// Averaged-gradient collocation with the given tableau.
    Collocation(CollocationTableau),
    Reference(ReferenceMethod),
    /// Palindromic composition of two sub-flows.
    Splitting(SplittingSpec),
}

impl Method {
    pub fn collocation_gauss(stages: usize) -> Result<Self> {
        Ok(Self::Collocation(CollocationTableau::gauss(stages)?))
    }

    pub fn name(&self) -> String {
        match self {
            Self::DiscreteGradient(scheme) => format!("disgrad-{}", scheme.name()),
            Self::AvfPhs => "avfphs".to_string(),
            Self::Collocation(t) => format!("collocation-{}", t.stages()),
            Self::Reference(m) => m.name().to_string(),
            Self::Splitting(_) => "splitting".to_string(),
        }
    }

    /// Simulated time consumed by one step at step-size parameter `h`.
    pub fn effective_step(&self, h: f64) -> f64 {
        match self {
            Self::Splitting(_) => 2.0 * h,
            _ => h,
        }
    }

    pub fn step(
        &self,
        sys: &PortHamiltonianSystem,
        law: &ControlLaw,
        t: f64,
        x: &Vector,
        cfg: &StepperConfig,
    ) -> Result<(Vector, StepRecord)> {
        match self {
            Self::DiscreteGradient(scheme) => step_disgrad(sys, scheme, law, t, x, cfg),
            Self::AvfPhs => step_avfphs(sys, law, t, x, cfg),
            Self::Collocation(tableau) => step_collocation(sys, tableau, law, t, x, cfg),
            Self::Reference(m) => step_reference(*m, sys, law, t, x, cfg),
            Self::Splitting(spec) => {
                let z = step_splitting(spec, x, cfg.step_size)?;
                let record = StepRecord {
                    index: 0,
                    time: t,
                    state: StateVector::new(x.clone())?,
                    energy: sys.hamiltonian(x),
                    stages: Vec::new(),
                    supply: 0.0,
                    solver_iterations: 0,
                };
                Ok((z, record))
            }
        }
    }
}

/// A step failure wrapped with its index and the completed prefix.
#[derive(Debug)]
pub struct IntegrationFailure {
    pub step_index: usize,
    pub error: PhsError,
    pub partial: Trajectory,
}

impl std::fmt::Display for IntegrationFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "step {} failed: {}", self.step_index, self.error)
    }
}

impl std::error::Error for IntegrationFailure {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

/// Drive `n_steps` sequential steps from `x0`, collecting all records.
///
/// The trajectory always ends with a stage-free record holding the final
/// state. On failure the partial trajectory (closed the same way) rides
/// along with the error.
pub fn integrate(
    method: &Method,
    sys: &PortHamiltonianSystem,
    law: &ControlLaw,
    x0: &StateVector,
    n_steps: usize,
    cfg: &StepperConfig,
) -> std::result::Result<Trajectory, IntegrationFailure> {
    let mut traj = Trajectory::new(method.effective_step(cfg.step_size), method.name());
    if n_steps == 0 {
        let err = PhsError::Configuration("integrate needs at least one step".into());
        return Err(IntegrationFailure {
            step_index: 0,
            error: err,
            partial: traj,
        });
    }
    let dt = method.effective_step(cfg.step_size);
    let mut x = x0.as_vector().clone();
    for n in 0..n_steps {
        let t = n as f64 * dt;
        match method.step(sys, law, t, &x, cfg) {
            Ok((next, mut record)) => {
                record.index = n;
                traj.records.push(record);
                x = next;
            }
            Err(error) => {
                close_trajectory(&mut traj, sys, n, t, &x);
                return Err(IntegrationFailure {
                    step_index: n,
                    error,
                    partial: traj,
                });
            }
        }
    }
    close_trajectory(&mut traj, sys, n_steps, n_steps as f64 * dt, &x);
    Ok(traj)
}

fn close_trajectory(
    traj: &mut Trajectory,
    sys: &PortHamiltonianSystem,
    index: usize,
    time: f64,
    x: &Vector,
) {
    traj.records.push(StepRecord {
        index,
        time,
        state: StateVector::new(x.clone()).unwrap_or_else(|_| {
            StateVector::new(Vector::zeros(x.len())).expect("zeros are finite")
        }),
        energy: sys.hamiltonian(x),
        stages: Vec::new(),
        supply: 0.0,
        solver_iterations: 0,
    });
}
