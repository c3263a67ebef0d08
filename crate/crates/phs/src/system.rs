//! Input-state-output port-Hamiltonian system model.
//!
//! A system couples a Hamiltonian (storage function) `H` and its gradient
//! with a structure matrix `B(x)`, an input matrix `G(x)` and an optional
//! constant mass matrix `M` on the left-hand side:
//!
//! ```text
//!   M x' = B(x) grad H(x) + G(x) u,      y = G(x)^T grad H(x).
//! ```
//!
//! `B` is skew-symmetric for lossless systems. Dissipative systems declare a
//! decomposition `B = J + S` with `J` skew and `S` symmetric negative
//! semidefinite, so that the power identity `dH/dt = y^T u + gradH^T S gradH`
//! stays checkable.
//!
//! All callbacks must be pure; systems are immutable after construction and
//! safe to share across threads.

use std::fmt;
use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{PhsError, Result};

/// Dense column vector used for states, gradients, ports.
pub type Vector = DVector<f64>;
/// Dense matrix used for structure and input maps.
pub type Matrix = DMatrix<f64>;

type ScalarFn = Arc<dyn Fn(&Vector) -> f64 + Send + Sync>;
type VectorFn = Arc<dyn Fn(&Vector) -> Vector + Send + Sync>;
type MatrixFn = Arc<dyn Fn(&Vector) -> Matrix + Send + Sync>;
type TimeFn = Arc<dyn Fn(f64) -> Vector + Send + Sync>;
type ChordFn = Arc<dyn Fn(&Vector, &Vector) -> Vector + Send + Sync>;

/// State vector in `R^n` with all entries finite.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector(Vector);

impl StateVector {
    /// Wrap a raw vector, rejecting NaN and infinities.
    pub fn new(entries: Vector) -> Result<Self> {
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(PhsError::NonFinite("state vector"));
        }
        Ok(Self(entries))
    }

    pub fn from_slice(entries: &[f64]) -> Result<Self> {
        Self::new(Vector::from_row_slice(entries))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_vector(&self) -> &Vector {
        &self.0
    }

    pub fn into_vector(self) -> Vector {
        self.0
    }
}

impl std::ops::Deref for StateVector {
    type Target = Vector;
    fn deref(&self) -> &Vector {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for StateVector {
    type Error = PhsError;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(Vector::from_vec(v))
    }
}

/// The system quadruple `(H, grad H, B, G)` plus dimensions and options.
#[derive(Clone)]
pub struct PortHamiltonianSystem {
    state_dim: usize,
    port_dim: usize,
    hamiltonian: ScalarFn,
    gradient: VectorFn,
    structure: MatrixFn,
    input_matrix: MatrixFn,
    /// Skew part `J(x)` when the full `B = J + S` carries dissipation.
    skew_part: Option<MatrixFn>,
    mass_matrix: Option<Matrix>,
    mass_inverse: Option<Matrix>,
    /// Exact chord-averaged gradient, when the owner can supply one in
    /// closed form. Averaging integrators prefer it over quadrature.
    averaged_gradient: Option<ChordFn>,
}

impl fmt::Debug for PortHamiltonianSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PortHamiltonianSystem")
            .field("state_dim", &self.state_dim)
            .field("port_dim", &self.port_dim)
            .field("dissipative", &self.skew_part.is_some())
            .field("mass_matrix", &self.mass_matrix.is_some())
            .finish()
    }
}

impl PortHamiltonianSystem {
    /// Start building a system with state dimension `n` and port dimension `m`.
    pub fn builder(state_dim: usize, port_dim: usize) -> SystemBuilder {
        SystemBuilder::new(state_dim, port_dim)
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn port_dim(&self) -> usize {
        self.port_dim
    }

    pub fn hamiltonian(&self, x: &Vector) -> f64 {
        (self.hamiltonian)(x)
    }

    pub fn gradient(&self, x: &Vector) -> Vector {
        (self.gradient)(x)
    }

    /// Full structure matrix `B(x)` (including any dissipative part).
    pub fn structure(&self, x: &Vector) -> Matrix {
        (self.structure)(x)
    }

    /// Declared skew part `J(x)`; equals `B(x)` for lossless systems.
    pub fn skew_structure(&self, x: &Vector) -> Matrix {
        match &self.skew_part {
            Some(j) => j(x),
            None => (self.structure)(x),
        }
    }

    pub fn input_matrix(&self, x: &Vector) -> Matrix {
        (self.input_matrix)(x)
    }

    pub fn is_dissipative(&self) -> bool {
        self.skew_part.is_some()
    }

    pub fn mass_matrix(&self) -> Option<&Matrix> {
        self.mass_matrix.as_ref()
    }

    /// Apply `M^{-1}` (identity when no mass matrix is set).
    pub fn apply_mass_inverse(&self, v: &Vector) -> Vector {
        match &self.mass_inverse {
            Some(minv) => minv * v,
            None => v.clone(),
        }
    }

    /// Closed-form chord-averaged gradient if one was registered.
    pub fn averaged_gradient(&self) -> Option<&ChordFn> {
        self.averaged_gradient.as_ref()
    }

    fn check_state(&self, x: &Vector, context: &'static str) -> Result<()> {
        if x.len() != self.state_dim {
            return Err(PhsError::DimensionMismatch {
                context,
                expected: self.state_dim,
                found: x.len(),
            });
        }
        Ok(())
    }

    fn check_input(&self, u: &Vector, context: &'static str) -> Result<()> {
        if u.len() != self.port_dim {
            return Err(PhsError::DimensionMismatch {
                context,
                expected: self.port_dim,
                found: u.len(),
            });
        }
        Ok(())
    }

    /// Right-hand side `M^{-1} (B(x) grad H(x) + G(x) u)`.
    pub fn vector_field(&self, x: &Vector, u: &Vector) -> Result<Vector> {
        self.check_state(x, "vector_field state")?;
        self.check_input(u, "vector_field input")?;
        let grad = self.gradient(x);
        let mut rhs = self.structure(x) * &grad;
        if self.port_dim > 0 {
            rhs += self.input_matrix(x) * u;
        }
        Ok(self.apply_mass_inverse(&rhs))
    }

    /// Natural output `y = G(x)^T grad H(x)`.
    pub fn output(&self, x: &Vector) -> Result<Vector> {
        self.check_state(x, "output state")?;
        if self.port_dim == 0 {
            return Ok(Vector::zeros(0));
        }
        Ok(self.input_matrix(x).transpose() * self.gradient(x))
    }

    /// Port output conjugate to `u` in the power balance,
    /// `G(x)^T M^{-1} grad H(x)`; identical to [`output`](Self::output)
    /// when there is no mass matrix.
    pub fn conjugate_output(&self, x: &Vector, grad: &Vector) -> Vector {
        if self.port_dim == 0 {
            return Vector::zeros(0);
        }
        let g = self.input_matrix(x);
        match &self.mass_inverse {
            Some(minv) => g.transpose() * (minv * grad),
            None => g.transpose() * grad,
        }
    }

    /// Instantaneous supplied power `y^T u`.
    pub fn energy_rate(&self, x: &Vector, u: &Vector) -> Result<f64> {
        self.check_input(u, "energy_rate input")?;
        Ok(self.output(x)?.dot(u))
    }

    /// Sampling-based validation of the structural contracts.
    pub fn validate(&self, samples: &[StateVector]) -> Result<ValidationReport> {
        if samples.is_empty() {
            return Err(PhsError::Configuration(
                "validation needs a non-empty sample set".into(),
            ));
        }
        let mut report = ValidationReport {
            structure_skew_defect: 0.0,
            skew_part_defect: 0.0,
            symmetric_part_psd_defect: 0.0,
            gradient_mismatch: 0.0,
            mass_positive_definite: self.mass_matrix.is_none()
                || Cholesky::new(self.mass_matrix.clone().unwrap()).is_some(),
        };
        for sample in samples {
            let x = sample.as_vector();
            self.check_state(x, "validate sample")?;
            let b = self.structure(x);
            report.structure_skew_defect =
                report.structure_skew_defect.max(relative_skew_defect(&b));
            let j = self.skew_structure(x);
            report.skew_part_defect = report.skew_part_defect.max(relative_skew_defect(&j));
            if self.is_dissipative() {
                // S = B - J must be symmetric negative semidefinite.
                let s = &b - &j;
                let sym = (&s + s.transpose()) * 0.5;
                let asym_defect = (&s - s.transpose()).norm() / (1.0 + s.norm());
                let max_eig = sym
                    .symmetric_eigen()
                    .eigenvalues
                    .iter()
                    .cloned()
                    .fold(f64::NEG_INFINITY, f64::max);
                report.symmetric_part_psd_defect = report
                    .symmetric_part_psd_defect
                    .max(asym_defect)
                    .max(max_eig.max(0.0) / (1.0 + s.norm()));
            }
            report.gradient_mismatch = report.gradient_mismatch.max(self.gradient_defect(x));
        }
        Ok(report)
    }

    /// Relative mismatch between the supplied gradient and central finite
    /// differences of `H` at `x`.
    fn gradient_defect(&self, x: &Vector) -> f64 {
        let grad = self.gradient(x);
        let mut fd = Vector::zeros(self.state_dim);
        for i in 0..self.state_dim {
            let h = 1e-6 * (1.0 + x[i].abs());
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += h;
            xm[i] -= h;
            fd[i] = (self.hamiltonian(&xp) - self.hamiltonian(&xm)) / (2.0 * h);
        }
        (fd - &grad).norm() / (1.0 + grad.norm())
    }
}

/// Findings of [`PortHamiltonianSystem::validate`].
#[derive(Debug, Clone)]
pub struct ValidationReport {
    /// Max relative skew defect `|B + B^T| / (1 + |B|)` of the full structure.
    pub structure_skew_defect: f64,
    /// Same defect for the declared skew part `J`.
    pub skew_part_defect: f64,
    /// How far `S = B - J` is from symmetric negative semidefinite.
    pub symmetric_part_psd_defect: f64,
    /// Max relative gradient / finite-difference mismatch.
    pub gradient_mismatch: f64,
    /// Whether the mass matrix factorizes with positive pivots.
    pub mass_positive_definite: bool,
}

impl ValidationReport {
    /// Whether the structure matrix is skew within the library tolerance.
    pub fn structure_is_skew(&self) -> bool {
        self.structure_skew_defect <= 1e-12
    }
}

fn relative_skew_defect(b: &Matrix) -> f64 {
    (b + b.transpose()).norm() / (1.0 + b.norm())
}

/// Builder for [`PortHamiltonianSystem`].
pub struct SystemBuilder {
    state_dim: usize,
    port_dim: usize,
    hamiltonian: Option<ScalarFn>,
    gradient: Option<VectorFn>,
    structure: Option<MatrixFn>,
    skew_part: Option<MatrixFn>,
    input_matrix: Option<MatrixFn>,
    mass_matrix: Option<Matrix>,
    averaged_gradient: Option<ChordFn>,
}

impl SystemBuilder {
    fn new(state_dim: usize, port_dim: usize) -> Self {
        Self {
            state_dim,
            port_dim,
            hamiltonian: None,
            gradient: None,
            structure: None,
            skew_part: None,
            input_matrix: None,
            mass_matrix: None,
            averaged_gradient: None,
        }
    }

    pub fn hamiltonian<F>(mut self, f: F) -> Self
    where
        F: Fn(&Vector) -> f64 + Send + Sync + 'static,
    {
        self.hamiltonian = Some(Arc::new(f));
        self
    }

    pub fn gradient<F>(mut self, f: F) -> Self
    where
        F: Fn(&Vector) -> Vector + Send + Sync + 'static,
    {
        self.gradient = Some(Arc::new(f));
        self
    }

    /// Skew structure matrix `B(x)` of a lossless system.
    pub fn structure<F>(mut self, f: F) -> Self
    where
        F: Fn(&Vector) -> Matrix + Send + Sync + 'static,
    {
        self.structure = Some(Arc::new(f));
        self
    }

    /// Structure with a declared decomposition `B = J + S`.
    pub fn structure_with_dissipation<F, J>(mut self, full: F, skew: J) -> Self
    where
        F: Fn(&Vector) -> Matrix + Send + Sync + 'static,
        J: Fn(&Vector) -> Matrix + Send + Sync + 'static,
    {
        self.structure = Some(Arc::new(full));
        self.skew_part = Some(Arc::new(skew));
        self
    }

    pub fn input_matrix<F>(mut self, f: F) -> Self
    where
        F: Fn(&Vector) -> Matrix + Send + Sync + 'static,
    {
        self.input_matrix = Some(Arc::new(f));
        self
    }

    /// Constant symmetric positive-definite left-hand factor.
    pub fn mass_matrix(mut self, m: Matrix) -> Self {
        self.mass_matrix = Some(m);
        self
    }

    /// Register a closed-form chord-averaged gradient
    /// `(x, x') -> int_0^1 grad H(x (1-a) + x' a) da`.
    pub fn averaged_gradient<F>(mut self, f: F) -> Self
    where
        F: Fn(&Vector, &Vector) -> Vector + Send + Sync + 'static,
    {
        self.averaged_gradient = Some(Arc::new(f));
        self
    }

    pub fn build(self) -> Result<PortHamiltonianSystem> {
        if self.state_dim == 0 {
            return Err(PhsError::Configuration(
                "state dimension must be positive".into(),
            ));
        }
        let hamiltonian = self
            .hamiltonian
            .ok_or_else(|| PhsError::Configuration("missing hamiltonian".into()))?;
        let gradient = self
            .gradient
            .ok_or_else(|| PhsError::Configuration("missing gradient".into()))?;
        let structure = self
            .structure
            .ok_or_else(|| PhsError::Configuration("missing structure matrix".into()))?;
        let n = self.state_dim;
        let m = self.port_dim;
        let input_matrix: MatrixFn = match self.input_matrix {
            Some(g) => g,
            None if m == 0 => Arc::new(move |_: &Vector| Matrix::zeros(n, 0)),
            None => {
                return Err(PhsError::Configuration(
                    "missing input matrix for a system with ports".into(),
                ))
            }
        };
        let mass_inverse = match &self.mass_matrix {
            Some(mass) => {
                if mass.nrows() != n || mass.ncols() != n {
                    return Err(PhsError::Configuration(format!(
                        "mass matrix must be {n}x{n}"
                    )));
                }
                if (mass - mass.transpose()).norm() > 1e-12 * (1.0 + mass.norm()) {
                    return Err(PhsError::Configuration(
                        "mass matrix must be symmetric".into(),
                    ));
                }
                let chol = Cholesky::new(mass.clone()).ok_or_else(|| {
                    PhsError::Configuration("mass matrix is not positive definite".into())
                })?;
                Some(chol.inverse())
            }
            None => None,
        };
        Ok(PortHamiltonianSystem {
            state_dim: n,
            port_dim: m,
            hamiltonian,
            gradient,
            structure,
            skew_part: self.skew_part,
            input_matrix,
            mass_matrix: self.mass_matrix,
            mass_inverse,
            averaged_gradient: self.averaged_gradient,
        })
    }
}

/// Feedback law closing the input port.
#[derive(Clone)]
pub enum ControlLaw {
    /// `u = 0`.
    Zero,
    /// Damping injection `u = -phi(y)` with `phi(0) = 0`, `y^T phi(y) > 0`.
    OutputFeedback(VectorFn),
    /// `u = u(x)`; integrators evaluate it at the step midpoint so that
    /// gradient-shaped laws line up with the discrete gradient.
    StateFeedback(VectorFn),
    /// `u = u(t)`.
    OpenLoop(TimeFn),
}

impl fmt::Debug for ControlLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            ControlLaw::Zero => "Zero",
            ControlLaw::OutputFeedback(_) => "OutputFeedback",
            ControlLaw::StateFeedback(_) => "StateFeedback",
            ControlLaw::OpenLoop(_) => "OpenLoop",
        };
        write!(f, "ControlLaw::{name}")
    }
}

impl ControlLaw {
    pub fn output_feedback<F>(phi: F) -> Self
    where
        F: Fn(&Vector) -> Vector + Send + Sync + 'static,
    {
        ControlLaw::OutputFeedback(Arc::new(phi))
    }

    pub fn state_feedback<F>(u: F) -> Self
    where
        F: Fn(&Vector) -> Vector + Send + Sync + 'static,
    {
        ControlLaw::StateFeedback(Arc::new(u))
    }

    pub fn open_loop<F>(u: F) -> Self
    where
        F: Fn(f64) -> Vector + Send + Sync + 'static,
    {
        ControlLaw::OpenLoop(Arc::new(u))
    }

    /// Input for a discrete stage: `t` the stage time, `x` the stage state
    /// and `y` the stage output.
    pub fn input(&self, t: f64, x: &Vector, y: &Vector) -> Vector {
        match self {
            ControlLaw::Zero => Vector::zeros(y.len()),
            ControlLaw::OutputFeedback(phi) => -phi(y),
            ControlLaw::StateFeedback(u) => u(x),
            ControlLaw::OpenLoop(u) => u(t),
        }
    }
}

/// Make a constant matrix closure (common case for `B` and `G`).
pub fn constant_matrix(m: Matrix) -> impl Fn(&Vector) -> Matrix + Send + Sync + 'static {
    move |_| m.clone()
}

/// Skew defect injection used by tests: add `eps * (E + E^T)/2` to a matrix map.
pub fn symmetric_perturbation(
    base: MatrixFn,
    perturbation: Matrix,
    eps: f64,
) -> impl Fn(&Vector) -> Matrix + Send + Sync + 'static {
    let sym = (&perturbation + perturbation.transpose()) * 0.5;
    move |x: &Vector| base(x) + &sym * eps
}

/// Convenience: `n x n` identity.
pub fn identity(n: usize) -> Matrix {
    Matrix::identity_generic(Dyn(n), Dyn(n))
}
