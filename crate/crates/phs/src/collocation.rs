//! Averaged-gradient collocation.
//!
//! The step builds a degree-`s` polynomial through `x_n` whose derivative at
//! the nodes `c_j` follows the structure applied to stage gradients
//!
//! ```text
//!   gbar_j = (1/b_j) int_0^1 l_j(a) grad H(X_a) da,
//! ```
//!
//! with `l_j` the Lagrange basis and `b_j = int_0^1 l_j`. Positive weights
//! keep the stagewise energy accounting sound; the stage integrals use
//! Gauss quadrature with `s + 8` nodes, exact whenever `grad H` along the
//! polynomial path is a polynomial of degree `2(s + 8) - 1` or less.

use crate::error::{PhsError, Result};
use crate::quadrature::{LagrangeBasis, QuadratureRule};
use crate::solver::{solve_implicit, StepperConfig};
use crate::system::{ControlLaw, PortHamiltonianSystem, StateVector, Vector};
use crate::trajectory::StepRecord;

/// Nodes, weights and precomputed basis integrals for a collocation step.
#[derive(Debug, Clone)]
pub struct CollocationTableau {
    nodes: Vec<f64>,
    /// `b_j = int_0^1 l_j(a) da`, all positive, summing to one.
    weights: Vec<f64>,
    /// `lw[j][k] = w_k l_j(a_k) / b_j` (stage-gradient accumulation).
    stage_kernels: Vec<Vec<f64>>,
    /// `quad_integrals[k][j] = int_0^{a_k} l_j`, path states at quad nodes.
    quad_integrals: Vec<Vec<f64>>,
    /// `node_integrals[i][j] = int_0^{c_i} l_j`, stage states.
    node_integrals: Vec<Vec<f64>>,
}

impl CollocationTableau {
    /// Build a tableau from distinct nodes in `(0, 1)`.
    pub fn new(nodes: &[f64]) -> Result<Self> {
        if nodes.is_empty() {
            return Err(PhsError::Configuration(
                "collocation needs at least one stage".into(),
            ));
        }
        if nodes.iter().any(|&c| !(0.0..=1.0).contains(&c)) {
            return Err(PhsError::Configuration(
                "collocation nodes must lie in [0, 1]".into(),
            ));
        }
        let s = nodes.len();
        let basis = LagrangeBasis::new(nodes)?;
        let weights: Vec<f64> = (0..s).map(|j| basis.integral(j, 1.0)).collect();
        for (j, &b) in weights.iter().enumerate() {
            if b <= 0.0 {
                return Err(PhsError::Configuration(format!(
                    "collocation weight b_{} = {b:.6e} is not positive",
                    j + 1
                )));
            }
        }
        let weight_sum: f64 = weights.iter().sum();
        if (weight_sum - 1.0).abs() > 1e-12 {
            return Err(PhsError::Configuration(format!(
                "collocation weights sum to {weight_sum}, expected 1"
            )));
        }
        let quad = QuadratureRule::gauss_legendre(s + 8)?;
        let stage_kernels = (0..s)
            .map(|j| {
                quad.nodes
                    .iter()
                    .zip(&quad.weights)
                    .map(|(&a, &w)| w * basis.eval(j, a) / weights[j])
                    .collect()
            })
            .collect();
        let quad_integrals = quad
            .nodes
            .iter()
            .map(|&a| (0..s).map(|j| basis.integral(j, a)).collect())
            .collect();
        let node_integrals = nodes
            .iter()
            .map(|&c| (0..s).map(|j| basis.integral(j, c)).collect())
            .collect();
        Ok(Self {
            nodes: nodes.to_vec(),
            weights,
            stage_kernels,
            quad_integrals,
            node_integrals,
        })
    }

    /// Gauss-Legendre nodes; the classical order-`2s` choice.
    pub fn gauss(stages: usize) -> Result<Self> {
        let rule = QuadratureRule::gauss_legendre(stages)?;
        Self::new(&rule.nodes)
    }

    pub fn stages(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// One collocation step; the record carries all `s` weighted stages.
pub fn step_collocation(
    sys: &PortHamiltonianSystem,
    tableau: &CollocationTableau,
    law: &ControlLaw,
    t: f64,
    x: &Vector,
    cfg: &StepperConfig,
) -> Result<(Vector, StepRecord)> {
    cfg.validate()?;
    let h = cfg.step_size;
    let n = sys.state_dim();
    let s = tableau.stages();

    // Unknowns: the stage derivatives K_j, stacked.
    let k0 = crate::integrators::closed_loop_field(sys, law, t, x);
    let mut guess = Vector::zeros(n * s);
    for j in 0..s {
        guess.rows_mut(j * n, n).copy_from(&k0);
    }

    let eval_stages = |flat: &Vector| -> StageEvaluation {
        let k: Vec<Vector> = (0..s).map(|j| flat.rows(j * n, n).into_owned()).collect();
        // Gradients along the polynomial path at the quadrature nodes.
        let path_grads: Vec<Vector> = tableau
            .quad_integrals
            .iter()
            .map(|coeffs| {
                let mut state = x.clone();
                for (j, kj) in k.iter().enumerate() {
                    state.axpy(h * coeffs[j], kj, 1.0);
                }
                sys.gradient(&state)
            })
            .collect();
        let stage_grads: Vec<Vector> = (0..s)
            .map(|j| {
                let mut g = Vector::zeros(n);
                for (kernel, grad) in tableau.stage_kernels[j].iter().zip(&path_grads) {
                    g.axpy(*kernel, grad, 1.0);
                }
                g
            })
            .collect();
        let stage_states: Vec<Vector> = (0..s)
            .map(|i| {
                let mut state = x.clone();
                for (j, kj) in k.iter().enumerate() {
                    state.axpy(h * tableau.node_integrals[i][j], kj, 1.0);
                }
                state
            })
            .collect();
        StageEvaluation {
            derivatives: k,
            stage_grads,
            stage_states,
        }
    };

    let residual = |flat: &Vector| -> Vector {
        let eval = eval_stages(flat);
        let mut res = Vector::zeros(n * s);
        for j in 0..s {
            let state = &eval.stage_states[j];
            let grad = &eval.stage_grads[j];
            let y = sys.conjugate_output(state, grad);
            let u = law.input(t + tableau.nodes[j] * h, state, &y);
            let mut rhs = sys.structure(state) * grad;
            if sys.port_dim() > 0 {
                rhs += sys.input_matrix(state) * u;
            }
            let k_new = sys.apply_mass_inverse(&rhs);
            res.rows_mut(j * n, n)
                .copy_from(&(&eval.derivatives[j] - k_new));
        }
        res
    };

    let outcome = solve_implicit(residual, &guess, cfg)?;
    let eval = eval_stages(&outcome.solution);

    let mut z = x.clone();
    for (j, kj) in eval.derivatives.iter().enumerate() {
        z.axpy(h * tableau.weights[j], kj, 1.0);
    }

    let stages: Vec<_> = (0..s)
        .map(|j| {
            crate::integrators::make_stage(
                sys,
                law,
                t + tableau.nodes[j] * h,
                &eval.stage_states[j],
                &eval.stage_grads[j],
                tableau.weights[j],
            )
        })
        .collect();
    let supply = h * stages.iter().map(|st| st.weight * st.power()).sum::<f64>();
    let record = StepRecord {
        index: 0,
        time: t,
        state: StateVector::new(x.clone())?,
        energy: sys.hamiltonian(x),
        supply,
        stages,
        solver_iterations: outcome.iterations,
    };
    Ok((z, record))
}

struct StageEvaluation {
    derivatives: Vec<Vector>,
    stage_grads: Vec<Vector>,
    stage_states: Vec<Vector>,
}
