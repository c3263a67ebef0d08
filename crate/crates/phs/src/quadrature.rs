//! Quadrature rules on the unit interval and Lagrange polynomial helpers.
//!
//! Everything here works on `[0, 1]`, the parametrization used for chord
//! averages and collocation stage integrals.

use nalgebra::{DMatrix, DVector};

use crate::error::{PhsError, Result};

/// A quadrature rule on `[0, 1]`: nodes, matching weights and the polynomial
/// degree it integrates exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub exactness_degree: usize,
}

impl QuadratureRule {
    /// Gauss-Legendre rule with `n` nodes, mapped from `[-1, 1]` to `[0, 1]`.
    ///
    /// Nodes and weights come from the Golub-Welsch eigenvalue problem for
    /// the Legendre recurrence; the rule is exact for polynomials of degree
    /// `2n - 1`.
    pub fn gauss_legendre(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(PhsError::Configuration(
                "quadrature rule needs at least one node".into(),
            ));
        }
        if n == 1 {
            return Ok(Self {
                nodes: vec![0.5],
                weights: vec![1.0],
                exactness_degree: 1,
            });
        }
        // Symmetric tridiagonal Jacobi matrix for Legendre polynomials:
        // zero diagonal, off-diagonal beta_k = k / sqrt(4k^2 - 1).
        let mut jacobi = DMatrix::<f64>::zeros(n, n);
        for k in 1..n {
            let beta = k as f64 / ((4 * k * k - 1) as f64).sqrt();
            jacobi[(k - 1, k)] = beta;
            jacobi[(k, k - 1)] = beta;
        }
        let eig = jacobi.symmetric_eigen();
        let mut pairs: Vec<(f64, f64)> = (0..n)
            .map(|i| {
                let x = eig.eigenvalues[i];
                // Weight on [-1, 1] is 2 * (first eigenvector component)^2.
                let w = 2.0 * eig.eigenvectors[(0, i)] * eig.eigenvectors[(0, i)];
                // Map to [0, 1].
                ((x + 1.0) / 2.0, w / 2.0)
            })
            .collect();
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite nodes"));
        Ok(Self {
            nodes: pairs.iter().map(|p| p.0).collect(),
            weights: pairs.iter().map(|p| p.1).collect(),
            exactness_degree: 2 * n - 1,
        })
    }

    /// Simpson's rule; exact for cubics, handy as a closed-form average for
    /// Hamiltonians of polynomial degree up to four.
    pub fn simpson() -> Self {
        Self {
            nodes: vec![0.0, 0.5, 1.0],
            weights: vec![1.0 / 6.0, 4.0 / 6.0, 1.0 / 6.0],
            exactness_degree: 3,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Integrate a scalar function over `[0, 1]`.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    /// Integrate a vector-valued function over `[0, 1]`.
    pub fn integrate_vector<F>(&self, dim: usize, mut f: F) -> DVector<f64>
    where
        F: FnMut(f64) -> DVector<f64>,
    {
        let mut acc = DVector::zeros(dim);
        for (&x, &w) in self.nodes.iter().zip(&self.weights) {
            acc.axpy(w, &f(x), 1.0);
        }
        acc
    }
}

/// Lagrange basis polynomials on a set of distinct nodes, stored by their
/// monomial coefficients (low degree first).
///
/// Coefficients are obtained from a Vandermonde solve, which is well behaved
/// for the small stage counts used here (s <= 10 or so).
#[derive(Debug, Clone)]
pub struct LagrangeBasis {
    nodes: Vec<f64>,
    /// `coeffs[j]` holds the monomial coefficients of `l_j`.
    coeffs: Vec<Vec<f64>>,
}

impl LagrangeBasis {
    pub fn new(nodes: &[f64]) -> Result<Self> {
        let s = nodes.len();
        if s == 0 {
            return Err(PhsError::Configuration("empty node set".into()));
        }
        for i in 0..s {
            for j in (i + 1)..s {
                if (nodes[i] - nodes[j]).abs() < 1e-14 {
                    return Err(PhsError::Configuration(format!(
                        "collocation nodes must be distinct, got {} and {}",
                        nodes[i], nodes[j]
                    )));
                }
            }
        }
        // Vandermonde system V^T c_j = e_j with V[i][k] = nodes[i]^k.
        let vandermonde = DMatrix::from_fn(s, s, |i, k| nodes[i].powi(k as i32));
        let lu = vandermonde.lu();
        let mut coeffs = Vec::with_capacity(s);
        for j in 0..s {
            let mut rhs = DVector::zeros(s);
            rhs[j] = 1.0;
            let c = lu.solve(&rhs).ok_or_else(|| {
                PhsError::Configuration("degenerate node set for Lagrange basis".into())
            })?;
            coeffs.push(c.iter().copied().collect());
        }
        Ok(Self {
            nodes: nodes.to_vec(),
            coeffs,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Evaluate `l_j(x)`.
    pub fn eval(&self, j: usize, x: f64) -> f64 {
        horner(&self.coeffs[j], x)
    }

    /// Evaluate the antiderivative `int_0^x l_j(t) dt` exactly.
    pub fn integral(&self, j: usize, x: f64) -> f64 {
        let c = &self.coeffs[j];
        let mut acc = 0.0;
        for k in (0..c.len()).rev() {
            acc = acc * x + c[k] / (k as f64 + 1.0);
        }
        acc * x
    }
}

fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}
