//! Palindromic splitting of a system into a conservative part and a part
//! carrying the control.
//!
//! Given flow maps for the two parts, one step applies
//!
//! ```text
//!   F2(a1 h) F1(b1 h) F2(a2 h) ... F2(a_{m+1} h) ... F1(b1 h) F2(a1 h)
//! ```
//!
//! with all coefficients non-negative and the consistency normalization
//! `2 sum a_i + a_{m+1} = 2 sum b_i = 1`. One step is accounted as
//! advancing `2h` of simulated time. Non-negative coefficients mean every
//! sub-flow inherits its part's energy behaviour, so the composed step never
//! increases the storage function when the second part only dissipates.

use std::fmt;
use std::sync::Arc;

use crate::error::{PhsError, Result};
use crate::system::Vector;

type FlowFn = Arc<dyn Fn(f64, &Vector) -> Vector + Send + Sync>;

/// The two sub-flows and the composition coefficients.
#[derive(Clone)]
pub struct SplittingSpec {
    flow1: FlowFn,
    flow2: FlowFn,
    /// `a_1 .. a_{m+1}` applied to the second (control) part.
    outer: Vec<f64>,
    /// `b_1 .. b_m` applied to the first (conservative) part.
    inner: Vec<f64>,
}

impl fmt::Debug for SplittingSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SplittingSpec")
            .field("outer", &self.outer)
            .field("inner", &self.inner)
            .finish()
    }
}

const CONSISTENCY_TOL: f64 = 1e-14;

impl SplittingSpec {
    /// Build a spec, validating signs and the consistency normalization.
    pub fn new<F1, F2>(flow1: F1, flow2: F2, outer: Vec<f64>, inner: Vec<f64>) -> Result<Self>
    where
        F1: Fn(f64, &Vector) -> Vector + Send + Sync + 'static,
        F2: Fn(f64, &Vector) -> Vector + Send + Sync + 'static,
    {
        if outer.len() != inner.len() + 1 {
            return Err(PhsError::Configuration(format!(
                "need one more outer coefficient than inner ({} vs {})",
                outer.len(),
                inner.len()
            )));
        }
        if outer.iter().chain(inner.iter()).any(|&c| c < 0.0) {
            return Err(PhsError::Configuration(
                "splitting coefficients must be non-negative".into(),
            ));
        }
        let m = inner.len();
        let outer_sum = 2.0 * outer[..m].iter().sum::<f64>() + outer[m];
        let inner_sum = 2.0 * inner.iter().sum::<f64>();
        if (outer_sum - 1.0).abs() > CONSISTENCY_TOL || (inner_sum - 1.0).abs() > CONSISTENCY_TOL {
            return Err(PhsError::Configuration(format!(
                "inconsistent splitting coefficients: outer sum {outer_sum}, inner sum {inner_sum}"
            )));
        }
        Ok(Self {
            flow1: Arc::new(flow1),
            flow2: Arc::new(flow2),
            outer,
            inner,
        })
    }

    /// Shortest palindromic composition: `F2(h/2) F1(h) F2(h/2)` after
    /// collapsing the zero-length center stage.
    pub fn strang<F1, F2>(flow1: F1, flow2: F2) -> Result<Self>
    where
        F1: Fn(f64, &Vector) -> Vector + Send + Sync + 'static,
        F2: Fn(f64, &Vector) -> Vector + Send + Sync + 'static,
    {
        Self::new(flow1, flow2, vec![0.5, 0.0], vec![0.5])
    }

    pub fn outer(&self) -> &[f64] {
        &self.outer
    }

    pub fn inner(&self) -> &[f64] {
        &self.inner
    }
}

/// Apply the palindromic composition once. Zero-length sub-flows are skipped.
pub fn step_splitting(spec: &SplittingSpec, x: &Vector, h: f64) -> Result<Vector> {
    if !(h > 0.0) {
        return Err(PhsError::Configuration("step size must be positive".into()));
    }
    let m = spec.inner.len();
    let mut z = x.clone();
    let apply = |flow: &FlowFn, coeff: f64, z: Vector| -> Vector {
        if coeff == 0.0 {
            z
        } else {
            flow(coeff * h, &z)
        }
    };
    for i in 0..m {
        z = apply(&spec.flow2, spec.outer[i], z);
        z = apply(&spec.flow1, spec.inner[i], z);
    }
    z = apply(&spec.flow2, spec.outer[m], z);
    for i in (0..m).rev() {
        z = apply(&spec.flow1, spec.inner[i], z);
        z = apply(&spec.flow2, spec.outer[i], z);
    }
    Ok(z)
}
