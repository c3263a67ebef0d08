//! Per-step records and trajectories.
//!
//! Each record carries the state at the start of a step together with the
//! stage data of the outgoing step: weighted output/input pairs and the power
//! routed through the structure matrix. That is exactly the information the
//! energy-balance ledger needs.

use crate::system::{StateVector, Vector};

/// One weighted stage of a step.
#[derive(Debug, Clone)]
pub struct Stage {
    /// Positive weight; weights of a record sum to one.
    pub weight: f64,
    /// Stage output `y_j`.
    pub output: Vector,
    /// Stage input `u_j`.
    pub input: Vector,
    /// Power through the structure matrix at this stage,
    /// `g^T M^{-1} B g` with `g` the stage discrete gradient. Round-off
    /// noise for skew structures, the (non-positive) dissipation rate for
    /// systems with a symmetric part.
    pub structure_power: f64,
}

impl Stage {
    /// Total stage power `y^T u + structure power`.
    pub fn power(&self) -> f64 {
        self.output.dot(&self.input) + self.structure_power
    }
}

/// State plus outgoing-step stage data.
#[derive(Debug, Clone)]
pub struct StepRecord {
    pub index: usize,
    pub time: f64,
    pub state: StateVector,
    pub energy: f64,
    /// Stages of the step leaving this state; empty on the final record.
    pub stages: Vec<Stage>,
    /// `h * sum_j b_j (y_j^T u_j + structure_power_j)`.
    pub supply: f64,
    pub solver_iterations: usize,
}

impl StepRecord {
    /// Weight sanity for records that carry stages.
    pub fn weights_consistent(&self) -> bool {
        if self.stages.is_empty() {
            return true;
        }
        let sum: f64 = self.stages.iter().map(|s| s.weight).sum();
        self.stages.iter().all(|s| s.weight > 0.0) && (sum - 1.0).abs() <= 1e-14
    }

    /// Weighted average of the stage outputs (the step's effective output).
    pub fn mean_output(&self) -> Option<Vector> {
        let first = self.stages.first()?;
        let mut acc = Vector::zeros(first.output.len());
        for s in &self.stages {
            acc.axpy(s.weight, &s.output, 1.0);
        }
        Some(acc)
    }

    /// Weighted average of the stage inputs.
    pub fn mean_input(&self) -> Option<Vector> {
        let first = self.stages.first()?;
        let mut acc = Vector::zeros(first.input.len());
        for s in &self.stages {
            acc.axpy(s.weight, &s.input, 1.0);
        }
        Some(acc)
    }
}

/// An ordered run of records at fixed step size.
#[derive(Debug, Clone)]
pub struct Trajectory {
    /// Records `0..=N`; the final one has no outgoing stage data.
    pub records: Vec<StepRecord>,
    /// Time advanced per step (the effective step for compositions).
    pub step_size: f64,
    pub method_name: String,
}

impl Trajectory {
    pub fn new(step_size: f64, method_name: impl Into<String>) -> Self {
        Self {
            records: Vec::new(),
            step_size,
            method_name: method_name.into(),
        }
    }

    /// Number of completed steps.
    pub fn steps(&self) -> usize {
        self.records.len().saturating_sub(1)
    }

    pub fn initial_energy(&self) -> Option<f64> {
        self.records.first().map(|r| r.energy)
    }

    pub fn final_state(&self) -> Option<&StateVector> {
        self.records.last().map(|r| &r.state)
    }

    /// Energy series `H(x_n)`.
    pub fn energies(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.energy).collect()
    }

    /// Times `t_n`.
    pub fn times(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.time).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(weights: &[f64]) -> StepRecord {
        StepRecord {
            index: 0,
            time: 0.0,
            state: StateVector::from_slice(&[0.0]).unwrap(),
            energy: 0.0,
            stages: weights
                .iter()
                .map(|&w| Stage {
                    weight: w,
                    output: Vector::from_row_slice(&[1.0]),
                    input: Vector::from_row_slice(&[2.0]),
                    structure_power: 0.0,
                })
                .collect(),
            supply: 0.0,
            solver_iterations: 0,
        }
    }

    #[test]
    fn weights_must_be_positive_and_sum_to_one() {
        assert!(record(&[1.0]).weights_consistent());
        assert!(record(&[0.5, 0.5]).weights_consistent());
        assert!(!record(&[0.6, 0.5]).weights_consistent());
        assert!(!record(&[-0.5, 1.5]).weights_consistent());
        assert!(record(&[]).weights_consistent());
    }

    #[test]
    fn mean_output_weights_stages() {
        let mut r = record(&[0.25, 0.75]);
        r.stages[0].output[0] = 4.0;
        r.stages[1].output[0] = 0.0;
        assert_eq!(r.mean_output().unwrap()[0], 1.0);
    }
}
