//! Simulation of input-state-output port-Hamiltonian systems
//! `M x' = B(x) grad H(x) + G(x) u`, `y = G(x)^T grad H(x)`, with
//! integrators that carry the continuous energy balance over to the
//! discrete trajectory.
//!
//! The crate provides
//!
//! - the system model and feedback laws ([`system`]),
//! - discrete gradients with their two defining properties ([`disgrad`]),
//! - discrete-gradient, collocation, splitting and classical reference
//!   steppers ([`integrators`], [`collocation`], [`splitting`]),
//! - power-conserving interconnection of two systems ([`interconnect`]),
//! - a machine-checkable energy ledger, order estimation and the
//!   Runge-Kutta balance counterexample ([`audit`]),
//! - the bundled benchmark systems ([`systems`]).

pub mod audit;
pub mod collocation;
pub mod disgrad;
pub mod error;
pub mod integrators;
pub mod interconnect;
pub mod quadrature;
pub mod solver;
pub mod splitting;
pub mod system;
pub mod systems;
pub mod trajectory;

pub use collocation::CollocationTableau;
pub use disgrad::DiscreteGradientScheme;
pub use error::{PhsError, Result};
pub use integrators::{integrate, Method, ReferenceMethod};
pub use solver::{SolverKind, StepperConfig};
pub use splitting::SplittingSpec;
pub use system::{ControlLaw, Matrix, PortHamiltonianSystem, StateVector, Vector};
pub use trajectory::{Stage, StepRecord, Trajectory};
