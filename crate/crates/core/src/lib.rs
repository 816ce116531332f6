//! Distributed online convex optimization with time-varying constraints.
//!
//! The crate simulates a network of agents that each round pick a decision
//! from a shared convex set, suffer a private convex loss, and observe a
//! private block of a time-varying constraint. Agents exchange decisions
//! over a time-varying graph with doubly stochastic mixing weights and run
//! a primal-dual subgradient update, either with full gradient feedback or
//! with two-point bandit estimates. Performance is measured by network
//! regret against static/dynamic comparators and by cumulative constraint
//! violation, which does not let feasible rounds cancel violated ones.
//!
//! All numeric code is generic over the scalar type through [`Real`];
//! `f64` aliases for the main types live at the crate root.

pub mod algorithms;
pub mod error;
pub mod metrics;
pub mod network;
pub mod problem;
pub mod rng;
pub mod scalar;
pub mod schedule;

pub use error::{CoreError, Result};
pub use scalar::Real;

/// `f64` instantiations of the main types.
pub type DecisionSet64 = problem::DecisionSet<f64>;
pub type ProblemInstance64 = problem::ProblemInstance<f64>;
pub type MixingMatrix64 = network::MixingMatrix<f64>;
pub type GraphSequence64 = network::GraphSequence<f64>;
pub type StepSchedule64 = schedule::StepSchedule<f64>;
pub type AgentState64 = algorithms::AgentState<f64>;
pub type RunTrace64 = metrics::RunTrace<f64>;
pub type ComparatorSequence64 = metrics::ComparatorSequence<f64>;

/// `f32` instantiations for reduced-precision experiments.
pub type DecisionSet32 = problem::DecisionSet<f32>;
pub type ProblemInstance32 = problem::ProblemInstance<f32>;
pub type MixingMatrix32 = network::MixingMatrix<f32>;
pub type StepSchedule32 = schedule::StepSchedule<f32>;
pub type AgentState32 = algorithms::AgentState<f32>;
