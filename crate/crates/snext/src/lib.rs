//! Distributed stochastic nonconvex optimization over simulated multi-agent
//! networks, built around successive convex approximation (SCA) with gradient
//! tracking and recursive gradient averaging.
//!
//! The crate provides:
//!
//! - [`graph`]: random strongly connected topologies and doubly stochastic
//!   Metropolis mixing matrices.
//! - [`problem`]: the composite problem abstraction (local smooth objectives,
//!   convex regularizer, feasible set, seeded minibatch sampling) plus the
//!   quadratic and neural-network regression instances.
//! - [`nn`]: a small tanh multilayer perceptron with a flattened weight
//!   vector and per-sample weight Jacobians via backpropagation.
//! - [`sca`]: strongly convex subproblem solvers — a generic projected
//!   proximal-gradient solver and the closed-form solver for the linearized
//!   least-squares plus ridge case.
//! - [`algorithm`]: the distributed outer loop (per-agent state, the four
//!   steps of each synchronous round, diminishing step-size schedules).
//! - [`baselines`]: distributed SGD, centralized SGD and centralized
//!   stochastic SCA under the same harness contract.
//! - [`harness`]: config parsing, CSV dataset ingestion, experiment dispatch
//!   and metrics persistence.
//!
//! See the `examples/` directory for one runnable example per capability,
//! and the `snext` binary for the file-driven experiment runner.

pub mod algorithm;
pub mod baselines;
pub mod error;
pub mod graph;
pub mod harness;
pub mod io;
pub mod metrics;
pub mod nn;
pub mod problem;
pub mod sca;
pub mod schedule;

pub use error::{Error, Result};
