//! Pareto frontiers of simultaneous loss guarantees in discounted repeated
//! games with vector losses.
//!
//! The crate computes approximations of the optimal frontier by iterating a
//! set-valued Bellman operator over polytope frontiers, extracts finite-mode
//! randomized automata that attain points on it, and benchmarks those
//! automata against classic experts algorithms.
//!
//! Module map:
//!
//! - [`lp`]: dense-basis revised simplex returning basic optimal solutions.
//! - [`geometry`]: loss vectors, direction grids, frontiers and the `e`/`d` metrics.
//! - [`game`]: vector games, normalization, regret transformation, readouts.
//! - [`solver`]: the one-step operator and value iteration with error bounds.
//! - [`strategy`]: mode-strategy extraction, policy evaluation and execution.
//! - [`baselines`]: Hedge, GPS, adversaries and the Monte-Carlo harness.

pub mod baselines;
pub mod error;
pub mod game;
pub mod geometry;
pub mod lp;
pub mod solver;
pub mod strategy;

pub use error::{Error, Result};

/// Crate version, embedded in serialized artifacts.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
