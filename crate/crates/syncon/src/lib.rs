//! Synthetic control weight estimation under a linear factor model.
//!
//! The crate has three layers:
//!
//! - deterministic least-squares kernels ([`solver`]): quadratic programming
//!   on the unit simplex (Frank-Wolfe with away steps), equality-constrained
//!   least squares, and plain OLS;
//! - estimator front-ends ([`estimators`]) mapping an observed panel to
//!   weights, pre-treatment fit statistics, and treatment-effect estimates,
//!   plus ground-truth diagnostics ([`diagnostics`]) for simulated panels;
//! - a panel simulator ([`dgp`]) and Monte Carlo harness ([`montecarlo`])
//!   that reproduce the reference simulation tables, with file formats and a
//!   command-line surface in [`io`].
//!
//! Everything is deterministic given seeds: simulation draws come from
//! counter-based ChaCha streams keyed per replication, solvers use fixed
//! initializations, and Monte Carlo aggregation reduces in replication order
//! regardless of thread count.

pub mod diagnostics;
pub mod dgp;
pub mod error;
pub mod estimators;
pub mod io;
pub mod montecarlo;
mod opt;
pub mod solver;

pub use error::{Error, Result};
