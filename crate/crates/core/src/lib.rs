//! Solvers for multi-term Riemann-Liouville stochastic fractional
//! differential equations driven by a scalar Brownian motion.
//!
//! Two explicit time steppers share one interface: the direct modified
//! Euler-Maruyama scheme, which evaluates the full singular history sum at
//! every step (`O(N^2)` work), and the fast variant, which replaces the
//! history kernel by a sum of exponentials and carries it in per-term
//! accumulators (`O(N * N_exp)` work). The [`harness`] module measures
//! strong convergence orders on coupled Brownian paths and compares the
//! wall-clock cost of the two schemes.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

pub mod brownian;
pub mod catalog;
pub mod cli;
pub mod error;
pub mod harness;
pub mod model;
pub mod quadrature;
pub mod report;
pub mod soe;
pub mod solver;
pub mod special;

pub use brownian::{coarsen, path_seed, sample_path, BrownianPath};
pub use error::{Error, Result};
pub use model::{
    left_node, make_grid, validate_orders, FractionalOrders, ProblemSpec, TimeGrid, Trajectory,
    VectorField,
};
pub use soe::{build_soe, eval_soe, validate_soe, SoeApproximation, SoeTerm};

pub use solver::{
    solve_direct, solve_fast, update_history, HistoryState, Method, PreparedSolver, SolverConfig,
};
