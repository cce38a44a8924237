//! Exact cubic-regularization steps for limited-memory SR1 matrices and the
//! adaptive-regularization (ARC) outer loop built on them.
//!
//! Start with [`lqn::LqnState`] for the quasi-Newton memory,
//! [`subproblem::solve_subproblem`] for a single step, and
//! [`arc::run`] for a whole optimization run.

// `!(x > 0.0)` style guards are intentional: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod arc;
pub mod bench;
pub mod dense;
pub mod error;
pub mod linalg;
pub mod lqn;
pub mod problems;
pub mod registry;
pub mod small_eig;
pub mod subproblem;
pub mod verify;

pub use error::{ArcError, EigError, LqnError, SolveError};
pub use lqn::{GammaPolicy, LqnState, UpdateOutcome, UpdateReason};
pub use subproblem::{ImplicitSpectrum, SolutionCase, SolveMode, SolverOptions, SubproblemSolution, SubproblemSolver};
