//! Exact global minimization of the cubic model
//! `m(s) = f + sᵀg + ½sᵀBs + (σ/3)‖s‖³` for compact SR1 matrices.
//!
//! The Newton iteration on the secular function runs entirely on the
//! implicit spectrum (`O(k)` per step); the full-space step is recovered
//! once at the end in `O(mn)`. [`SolveMode::NaiveLqn`] runs the same
//! iteration but forms `s` and `w` in `ℝⁿ` at every step.

mod solve;
mod spectrum;

use std::fmt;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::SolveError;
use crate::lqn::LqnState;

pub use solve::{
    cauchy_multiplier, cauchy_point, hard_case_alpha, leftmost_eigvec, newton_secular, recover_step, solve_lambda,
    solve_subproblem, solve_with_spectrum,
};
pub use spectrum::{newton_correction, ImplicitSpectrum};

/// Relative tolerance on `|u₁ᵀg| / ‖g‖` below which the hard case is declared.
pub const EPS_HARD: f64 = 1e-10;
pub const DEFAULT_EPS_SHIFT: f64 = 1e-4;
pub const NU_TRAINING: f64 = 1e-5;
pub const NU_VERIFY: f64 = 1e-7;
pub const MAX_NEWTON: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Newton stops once `|‖s‖ − λ/σ| < ν·max(1, λ/σ)`.
    pub nu: f64,
    pub eps_shift: f64,
    pub eps_hard: f64,
    pub max_newton: usize,
    #[serde(skip)]
    pub deadline: Option<Instant>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            nu: NU_TRAINING,
            eps_shift: DEFAULT_EPS_SHIFT,
            eps_hard: EPS_HARD,
            max_newton: MAX_NEWTON,
            deadline: None,
        }
    }
}

impl SolverOptions {
    pub fn verification() -> Self {
        Self {
            nu: NU_VERIFY,
            ..Self::default()
        }
    }

    pub fn with_deadline(mut self, deadline: Instant) -> Self {
        self.deadline = Some(deadline);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMode {
    NormTrick,
    NaiveLqn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolutionCase {
    /// `λ*` is the root of the secular equation.
    Interior,
    /// `λ* = −λ₁` with the minimum-norm step already on the sphere.
    BoundarySaddle,
    /// `λ* = −λ₁`, step completed along the leftmost eigenvector.
    HardCase,
}

impl fmt::Display for SolutionCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolutionCase::Interior => "interior",
            SolutionCase::BoundarySaddle => "boundary",
            SolutionCase::HardCase => "hard",
        })
    }
}

#[derive(Debug, Clone)]
pub struct SubproblemSolution {
    pub s_star: Vec<f64>,
    pub lambda_star: f64,
    pub case: SolutionCase,
    pub newton_iters: usize,
    /// `f0 − m(s*)`
    pub model_decrease: f64,
    /// Leftmost eigenvalue of `B`.
    pub lambda1: f64,
}

/// A method for minimizing the cubic model, selectable by name.
pub trait SubproblemSolver: Send + Sync {
    fn name(&self) -> &'static str;

    fn solve(
        &self,
        state: &LqnState,
        g: &[f64],
        sigma: f64,
        opts: &SolverOptions,
    ) -> Result<SubproblemSolution, SolveError>;
}

/// Newton on the implicit spectrum; `O(m)` per iteration.
#[derive(Debug, Default, Clone, Copy)]
pub struct NormTrickSolver;

impl SubproblemSolver for NormTrickSolver {
    fn name(&self) -> &'static str {
        "normtrick"
    }

    fn solve(
        &self,
        state: &LqnState,
        g: &[f64],
        sigma: f64,
        opts: &SolverOptions,
    ) -> Result<SubproblemSolution, SolveError> {
        solve_subproblem(state, g, sigma, opts, SolveMode::NormTrick)
    }
}

/// Same iteration, with `s` and `w` materialized by shifted compact solves.
#[derive(Debug, Default, Clone, Copy)]
pub struct NaiveLqnSolver;

impl SubproblemSolver for NaiveLqnSolver {
    fn name(&self) -> &'static str {
        "naive"
    }

    fn solve(
        &self,
        state: &LqnState,
        g: &[f64],
        sigma: f64,
        opts: &SolverOptions,
    ) -> Result<SubproblemSolution, SolveError> {
        solve_subproblem(state, g, sigma, opts, SolveMode::NaiveLqn)
    }
}
