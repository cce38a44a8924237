//! Objectives for the outer loop and generators for standalone subproblems.

mod cases;
mod logistic;
mod quadratic;
mod rosenbrock;

pub use cases::{make_subproblem_case, make_subproblem_case_with_sigma, CaseError, CaseKind, SubproblemCase};
pub use logistic::LogisticSynth;
pub use quadratic::Quadratic;
pub use rosenbrock::Rosenbrock;

/// An objective `f(x) = mean over a batch of fᵢ(x)`, or a single
/// deterministic function when [`Problem::n_samples`] is 1.
pub trait Problem: Send + Sync {
    fn name(&self) -> &'static str;

    fn dim(&self) -> usize;

    /// Dataset size `N`; 1 for deterministic problems.
    fn n_samples(&self) -> usize {
        1
    }

    /// Value and gradient on the given sample indices. Deterministic
    /// problems ignore `batch`.
    fn eval(&self, x: &[f64], batch: &[usize]) -> (f64, Vec<f64>);

    fn eval_full(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let all: Vec<usize> = (0..self.n_samples()).collect();
        self.eval(x, &all)
    }

    fn initial_point(&self) -> Vec<f64>;
}

/// Central finite-difference gradient of the batch objective.
pub fn fd_gradient(problem: &dyn Problem, x: &[f64], batch: &[usize], h: f64) -> Vec<f64> {
    let mut xp = x.to_vec();
    (0..x.len())
        .map(|i| {
            let xi = x[i];
            let step = h * xi.abs().max(1.0);
            xp[i] = xi + step;
            let fp = problem.eval(&xp, batch).0;
            xp[i] = xi - step;
            let fm = problem.eval(&xp, batch).0;
            xp[i] = xi;
            (fp - fm) / (2.0 * step)
        })
        .collect()
}
