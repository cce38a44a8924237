use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::ArcConfig;
use super::fallback::{build_fallback, FallbackStep};
use super::trace::{Branch, FullEval, StepReport, Trace};
use crate::error::ArcError;
use crate::linalg::{all_finite, norm, norm_inf};
use crate::lqn::LqnState;
use crate::problems::Problem;
use crate::registry;
use crate::subproblem::{SolverOptions, SubproblemSolver};

/// `ρ = (f0 − f1) / (f0 − m*)`.
pub fn rho(f0: f64, f1: f64, m_star: f64) -> Result<f64, ArcError> {
    let predicted = f0 - m_star;
    if !(predicted > 1e-15 * (1.0 + f0.abs())) {
        return Err(ArcError::DegenerateModel(predicted));
    }
    Ok((f0 - f1) / predicted)
}

pub fn sigma_update(sigma: f64, rho: f64, cfg: &ArcConfig) -> f64 {
    if rho >= cfg.eta2 {
        (sigma / cfg.sigma_shrink).max(cfg.sigma_floor)
    } else if rho >= cfg.eta1 {
        sigma
    } else {
        (sigma * cfg.sigma_grow).min(cfg.sigma_cap)
    }
}

/// One ARC optimizer: quasi-Newton memory, `σ`, solver and fallback.
pub struct ArcOptimizer {
    cfg: ArcConfig,
    opts: SolverOptions,
    solver: Box<dyn SubproblemSolver>,
    fallback: Box<dyn FallbackStep>,
    state: LqnState,
    sigma: f64,
}

impl ArcOptimizer {
    pub fn new(cfg: ArcConfig, dim: usize) -> Result<Self, ArcError> {
        cfg.validate()?;
        let solver = registry::solvers().create(&cfg.solver, &())?;
        let fallback = build_fallback(&cfg.fallback, cfg.alpha2, dim);
        let state = LqnState::new(dim, cfg.memory, cfg.gamma).with_gamma_policy(cfg.gamma_policy);
        Ok(Self {
            opts: cfg.solver_options(),
            sigma: cfg.sigma0,
            solver,
            fallback,
            state,
            cfg,
        })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn state(&self) -> &LqnState {
        &self.state
    }

    pub fn config(&self) -> &ArcConfig {
        &self.cfg
    }

    /// One iteration on `batch`; `x` is updated in place.
    pub fn step(
        &mut self,
        x: &mut [f64],
        problem: &dyn Problem,
        batch: &[usize],
        iter: usize,
    ) -> Result<StepReport, ArcError> {
        let start = Instant::now();
        let (f0, g) = problem.eval(x, batch);
        if !f0.is_finite() || !all_finite(&g) {
            return Err(ArcError::NonFinite { iter });
        }
        let grad_norm = norm(&g);

        let mut report = StepReport {
            iter,
            branch: Branch::Failed,
            rho: None,
            sigma_after: self.sigma,
            f_before: f0,
            f_after: f0,
            f_full: None,
            grad_norm,
            newton_iters: 0,
            case: None,
            wall_time_ns: 0,
        };

        if let Ok(sol) = self.solver.solve(&self.state, &g, self.sigma, &self.opts) {
            report.newton_iters = sol.newton_iters;
            report.case = Some(sol.case);
            let mut s = sol.s_star;
            crate::linalg::scale(self.cfg.alpha1, &mut s);
            let trial: Vec<f64> = x.iter().zip(&s).map(|(a, b)| a + b).collect();
            let (f1, g1) = problem.eval(&trial, batch);
            if let Ok(r) = rho(f0, f1, f0 - sol.model_decrease) {
                report.rho = Some(r);
                report.branch = Branch::Fallback;
                if r >= self.cfg.eta1 && f0 - f1 > self.cfg.mu && all_finite(&g1) {
                    x.copy_from_slice(&trial);
                    let y: Vec<f64> = g1.iter().zip(&g).map(|(a, b)| a - b).collect();
                    self.state.try_update(&s, &y, self.cfg.eps_curv, self.cfg.kappa);
                    self.sigma = sigma_update(self.sigma, r, &self.cfg);
                    report.branch = Branch::Accepted;
                    report.f_after = f1;
                }
            }
        }

        if report.branch != Branch::Accepted {
            self.sigma = (self.sigma * self.cfg.sigma_grow).min(self.cfg.sigma_cap);
            let d = self.fallback.displacement(&g);
            for (xi, di) in x.iter_mut().zip(&d) {
                *xi += di;
            }
            let (f1, g1) = problem.eval(x, batch);
            if !f1.is_finite() || !all_finite(&g1) {
                return Err(ArcError::NonFinite { iter });
            }
            let y: Vec<f64> = g1.iter().zip(&g).map(|(a, b)| a - b).collect();
            self.state.try_update(&d, &y, self.cfg.eps_curv, self.cfg.kappa);
            report.f_after = f1;
        }

        report.sigma_after = self.sigma;
        report.wall_time_ns = start.elapsed().as_nanos() as u64;
        Ok(report)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Budget {
    pub max_iters: usize,
    pub max_seconds: Option<f64>,
    /// Stop once the full gradient's infinity norm is at or below this.
    pub gtol_inf: Option<f64>,
    /// Minibatch size; `None` means full batch.
    pub batch_size: Option<usize>,
}

impl Budget {
    pub fn iterations(max_iters: usize) -> Self {
        Self {
            max_iters,
            max_seconds: None,
            gtol_inf: None,
            batch_size: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MaxIters,
    MaxSeconds,
    GradientTolerance,
    NonFinite,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub x: Vec<f64>,
    pub trace: Trace,
    pub stop: StopReason,
    pub error: Option<ArcError>,
    pub wall_time: Duration,
}

/// Reshuffles the sample indices every epoch with a seeded ChaCha8 stream.
#[derive(Debug, Clone)]
pub struct MinibatchSampler {
    order: Vec<usize>,
    batch: usize,
    pos: usize,
    rng: ChaCha8Rng,
}

impl MinibatchSampler {
    pub fn new(n_samples: usize, batch: usize, seed: u64) -> Self {
        let n = n_samples.max(1);
        Self {
            order: (0..n).collect(),
            batch: batch.clamp(1, n),
            pos: n,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn is_full_batch(&self) -> bool {
        self.batch == self.order.len()
    }

    pub fn iters_per_epoch(&self) -> usize {
        self.order.len().div_ceil(self.batch)
    }

    pub fn next_batch(&mut self) -> Vec<usize> {
        if self.is_full_batch() {
            return self.order.clone();
        }
        if self.pos >= self.order.len() {
            self.order.shuffle(&mut self.rng);
            self.pos = 0;
        }
        let end = (self.pos + self.batch).min(self.order.len());
        let b = self.order[self.pos..end].to_vec();
        self.pos = end;
        b
    }
}

fn full_eval(problem: &dyn Problem, x: &[f64], iter: usize) -> FullEval {
    let (f, g) = problem.eval_full(x);
    FullEval {
        iter,
        f,
        grad_norm: norm(&g),
        grad_norm_inf: norm_inf(&g),
    }
}

/// Runs ARC from `x0` until the budget is exhausted or the gradient
/// tolerance is met. Deterministic for a fixed seed (apart from timing).
pub fn run(
    x0: &[f64],
    cfg: &ArcConfig,
    problem: &dyn Problem,
    budget: &Budget,
    seed: u64,
) -> Result<RunOutcome, ArcError> {
    let mut opt = ArcOptimizer::new(cfg.clone(), problem.dim())?;
    let started = Instant::now();
    let mut sampler = MinibatchSampler::new(
        problem.n_samples(),
        budget.batch_size.unwrap_or(problem.n_samples()),
        seed,
    );
    let full_batch = sampler.is_full_batch();
    let mut x = x0.to_vec();
    let mut trace = Trace::default();
    let mut stop = StopReason::MaxIters;
    let mut error = None;

    for iter in 0..budget.max_iters {
        if let Some(limit) = budget.max_seconds {
            if started.elapsed().as_secs_f64() > limit {
                stop = StopReason::MaxSeconds;
                break;
            }
        }
        if full_batch {
            if let Some(tol) = budget.gtol_inf {
                let (_, g) = problem.eval_full(&x);
                if norm_inf(&g) <= tol {
                    stop = StopReason::GradientTolerance;
                    break;
                }
            }
        }
        let batch = sampler.next_batch();
        let mut report = match opt.step(&mut x, problem, &batch, iter) {
            Ok(r) => r,
            Err(e) => {
                stop = StopReason::NonFinite;
                error = Some(e);
                break;
            }
        };
        let period = cfg.full_eval_every;
        if period > 0 && (iter + 1) % period == 0 {
            let fe = full_eval(problem, &x, iter);
            report.f_full = Some(fe.f);
            trace.full_evals.push(fe);
            trace.steps.push(report);
            if !full_batch && budget.gtol_inf.is_some_and(|tol| fe.grad_norm_inf <= tol) {
                stop = StopReason::GradientTolerance;
                break;
            }
        } else {
            trace.steps.push(report);
        }
    }

    Ok(RunOutcome {
        x,
        trace,
        stop,
        error,
        wall_time: started.elapsed(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arc::config::FallbackConfig;
    use crate::problems::{Quadratic, Rosenbrock};

    #[test]
    fn rho_examples() {
        assert!((rho(1.0, 0.4, 0.2).unwrap() - 0.75).abs() < 1e-15);
        assert_eq!(rho(1.0, 0.2, 0.2).unwrap(), 1.0);
        assert!(rho(1.0, 1.5, 0.2).unwrap() < 0.0);
        assert!(matches!(rho(1.0, 0.5, 1.0), Err(ArcError::DegenerateModel(_))));
    }

    #[test]
    fn sigma_update_examples() {
        let cfg = ArcConfig::default();
        assert_eq!(sigma_update(1.0, 0.8, &cfg), 0.5);
        assert_eq!(sigma_update(1.0, 0.5, &cfg), 1.0);
        assert_eq!(sigma_update(1.0, 0.05, &cfg), 2.0);
        assert_eq!(sigma_update(8000.0, 0.0, &cfg), 8096.0);
        assert_eq!(sigma_update(1.5e-8, 0.9, &cfg), 1e-8);
    }

    #[test]
    fn accepted_step_on_unit_quadratic() {
        let p = Quadratic::new(2, 1.0);
        let mut opt = ArcOptimizer::new(ArcConfig::deterministic(), 2).unwrap();
        let mut x = vec![2.0, 0.0];
        let r = opt.step(&mut x, &p, &[0], 0).unwrap();
        assert_eq!(r.branch, Branch::Accepted);
        assert!(r.rho.unwrap() >= 0.7);
        assert_eq!(opt.sigma(), 0.5);
        assert!(x[0] > 0.0 && x[0] < 2.0 && x[1] == 0.0);
    }

    #[test]
    fn rejected_step_moves_by_fallback() {
        // η₁ out of reach: every step is rejected.
        let cfg = ArcConfig {
            eta1: 1e30,
            eta2: 1e30,
            fallback: FallbackConfig::Sgd,
            alpha2: 0.01,
            ..ArcConfig::deterministic()
        };
        let p = Rosenbrock::new(2);
        let mut opt = ArcOptimizer::new(cfg, 2).unwrap();
        let mut x = p.initial_point();
        let (_, g) = p.eval(&x, &[0]);
        let r = opt.step(&mut x, &p, &[0], 0).unwrap();
        assert_eq!(r.branch, Branch::Fallback);
        assert_eq!(opt.sigma(), 2.0);
        assert_eq!(x, vec![-1.2 - 0.01 * g[0], 1.0 - 0.01 * g[1]]);
    }

    #[test]
    fn zero_budget_gives_empty_trace() {
        let p = Rosenbrock::new(2);
        let out = run(&p.initial_point(), &ArcConfig::default(), &p, &Budget::iterations(0), 1).unwrap();
        assert!(out.trace.steps.is_empty());
    }

    #[test]
    fn sampler_covers_each_epoch() {
        let mut s = MinibatchSampler::new(10, 4, 3);
        assert_eq!(s.iters_per_epoch(), 3);
        let mut seen: Vec<usize> = (0..3).flat_map(|_| s.next_batch()).collect();
        seen.sort();
        assert_eq!(seen, (0..10).collect::<Vec<_>>());
        assert!(MinibatchSampler::new(5, 8, 0).is_full_batch());
    }
}
