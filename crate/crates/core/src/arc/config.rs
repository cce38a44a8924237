use serde::{Deserialize, Serialize};

use crate::error::ArcError;
use crate::lqn::{GammaPolicy, DEFAULT_EPS_CURV, DEFAULT_KAPPA};
use crate::subproblem::{SolverOptions, DEFAULT_EPS_SHIFT, EPS_HARD, MAX_NEWTON, NU_TRAINING};

/// First-order step taken when the cubic step is rejected.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FallbackConfig {
    Sgd,
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl Default for FallbackConfig {
    fn default() -> Self {
        FallbackConfig::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-4,
        }
    }
}

/// Outer-loop hyperparameters. Missing JSON fields take their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArcConfig {
    pub eta1: f64,
    pub eta2: f64,
    pub sigma0: f64,
    /// Lower bound `δ` on `σ`.
    pub sigma_floor: f64,
    pub sigma_cap: f64,
    /// `σ` is divided by this on very successful steps.
    pub sigma_shrink: f64,
    /// `σ` is multiplied by this on rejected steps.
    pub sigma_grow: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub fallback: FallbackConfig,
    /// Minimum measured decrease for acceptance.
    pub mu: f64,
    pub nu: f64,
    pub eps_shift: f64,
    pub eps_hard: f64,
    pub max_newton: usize,
    pub eps_curv: f64,
    pub kappa: f64,
    pub memory: usize,
    pub gamma: f64,
    pub gamma_policy: GammaPolicy,
    /// Registered subproblem solver name.
    pub solver: String,
    /// Full-objective evaluation period in iterations; 0 disables.
    pub full_eval_every: usize,
}

impl Default for ArcConfig {
    fn default() -> Self {
        Self {
            eta1: 0.1,
            eta2: 0.7,
            sigma0: 1.0,
            sigma_floor: 1e-8,
            sigma_cap: 8096.0,
            sigma_shrink: 2.0,
            sigma_grow: 2.0,
            alpha1: 1.0,
            alpha2: 0.001,
            fallback: FallbackConfig::default(),
            mu: 1e-3,
            nu: NU_TRAINING,
            eps_shift: DEFAULT_EPS_SHIFT,
            eps_hard: EPS_HARD,
            max_newton: MAX_NEWTON,
            eps_curv: DEFAULT_EPS_CURV,
            kappa: DEFAULT_KAPPA,
            memory: 5,
            gamma: 1.0,
            gamma_policy: GammaPolicy::Fixed,
            solver: "normtrick".into(),
            full_eval_every: 0,
        }
    }
}

impl ArcConfig {
    /// Defaults for noise-free objectives: any strict decrease is accepted
    /// and rejected steps fall back to plain gradient descent.
    pub fn deterministic() -> Self {
        Self {
            mu: 0.0,
            fallback: FallbackConfig::Sgd,
            ..Self::default()
        }
    }

    pub fn from_json(text: &str) -> Result<Self, ArcError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| ArcError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            nu: self.nu,
            eps_shift: self.eps_shift,
            eps_hard: self.eps_hard,
            max_newton: self.max_newton,
            deadline: None,
        }
    }

    pub fn validate(&self) -> Result<(), ArcError> {
        let bad = |msg: &str| Err(ArcError::Config(msg.to_string()));
        if !(self.eta1 > 0.0 && self.eta1 <= self.eta2) {
            return bad("need 0 < eta1 <= eta2");
        }
        if !(self.sigma_floor > 0.0 && self.sigma_floor <= self.sigma0 && self.sigma0 <= self.sigma_cap) {
            return bad("need 0 < sigma_floor <= sigma0 <= sigma_cap");
        }
        if !(self.sigma_shrink >= 1.0 && self.sigma_grow >= 1.0) {
            return bad("sigma_shrink and sigma_grow must be >= 1");
        }
        if !(self.alpha1 > 0.0 && self.alpha2 > 0.0) {
            return bad("learning rates must be positive");
        }
        if !(self.mu >= 0.0) {
            return bad("mu must be non-negative");
        }
        if !(self.nu > 0.0 && self.eps_shift > 0.0 && self.eps_curv > 0.0 && self.kappa > 0.0 && self.eps_hard >= 0.0) {
            return bad("tolerances must be positive");
        }
        if self.memory == 0 || self.max_newton == 0 {
            return bad("memory and max_newton must be at least 1");
        }
        if !(self.gamma > 0.0) {
            return bad("gamma must be positive");
        }
        if let GammaPolicy::Adaptive { min, max } = self.gamma_policy {
            if !(min > 0.0 && min <= max) {
                return bad("adaptive gamma needs 0 < min <= max");
            }
        }
        if let FallbackConfig::Adam { beta1, beta2, eps } = self.fallback {
            if !((0.0..1.0).contains(&beta1) && (0.0..1.0).contains(&beta2) && eps > 0.0) {
                return bad("adam needs betas in [0, 1) and eps > 0");
            }
        }
        crate::registry::solvers().create(&self.solver, &())?;
        Ok(())
    }
}
