//! Adaptive regularization with cubics over a limited-memory SR1 model,
//! with a first-order fallback on rejected steps.

mod config;
mod driver;
mod fallback;
mod trace;

pub use config::{ArcConfig, FallbackConfig};
pub use driver::{rho, run, sigma_update, ArcOptimizer, Budget, MinibatchSampler, RunOutcome, StopReason};
pub use fallback::{adam_step, build_fallback, Adam, AdamState, FallbackStep, Sgd};
pub use trace::{Branch, FullEval, StepReport, Trace};
