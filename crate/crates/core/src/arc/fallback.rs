use super::config::FallbackConfig;

/// First-order displacement generator with its own internal state.
pub trait FallbackStep: Send {
    fn name(&self) -> &'static str;

    /// Displacement to add to the iterate for gradient `g`.
    fn displacement(&mut self, g: &[f64]) -> Vec<f64>;
}

#[derive(Debug, Clone)]
pub struct Sgd {
    pub lr: f64,
}

impl FallbackStep for Sgd {
    fn name(&self) -> &'static str {
        "sgd"
    }

    fn displacement(&mut self, g: &[f64]) -> Vec<f64> {
        g.iter().map(|v| -self.lr * v).collect()
    }
}

/// Moment accumulators for [`adam_step`].
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u32,
}

impl AdamState {
    pub fn new(dim: usize, beta1: f64, beta2: f64, eps: f64) -> Self {
        Self {
            beta1,
            beta2,
            eps,
            m: vec![0.0; dim],
            v: vec![0.0; dim],
            t: 0,
        }
    }
}

/// Bias-corrected Adam displacement `−α·m̂/(√v̂ + ε)`; advances the state.
pub fn adam_step(state: &mut AdamState, g: &[f64], alpha2: f64) -> Vec<f64> {
    state.t += 1;
    let b1 = state.beta1;
    let b2 = state.beta2;
    let c1 = 1.0 - b1.powi(state.t as i32);
    let c2 = 1.0 - b2.powi(state.t as i32);
    g.iter()
        .zip(state.m.iter_mut().zip(state.v.iter_mut()))
        .map(|(gi, (mi, vi))| {
            *mi = b1 * *mi + (1.0 - b1) * gi;
            *vi = b2 * *vi + (1.0 - b2) * gi * gi;
            let m_hat = *mi / c1;
            let v_hat = *vi / c2;
            -alpha2 * m_hat / (v_hat.sqrt() + state.eps)
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub state: AdamState,
}

impl FallbackStep for Adam {
    fn name(&self) -> &'static str {
        "adam"
    }

    fn displacement(&mut self, g: &[f64]) -> Vec<f64> {
        adam_step(&mut self.state, g, self.lr)
    }
}

pub fn build_fallback(cfg: &FallbackConfig, lr: f64, dim: usize) -> Box<dyn FallbackStep> {
    match *cfg {
        FallbackConfig::Sgd => Box::new(Sgd { lr }),
        FallbackConfig::Adam { beta1, beta2, eps } => Box::new(Adam {
            lr,
            state: AdamState::new(dim, beta1, beta2, eps),
        }),
    }
}
