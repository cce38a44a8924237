use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::Problem;
use crate::linalg::dot;

/// Binary logistic regression on Gaussian features. Labels are drawn from
/// the model's own Bernoulli distribution around a hidden weight vector,
/// so the data are noisy and the minimizer is finite.
#[derive(Debug, Clone)]
pub struct LogisticSynth {
    n_features: usize,
    features: Vec<f64>,
    labels: Vec<f64>,
}

impl LogisticSynth {
    pub fn new(n_features: usize, n_samples: usize, seed: u64) -> Self {
        Self::with_margin(n_features, n_samples, 0.5, seed)
    }

    /// Features are standard Gaussian noise plus a push of `margin` along a
    /// hidden unit direction; the label is the side of that direction, so
    /// the classes are separable with the given margin.
    pub fn with_margin(n_features: usize, n_samples: usize, margin: f64, seed: u64) -> Self {
        assert!(n_features >= 1 && n_samples >= 1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut w_true: Vec<f64> = (0..n_features).map(|_| rng.sample(StandardNormal)).collect();
        let wn = crate::linalg::norm(&w_true);
        crate::linalg::scale(1.0 / wn, &mut w_true);
        let mut features = Vec::with_capacity(n_features * n_samples);
        let mut labels = Vec::with_capacity(n_samples);
        for _ in 0..n_samples {
            let mut row: Vec<f64> = (0..n_features).map(|_| rng.sample(StandardNormal)).collect();
            let y = if rng.gen::<bool>() { 1.0 } else { -1.0 };
            let z = dot(&row, &w_true);
            // move the projection onto the label's side, at least `margin` out
            let target = y * (z.abs() + margin);
            crate::linalg::axpy(target - z, &w_true, &mut row);
            labels.push(y);
            features.extend(row);
        }
        Self {
            n_features,
            features,
            labels,
        }
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.n_features..(i + 1) * self.n_features]
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^{−t})` without overflow.
fn softplus_neg(t: f64) -> f64 {
    if t > 0.0 {
        (-t).exp().ln_1p()
    } else {
        -t + t.exp().ln_1p()
    }
}

impl Problem for LogisticSynth {
    fn name(&self) -> &'static str {
        "logistic"
    }

    fn dim(&self) -> usize {
        self.n_features
    }

    fn n_samples(&self) -> usize {
        self.labels.len()
    }

    fn eval(&self, x: &[f64], batch: &[usize]) -> (f64, Vec<f64>) {
        let mut f = 0.0;
        let mut g = vec![0.0; self.n_features];
        for &i in batch {
            let a = self.row(i);
            let t = self.labels[i] * dot(a, x);
            f += softplus_neg(t);
            let c = -self.labels[i] * sigmoid(-t);
            crate::linalg::axpy(c, a, &mut g);
        }
        let inv = 1.0 / batch.len().max(1) as f64;
        crate::linalg::scale(inv, &mut g);
        (f * inv, g)
    }

    fn initial_point(&self) -> Vec<f64> {
        vec![0.0; self.n_features]
    }
}
