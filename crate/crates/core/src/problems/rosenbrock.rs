use super::Problem;

/// Chained Rosenbrock `Σ 100(xᵢ₊₁ − xᵢ²)² + (1 − xᵢ)²`, started at `(−1.2, 1, −1.2, 1, …)`.
#[derive(Debug, Clone)]
pub struct Rosenbrock {
    n: usize,
}

impl Rosenbrock {
    pub fn new(n: usize) -> Self {
        assert!(n >= 2, "rosenbrock needs n >= 2");
        Self { n }
    }
}

impl Problem for Rosenbrock {
    fn name(&self) -> &'static str {
        "rosenbrock"
    }

    fn dim(&self) -> usize {
        self.n
    }

    fn eval(&self, x: &[f64], _batch: &[usize]) -> (f64, Vec<f64>) {
        let mut f = 0.0;
        let mut g = vec![0.0; self.n];
        for i in 0..self.n - 1 {
            let a = x[i + 1] - x[i] * x[i];
            let b = 1.0 - x[i];
            f += 100.0 * a * a + b * b;
            g[i] += -400.0 * x[i] * a - 2.0 * b;
            g[i + 1] += 200.0 * a;
        }
        (f, g)
    }

    fn initial_point(&self) -> Vec<f64> {
        (0..self.n).map(|i| if i % 2 == 0 { -1.2 } else { 1.0 }).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::fd_gradient;

    #[test]
    fn minimizer_and_gradient() {
        let p = Rosenbrock::new(5);
        let (f, g) = p.eval(&[1.0; 5], &[]);
        assert_eq!(f, 0.0);
        assert!(g.iter().all(|v| *v == 0.0));

        let x = [-1.2, 1.0, 0.3, -0.7, 2.0];
        let (_, g) = p.eval(&x, &[]);
        let fd = fd_gradient(&p, &x, &[], 1e-6);
        for (a, b) in g.iter().zip(&fd) {
            assert!((a - b).abs() <= 1e-5 * a.abs().max(1.0));
        }
        assert!((Rosenbrock::new(2).eval(&[-1.2, 1.0], &[]).0 - 24.2).abs() < 1e-12);
    }
}
