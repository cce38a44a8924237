use super::Problem;

/// `½ Σ dᵢxᵢ²` with `dᵢ` log-spaced between 1 and `condition`.
#[derive(Debug, Clone)]
pub struct Quadratic {
    diag: Vec<f64>,
}

impl Quadratic {
    pub fn new(n: usize, condition: f64) -> Self {
        assert!(n >= 1 && condition >= 1.0);
        let diag = (0..n)
            .map(|i| {
                if n == 1 {
                    1.0
                } else {
                    condition.powf(i as f64 / (n - 1) as f64)
                }
            })
            .collect();
        Self { diag }
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }
}

impl Problem for Quadratic {
    fn name(&self) -> &'static str {
        "quadratic"
    }

    fn dim(&self) -> usize {
        self.diag.len()
    }

    fn eval(&self, x: &[f64], _batch: &[usize]) -> (f64, Vec<f64>) {
        let g: Vec<f64> = x.iter().zip(&self.diag).map(|(a, d)| a * d).collect();
        let f = 0.5 * x.iter().zip(&g).map(|(a, b)| a * b).sum::<f64>();
        (f, g)
    }

    fn initial_point(&self) -> Vec<f64> {
        vec![1.0; self.diag.len()]
    }
}
