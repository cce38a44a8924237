use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{axpy, dot, norm, scale};
use crate::lqn::{LqnState, DEFAULT_EPS_CURV, DEFAULT_KAPPA};
use crate::subproblem::ImplicitSpectrum;

const MAX_ATTEMPTS: u64 = 10;
/// Minimum distance between hidden eigenvalues, and from `γ`.
const SEPARATION: f64 = 0.05;
const GAMMA: f64 = 1.0;
/// `‖s(−λ₁)‖` as a fraction of `−λ₁/σ` for hard cases.
const HARD_MARGIN: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseKind {
    Hard,
    Indefinite,
    PositiveDefinite,
}

impl CaseKind {
    pub const ALL: [CaseKind; 3] = [CaseKind::Hard, CaseKind::Indefinite, CaseKind::PositiveDefinite];
}

impl fmt::Display for CaseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CaseKind::Hard => "hard",
            CaseKind::Indefinite => "indefinite",
            CaseKind::PositiveDefinite => "pd",
        })
    }
}

impl FromStr for CaseKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "hard" => Ok(CaseKind::Hard),
            "indefinite" | "indef" => Ok(CaseKind::Indefinite),
            "pd" | "positive_definite" => Ok(CaseKind::PositiveDefinite),
            other => Err(format!("unknown case kind `{other}` (expected hard, indefinite or pd)")),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum CaseError {
    #[error("need 1 <= m <= 20 and n >= m + 1, got n = {n}, m = {m}")]
    Shape { n: usize, m: usize },
    #[error("sigma must be positive and finite, got {0}")]
    Sigma(f64),
    #[error("no valid {kind} case after {attempts} attempts (seed {seed})")]
    Exhausted { kind: CaseKind, attempts: u64, seed: u64 },
}

/// A cubic subproblem `(B, g, σ)` with a known spectral type.
#[derive(Debug, Clone)]
pub struct SubproblemCase {
    pub kind: CaseKind,
    pub state: LqnState,
    pub g: Vec<f64>,
    pub sigma: f64,
    pub seed: u64,
}

/// Builds a reproducible case of the requested kind.
///
/// Steps are drawn inside a random `m`-dimensional subspace `Q` and
/// `y = QHQᵀs` for a hidden diagonal `H`, so after `m` SR1 updates the
/// spectrum of `B` is exactly `diag(H)` on `Q` and `γ` elsewhere.
pub fn make_subproblem_case(kind: CaseKind, n: usize, m: usize, seed: u64) -> Result<SubproblemCase, CaseError> {
    make_subproblem_case_with_sigma(kind, n, m, 1.0, seed)
}

/// As [`make_subproblem_case`] with a chosen regularization weight.
pub fn make_subproblem_case_with_sigma(
    kind: CaseKind,
    n: usize,
    m: usize,
    sigma: f64,
    seed: u64,
) -> Result<SubproblemCase, CaseError> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(CaseError::Sigma(sigma));
    }
    if m == 0 || m > 20 || n < m + 1 {
        return Err(CaseError::Shape { n, m });
    }
    for attempt in 0..MAX_ATTEMPTS {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ attempt.wrapping_mul(0x9E37_79B9_7F4A_7C15));
        if let Some(case) = attempt_case(kind, n, m, sigma, seed, &mut rng) {
            return Ok(case);
        }
    }
    Err(CaseError::Exhausted {
        kind,
        attempts: MAX_ATTEMPTS,
        seed,
    })
}

fn gaussian(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

fn orthonormal_basis(rng: &mut ChaCha8Rng, n: usize, m: usize) -> Option<Vec<Vec<f64>>> {
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(m);
    for _ in 0..m {
        let mut v = gaussian(rng, n);
        // two passes of Gram-Schmidt
        for _ in 0..2 {
            for u in &q {
                let c = dot(u, &v);
                axpy(-c, u, &mut v);
            }
        }
        let nv = norm(&v);
        if nv < 1e-8 {
            return None;
        }
        scale(1.0 / nv, &mut v);
        q.push(v);
    }
    Some(q)
}

fn hidden_spectrum(kind: CaseKind, rng: &mut ChaCha8Rng, m: usize) -> Vec<f64> {
    let (lo, hi) = match kind {
        CaseKind::PositiveDefinite => (0.5, 10.0),
        CaseKind::Indefinite | CaseKind::Hard => (-5.0, 10.0),
    };
    let mut h: Vec<f64> = Vec::with_capacity(m);
    if kind != CaseKind::PositiveDefinite {
        h.push(rng.gen_range(-5.0..-0.5));
    }
    while h.len() < m {
        let v = rng.gen_range(lo..hi);
        let clear = (v - GAMMA).abs() >= SEPARATION && h.iter().all(|x| (v - x).abs() >= SEPARATION);
        if clear {
            h.push(v);
        }
    }
    h
}

fn combine(q: &[Vec<f64>], coeff: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n];
    for (col, c) in q.iter().zip(coeff) {
        axpy(*c, col, &mut out);
    }
    out
}

fn attempt_case(
    kind: CaseKind,
    n: usize,
    m: usize,
    sigma: f64,
    seed: u64,
    rng: &mut ChaCha8Rng,
) -> Option<SubproblemCase> {
    let q = orthonormal_basis(rng, n, m)?;
    let h = hidden_spectrum(kind, rng, m);

    let mut state = LqnState::new(n, m, GAMMA);
    for _ in 0..m {
        let mut a = gaussian(rng, m);
        let na = norm(&a);
        scale(1.0 / na, &mut a);
        let ha: Vec<f64> = a.iter().zip(&h).map(|(x, y)| x * y).collect();
        let s = combine(&q, &a, n);
        let y = combine(&q, &ha, n);
        if !state.try_update(&s, &y, DEFAULT_EPS_CURV, DEFAULT_KAPPA).accepted {
            return None;
        }
    }

    let mut g = combine(&q, &gaussian(rng, m), n);
    axpy(1.0, &gaussian(rng, n), &mut g);
    let gn = norm(&g);
    scale(1.0 / gn, &mut g);

    let leftmost = h.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).map(|(i, _)| i)?;
    let u1 = &q[leftmost];

    if kind == CaseKind::Hard {
        let c = dot(u1, &g);
        axpy(-c, u1, &mut g);
        let c = dot(u1, &g);
        axpy(-c, u1, &mut g);
        let spec = ImplicitSpectrum::new(&state, &g).ok()?;
        let (s2, _) = spec.norms_at(-spec.lambda1).ok()?;
        let target = HARD_MARGIN * (-spec.lambda1) / sigma;
        if s2 == 0.0 {
            return None;
        }
        scale(target / s2.sqrt(), &mut g);
    }

    let case = SubproblemCase {
        kind,
        state,
        g,
        sigma,
        seed,
    };
    check_invariants(&case, u1).then_some(case)
}

/// Kind-specific spectral conditions, checked through the implicit spectrum.
fn check_invariants(case: &SubproblemCase, u1: &[f64]) -> bool {
    let Ok(spec) = ImplicitSpectrum::new(&case.state, &case.g) else {
        return false;
    };
    let gn = spec.g_norm();
    let l1 = spec.lambda1;
    match case.kind {
        CaseKind::PositiveDefinite => l1 > 0.0,
        CaseKind::Indefinite => l1 < 0.0 && dot(u1, &case.g).abs() >= 1e-3 * gn,
        CaseKind::Hard => {
            if !(l1 < 0.0) || dot(u1, &case.g).abs() > 1e-12 * gn {
                return false;
            }
            match spec.norms_at(-l1) {
                Ok((s2, _)) => s2.sqrt() < -l1 / case.sigma,
                Err(_) => false,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kinds_have_expected_spectra() {
        for seed in 0..10 {
            let pd = make_subproblem_case(CaseKind::PositiveDefinite, 30, 5, seed).unwrap();
            assert!(ImplicitSpectrum::new(&pd.state, &pd.g).unwrap().lambda1 > 0.0);
            let ind = make_subproblem_case(CaseKind::Indefinite, 30, 5, seed).unwrap();
            assert!(ImplicitSpectrum::new(&ind.state, &ind.g).unwrap().lambda1 < 0.0);
            assert_eq!(ind.state.len(), 5);
        }
    }

    #[test]
    fn reproducible() {
        let a = make_subproblem_case(CaseKind::Hard, 40, 4, 77).unwrap();
        let b = make_subproblem_case(CaseKind::Hard, 40, 4, 77).unwrap();
        assert_eq!(a.g, b.g);
        assert_eq!(a.state.s_vectors(), b.state.s_vectors());
        assert_eq!(a.state.y_vectors(), b.state.y_vectors());
    }

    #[test]
    fn shape_checked() {
        assert_eq!(
            make_subproblem_case(CaseKind::Hard, 3, 3, 0).unwrap_err(),
            CaseError::Shape { n: 3, m: 3 }
        );
        assert!(make_subproblem_case(CaseKind::Hard, 10, 0, 0).is_err());
    }

    #[test]
    fn sigma_respected_for_hard_cases() {
        let c = make_subproblem_case_with_sigma(CaseKind::Hard, 20, 3, 4.0, 5).unwrap();
        assert_eq!(c.sigma, 4.0);
        assert!(make_subproblem_case_with_sigma(CaseKind::Hard, 20, 3, 0.0, 5).is_err());
    }

    #[test]
    fn kind_parsing() {
        for k in CaseKind::ALL {
            assert_eq!(k.to_string().parse::<CaseKind>().unwrap(), k);
        }
        assert!("nope".parse::<CaseKind>().is_err());
    }
}
