use crate::error::SolveError;
use crate::linalg::{dot, norm_sq};
use crate::lqn::LqnState;
use crate::small_eig::generalized_eigh;

use super::EPS_HARD;

/// Generalized eigenvalues this small relative to the largest are
/// treated as zero: the direction is dropped and folded into the
/// `γ`-cluster.
const ZERO_GEN_EIG: f64 = 1e-14;

/// Implicit eigendecomposition `B = U Λ Uᵀ` seen through one gradient `g`.
///
/// `U = (U₁ U₂)` is never formed: `U₂ = ΨV` and `U₁` spans the orthogonal
/// complement, where `B` acts as `γI`.
#[derive(Debug, Clone)]
pub struct ImplicitSpectrum {
    pub gamma: f64,
    /// `γ + 1/μᵢ` for the generalized eigenvalues `μᵢ` of `Mv = μTv`, ascending.
    pub lam_hat: Vec<f64>,
    /// Columns of `V` matching `lam_hat`, each of length `k`.
    pub vectors: Vec<Vec<f64>>,
    /// `ĝ₂ = Vᵀū`
    pub g2: Vec<f64>,
    /// `‖ĝ₁‖² = gᵀg − ĝ₂ᵀĝ₂`, clamped at zero.
    pub g1_sq: f64,
    /// `gᵀg − ĝ₂ᵀĝ₂` before clamping.
    pub g1_sq_raw: f64,
    pub g_norm_sq: f64,
    /// Leftmost eigenvalue of `B`.
    pub lambda1: f64,
    /// `ū = Ψᵀg`
    pub ubar: Vec<f64>,
    /// Multiplicity of `γ`: `n − lam_hat.len()`.
    pub cluster_dim: usize,
    /// Numerators at or below this magnitude may be dropped where their
    /// denominator vanishes.
    pub eps_hard_abs: f64,
}

impl ImplicitSpectrum {
    pub fn new(state: &LqnState, g: &[f64]) -> Result<Self, SolveError> {
        if g.len() != state.dim() {
            return Err(crate::error::LqnError::Dimension {
                expected: state.dim(),
                got: g.len(),
            }
            .into());
        }
        let gamma = state.gamma();
        let g_norm_sq = norm_sq(g);
        let eps_hard_abs = EPS_HARD * g_norm_sq.sqrt();
        if state.is_empty() {
            return Ok(Self {
                gamma,
                lam_hat: Vec::new(),
                vectors: Vec::new(),
                g2: Vec::new(),
                g1_sq: g_norm_sq,
                g1_sq_raw: g_norm_sq,
                g_norm_sq,
                lambda1: gamma,
                ubar: Vec::new(),
                cluster_dim: state.dim(),
                eps_hard_abs,
            });
        }

        let gen = generalized_eigh(&state.middle(), &state.psi_gram())?;
        let mu_max = gen.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut kept: Vec<(f64, Vec<f64>)> = gen
            .values
            .iter()
            .enumerate()
            .filter(|(_, mu)| mu.abs() > ZERO_GEN_EIG * mu_max && (1.0 / **mu).is_finite())
            .map(|(j, mu)| (gamma + 1.0 / mu, gen.vectors.column(j)))
            .collect();
        kept.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (lam_hat, vectors): (Vec<f64>, Vec<Vec<f64>>) = kept.into_iter().unzip();

        let ubar = state.psi_t(g);
        let g2: Vec<f64> = vectors.iter().map(|v| dot(v, &ubar)).collect();
        let g1_sq_raw = g_norm_sq - norm_sq(&g2);
        let cluster_dim = state.dim().saturating_sub(lam_hat.len());
        let mut lambda1 = lam_hat.first().copied().unwrap_or(f64::INFINITY);
        if cluster_dim > 0 {
            lambda1 = lambda1.min(gamma);
        }
        Ok(Self {
            gamma,
            lam_hat,
            vectors,
            g2,
            g1_sq: g1_sq_raw.max(0.0),
            g1_sq_raw,
            g_norm_sq,
            lambda1,
            ubar,
            cluster_dim,
            eps_hard_abs,
        })
    }

    pub fn with_eps_hard(mut self, eps_hard: f64) -> Self {
        self.eps_hard_abs = eps_hard * self.g_norm_sq.sqrt();
        self
    }

    pub fn g_norm(&self) -> f64 {
        self.g_norm_sq.sqrt()
    }

    /// Tolerance for grouping eigenvalues with `λ₁`.
    pub fn cluster_tol(&self) -> f64 {
        1e-10 * self.lambda1.abs().max(1.0)
    }

    /// Indices into `lam_hat` of the eigenvalues equal to `λ₁`.
    pub fn leftmost_indices(&self) -> Vec<usize> {
        let tol = self.cluster_tol();
        self.lam_hat
            .iter()
            .enumerate()
            .filter(|(_, l)| **l - self.lambda1 <= tol)
            .map(|(i, _)| i)
            .collect()
    }

    /// Norm of the gradient's component on the leftmost eigenspace of the
    /// low-rank part.
    pub fn leftmost_component(&self) -> f64 {
        self.leftmost_indices()
            .iter()
            .map(|&i| self.g2[i] * self.g2[i])
            .sum::<f64>()
            .sqrt()
    }

    /// Spectral terms as `(numerator², eigenvalue)`.
    fn terms(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        let cluster = (self.cluster_dim > 0).then_some((self.g1_sq, self.gamma));
        cluster
            .into_iter()
            .chain(self.g2.iter().zip(&self.lam_hat).map(|(c, l)| (c * c, *l)))
    }

    /// `(‖s(λ)‖², ‖w(λ)‖²)` in `O(k)` for `s(λ) = −(B+λI)⁻¹g` and
    /// `‖w‖² = sᵀ(B+λI)⁻¹s`.
    ///
    /// Terms whose denominator vanishes (or is within the cluster
    /// tolerance of zero) are dropped when their numerator is negligible,
    /// which is the pseudo-inverse at `λ = −λ₁`.
    pub fn norms_at(&self, lam: f64) -> Result<(f64, f64), SolveError> {
        let gap = self.cluster_tol();
        let mut s2 = 0.0;
        let mut w2 = 0.0;
        for (num_sq, eig) in self.terms() {
            let d = eig + lam;
            if d <= gap && num_sq.sqrt() <= self.eps_hard_abs {
                continue;
            }
            if d <= 0.0 {
                return Err(SolveError::Domain(format!(
                    "shift {lam:e} is left of eigenvalue {eig:e} with nonzero gradient component"
                )));
            }
            let d2 = d * d;
            s2 += num_sq / d2;
            w2 += num_sq / (d2 * d);
        }
        Ok((s2, w2))
    }

    /// `φ₁(λ) = 1/‖s(λ)‖ − σ/λ`
    pub fn phi1(&self, lam: f64, sigma: f64) -> Result<f64, SolveError> {
        if !(lam > 0.0) {
            return Err(SolveError::Domain(format!("phi1 needs lambda > 0, got {lam:e}")));
        }
        let (s2, _) = self.norms_at(lam)?;
        if s2 == 0.0 {
            return Ok(f64::INFINITY);
        }
        Ok(1.0 / s2.sqrt() - sigma / lam)
    }

    /// Newton correction for `φ₁` at `λ`, from the two norms only.
    pub fn newton_step(&self, lam: f64, sigma: f64) -> Result<f64, SolveError> {
        let (s2, w2) = self.norms_at(lam)?;
        Ok(newton_correction(s2.sqrt(), w2, lam, sigma))
    }
}

/// `Δλ = λ(‖s‖ − λ/σ) / (‖s‖ + (λ/σ)(λ‖w‖²/‖s‖²))`
pub fn newton_correction(s_norm: f64, w_norm_sq: f64, lam: f64, sigma: f64) -> f64 {
    let r = lam / sigma;
    lam * (s_norm - r) / (s_norm + r * (lam * w_norm_sq / (s_norm * s_norm)))
}
