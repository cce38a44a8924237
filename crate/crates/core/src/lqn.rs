//! Limited-memory SR1 state in compact form.
//!
//! `B = γI + Ψ M⁻¹ Ψᵀ` with `Ψ = Y − γS` and `M = E − γSᵀS`, where `E` is
//! `SᵀY` symmetrized from its lower triangle. Only the `k x k` Gram
//! matrices `SᵀS`, `SᵀY` and `YᵀY` are cached; `ΨᵀΨ` and `M` are
//! assembled from them without touching the `n`-vectors.

use serde::{Deserialize, Serialize};

use crate::error::LqnError;
use crate::linalg::{axpy, dot, norm};
use crate::small_eig::{cholesky, jacobi_eigh, Lu, SmallMatrix};

pub const DEFAULT_EPS_CURV: f64 = 1e-8;
pub const DEFAULT_KAPPA: f64 = 1e-7;

/// How `γ` (the `B₀ = γI` scaling) evolves as pairs arrive.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum GammaPolicy {
    #[default]
    Fixed,
    /// `γ = clamp(yᵀy / sᵀy, min, max)` after each accepted pair with `sᵀy > 0`.
    Adaptive { min: f64, max: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateReason {
    Accepted,
    CurvatureSkip,
    DegenerateSkip,
    ResetTriggered,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UpdateOutcome {
    pub accepted: bool,
    pub reason: UpdateReason,
}

impl UpdateOutcome {
    fn of(reason: UpdateReason) -> Self {
        Self {
            accepted: reason == UpdateReason::Accepted,
            reason,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LqnState {
    dim: usize,
    gamma: f64,
    memory: usize,
    gamma_policy: GammaPolicy,
    /// Oldest pair first.
    s: Vec<Vec<f64>>,
    y: Vec<Vec<f64>>,
    sts: SmallMatrix,
    sty: SmallMatrix,
    yty: SmallMatrix,
}

impl LqnState {
    pub fn new(dim: usize, memory: usize, gamma: f64) -> Self {
        assert!(memory >= 1, "memory must be at least 1");
        assert!(gamma > 0.0 && gamma.is_finite(), "gamma must be positive");
        Self {
            dim,
            gamma,
            memory,
            gamma_policy: GammaPolicy::Fixed,
            s: Vec::new(),
            y: Vec::new(),
            sts: SmallMatrix::zeros(0),
            sty: SmallMatrix::zeros(0),
            yty: SmallMatrix::zeros(0),
        }
    }

    pub fn with_gamma_policy(mut self, policy: GammaPolicy) -> Self {
        self.gamma_policy = policy;
        self
    }

    /// Builds a state by appending the given pairs verbatim, with no
    /// curvature test, rescaling or reset. Pairs beyond `memory` evict
    /// the oldest.
    pub fn from_pairs(dim: usize, memory: usize, gamma: f64, pairs: &[(Vec<f64>, Vec<f64>)]) -> Self {
        let mut st = Self::new(dim, memory, gamma);
        for (s, y) in pairs {
            st.append(s.clone(), y.clone());
        }
        st
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }

    pub fn memory(&self) -> usize {
        self.memory
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Changes `γ`. The caches do not depend on it.
    pub fn set_gamma(&mut self, gamma: f64) {
        assert!(gamma > 0.0 && gamma.is_finite());
        self.gamma = gamma;
    }

    pub fn s_vectors(&self) -> &[Vec<f64>] {
        &self.s
    }

    pub fn y_vectors(&self) -> &[Vec<f64>] {
        &self.y
    }

    pub fn sts(&self) -> &SmallMatrix {
        &self.sts
    }

    pub fn sty(&self) -> &SmallMatrix {
        &self.sty
    }

    pub fn yty(&self) -> &SmallMatrix {
        &self.yty
    }

    /// Gram matrices recomputed from the stored vectors.
    pub fn recompute_caches(&self) -> (SmallMatrix, SmallMatrix, SmallMatrix) {
        let k = self.len();
        (
            SmallMatrix::from_fn(k, |i, j| dot(&self.s[i], &self.s[j])),
            SmallMatrix::from_fn(k, |i, j| dot(&self.s[i], &self.y[j])),
            SmallMatrix::from_fn(k, |i, j| dot(&self.y[i], &self.y[j])),
        )
    }

    /// `ΨᵀΨ = YᵀY − γ(SᵀY + YᵀS) + γ²SᵀS`
    pub fn psi_gram(&self) -> SmallMatrix {
        let g = self.gamma;
        SmallMatrix::from_fn(self.len(), |i, j| {
            self.yty[(i, j)] - g * (self.sty[(i, j)] + self.sty[(j, i)]) + g * g * self.sts[(i, j)]
        })
    }

    /// `E`: `SᵀY` with its strict upper triangle replaced by the transposed lower one.
    pub fn e_matrix(&self) -> SmallMatrix {
        SmallMatrix::from_fn(self.len(), |i, j| self.sty[(i.max(j), i.min(j))])
    }

    /// `M = E − γSᵀS`
    pub fn middle(&self) -> SmallMatrix {
        let g = self.gamma;
        let e = self.e_matrix();
        SmallMatrix::from_fn(self.len(), |i, j| e[(i, j)] - g * self.sts[(i, j)])
    }

    /// `Ψᵀv = Yᵀv − γSᵀv`
    pub fn psi_t(&self, v: &[f64]) -> Vec<f64> {
        self.s
            .iter()
            .zip(&self.y)
            .map(|(s, y)| dot(y, v) - self.gamma * dot(s, v))
            .collect()
    }

    /// `Ψz = Yz − γSz`
    pub fn psi_mul(&self, z: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.psi_mul_add(z, &mut out);
        out
    }

    /// `out += Ψz`
    pub fn psi_mul_add(&self, z: &[f64], out: &mut [f64]) {
        for ((s, y), zi) in self.s.iter().zip(&self.y).zip(z) {
            axpy(*zi, y, out);
            axpy(-self.gamma * zi, s, out);
        }
    }

    fn check_dim(&self, v: &[f64]) -> Result<(), LqnError> {
        if v.len() != self.dim {
            return Err(LqnError::Dimension {
                expected: self.dim,
                got: v.len(),
            });
        }
        Ok(())
    }

    /// `B v` in `O(mn + m³)`.
    pub fn bmul(&self, v: &[f64]) -> Result<Vec<f64>, LqnError> {
        self.check_dim(v)?;
        let mut out: Vec<f64> = v.iter().map(|x| self.gamma * x).collect();
        if self.is_empty() {
            return Ok(out);
        }
        let lu = Lu::new(&self.middle()).map_err(|_| LqnError::SingularM)?;
        let z = lu.solve(&self.psi_t(v));
        self.psi_mul_add(&z, &mut out);
        Ok(out)
    }

    /// `m(s) = f0 + sᵀg + ½sᵀBs + (σ/3)‖s‖³`
    pub fn model_value(&self, g: &[f64], sigma: f64, s: &[f64], f0: f64) -> Result<f64, LqnError> {
        self.check_dim(g)?;
        let bs = self.bmul(s)?;
        let ns = norm(s);
        Ok(f0 + dot(s, g) + 0.5 * dot(s, &bs) + sigma / 3.0 * ns * ns * ns)
    }

    /// Offers a new `(s, y)` pair.
    ///
    /// Both vectors are first divided by `max(‖s‖, κ)`. The pair is skipped
    /// when `|sᵀr| ≤ ε‖s‖‖r‖` for `r = y − Bs`. After appending, the
    /// memory is trimmed (oldest and newest pair dropped) while `SᵀS` has
    /// an eigenvalue below `κ` or the compact factors stop being well
    /// defined.
    ///
    /// Panics if the vectors do not have the state dimension.
    pub fn try_update(&mut self, s: &[f64], y: &[f64], eps_curv: f64, kappa: f64) -> UpdateOutcome {
        assert_eq!(s.len(), self.dim, "step dimension mismatch");
        assert_eq!(y.len(), self.dim, "gradient-difference dimension mismatch");
        if !(crate::linalg::all_finite(s) && crate::linalg::all_finite(y)) {
            return UpdateOutcome::of(UpdateReason::DegenerateSkip);
        }
        let scale = 1.0 / norm(s).max(kappa);
        let s: Vec<f64> = s.iter().map(|v| v * scale).collect();
        let y: Vec<f64> = y.iter().map(|v| v * scale).collect();

        let bs = match self.bmul(&s) {
            Ok(bs) => bs,
            Err(_) => {
                self.trim_until_valid(kappa);
                return UpdateOutcome::of(UpdateReason::ResetTriggered);
            }
        };
        let r: Vec<f64> = y.iter().zip(&bs).map(|(a, b)| a - b).collect();
        let nr = norm(&r);
        let str_ = dot(&s, &r);
        if nr == 0.0 || str_.abs() <= eps_curv * norm(&s) * nr {
            return UpdateOutcome::of(UpdateReason::CurvatureSkip);
        }
        if !str_.is_finite() {
            return UpdateOutcome::of(UpdateReason::DegenerateSkip);
        }

        let sy = dot(&s, &y);
        let yy = dot(&y, &y);
        self.append(s, y);
        if !self.is_valid(kappa) {
            self.trim_until_valid(kappa);
            return UpdateOutcome::of(UpdateReason::ResetTriggered);
        }
        if let GammaPolicy::Adaptive { min, max } = self.gamma_policy {
            if sy > 0.0 {
                self.gamma = (yy / sy).clamp(min, max);
                if !self.is_valid(kappa) {
                    self.trim_until_valid(kappa);
                    return UpdateOutcome::of(UpdateReason::ResetTriggered);
                }
            }
        }
        UpdateOutcome::of(UpdateReason::Accepted)
    }

    fn is_valid(&self, kappa: f64) -> bool {
        if self.is_empty() {
            return true;
        }
        let (_, w) = jacobi_eigh(&self.sts);
        w[0] >= kappa && Lu::new(&self.middle()).is_ok() && cholesky(&self.psi_gram()).is_ok()
    }

    fn trim_until_valid(&mut self, kappa: f64) {
        while !self.is_empty() {
            self.reset_trim();
            if self.is_valid(kappa) {
                break;
            }
        }
    }

    /// Appends a pair, evicting the oldest when full. Each cache gains
    /// (and possibly loses) exactly one row and column.
    fn append(&mut self, s: Vec<f64>, y: Vec<f64>) {
        assert_eq!(s.len(), self.dim);
        assert_eq!(y.len(), self.dim);
        if self.len() == self.memory {
            self.remove(0);
        }
        let k = self.len();
        let mut sts_row = Vec::with_capacity(k + 1);
        let mut sty_row = Vec::with_capacity(k + 1);
        let mut sty_col = Vec::with_capacity(k);
        let mut yty_row = Vec::with_capacity(k + 1);
        for j in 0..k {
            sts_row.push(dot(&s, &self.s[j]));
            sty_row.push(dot(&s, &self.y[j]));
            sty_col.push(dot(&self.s[j], &y));
            yty_row.push(dot(&y, &self.y[j]));
        }
        let sts_col = sts_row.clone();
        let yty_col = yty_row.clone();
        sts_row.push(dot(&s, &s));
        sty_row.push(dot(&s, &y));
        yty_row.push(dot(&y, &y));
        self.sts.push_row_col(&sts_row, &sts_col);
        self.sty.push_row_col(&sty_row, &sty_col);
        self.yty.push_row_col(&yty_row, &yty_col);
        self.s.push(s);
        self.y.push(y);
    }

    fn remove(&mut self, idx: usize) {
        self.s.remove(idx);
        self.y.remove(idx);
        self.sts.remove_row_col(idx);
        self.sty.remove_row_col(idx);
        self.yty.remove_row_col(idx);
    }

    /// Drops the oldest and the newest pair (the only pair when `k = 1`).
    pub fn reset_trim(&mut self) {
        match self.len() {
            0 => {}
            1 => self.remove(0),
            k => {
                self.remove(k - 1);
                self.remove(0);
            }
        }
    }

    pub fn clear(&mut self) {
        while !self.is_empty() {
            self.remove(0);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(n: usize, i: usize) -> Vec<f64> {
        let mut v = vec![0.0; n];
        v[i] = 1.0;
        v
    }

    #[test]
    fn one_pair_secant() {
        let mut st = LqnState::new(2, 5, 1.0);
        let out = st.try_update(&e(2, 0), &[2.0, 0.0], DEFAULT_EPS_CURV, DEFAULT_KAPPA);
        assert_eq!(out.reason, UpdateReason::Accepted);
        assert!(out.accepted);
        let b = st.bmul(&e(2, 0)).unwrap();
        assert!((b[0] - 2.0).abs() < 1e-15 && b[1].abs() < 1e-15);
    }

    #[test]
    fn zero_residual_is_skipped() {
        let mut st = LqnState::new(2, 5, 1.0);
        let out = st.try_update(&e(2, 0), &e(2, 0), DEFAULT_EPS_CURV, DEFAULT_KAPPA);
        assert_eq!(out.reason, UpdateReason::CurvatureSkip);
        assert!(!out.accepted);
        assert!(st.is_empty());
    }

    #[test]
    fn non_finite_is_degenerate() {
        let mut st = LqnState::new(2, 5, 1.0);
        let out = st.try_update(&[f64::NAN, 0.0], &e(2, 0), DEFAULT_EPS_CURV, DEFAULT_KAPPA);
        assert_eq!(out.reason, UpdateReason::DegenerateSkip);
    }

    #[test]
    fn near_parallel_steps_trigger_reset() {
        // Gram of [e1, e1(1+1e-9)] after unit rescaling is [[1,1],[1,1]]
        // up to rounding: eigenvalues 0 and 2, so min eig < κ.
        let mut st = LqnState::new(3, 5, 1.0);
        assert!(st.try_update(&e(3, 0), &[2.0, 0.0, 0.0], 1e-8, 1e-7).accepted);
        let s2: Vec<f64> = e(3, 0).iter().map(|v| v * (1.0 + 1e-9)).collect();
        let y2: Vec<f64> = s2.iter().map(|v| 3.0 * v).collect();
        let out = st.try_update(&s2, &y2, 1e-8, 1e-7);
        assert_eq!(out.reason, UpdateReason::ResetTriggered);
        assert!(!out.accepted);
        assert_eq!(st.len(), 0);
    }

    #[test]
    fn bmul_examples() {
        let st = LqnState::from_pairs(2, 5, 1.0, &[(e(2, 0), vec![3.0, 0.0])]);
        let b = st.bmul(&[1.0, 1.0]).unwrap();
        assert!((b[0] - 3.0).abs() < 1e-15 && (b[1] - 1.0).abs() < 1e-15);

        let st = LqnState::new(3, 5, 2.0);
        assert_eq!(st.bmul(&[1.0, -2.0, 0.5]).unwrap(), vec![2.0, -4.0, 1.0]);
        assert!(matches!(st.bmul(&[1.0]), Err(LqnError::Dimension { .. })));
    }

    #[test]
    fn model_value_examples() {
        let st = LqnState::new(2, 5, 1.0);
        let g = [2.0, 0.0];
        assert_eq!(st.model_value(&g, 1.0, &[0.0, 0.0], 0.7).unwrap(), 0.7);
        let m = st.model_value(&g, 1.0, &[-1.0, 0.0], 0.0).unwrap();
        assert!((m + 7.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn model_value_padding_invariance() {
        let st = LqnState::from_pairs(2, 5, 1.0, &[(vec![1.0, 0.5], vec![3.0, -1.0])]);
        let padded = LqnState::from_pairs(3, 5, 1.0, &[(vec![1.0, 0.5, 0.0], vec![3.0, -1.0, 0.0])]);
        let a = st.model_value(&[0.3, -0.2], 0.5, &[0.1, 0.4], 0.0).unwrap();
        let b = padded
            .model_value(&[0.3, -0.2, 0.0], 0.5, &[0.1, 0.4, 0.0], 0.0)
            .unwrap();
        assert!((a - b).abs() < 1e-15);
    }

    #[test]
    fn reset_trim_counts() {
        let pairs: Vec<_> = (0..3)
            .map(|i| (e(4, i), e(4, i).iter().map(|v| 2.0 * v).collect()))
            .collect();
        let mut st = LqnState::from_pairs(4, 5, 1.0, &pairs);
        st.reset_trim();
        assert_eq!(st.len(), 1);
        assert_eq!(st.s_vectors()[0], e(4, 1));
        st.reset_trim();
        assert_eq!(st.len(), 0);

        let mut st = LqnState::from_pairs(4, 5, 1.0, &pairs[..2]);
        st.reset_trim();
        assert_eq!(st.len(), 0);
        assert_eq!(st.sts().order(), 0);
    }

    #[test]
    fn psi_gram_matches_explicit() {
        let pairs = vec![
            (vec![1.0, 0.2, -0.3], vec![2.0, 0.1, 0.4]),
            (vec![0.1, 1.0, 0.5], vec![-0.3, 0.7, 1.1]),
        ];
        let st = LqnState::from_pairs(3, 5, 0.7, &pairs);
        let psi: Vec<Vec<f64>> = pairs
            .iter()
            .map(|(s, y)| y.iter().zip(s).map(|(a, b)| a - 0.7 * b).collect())
            .collect();
        let t = st.psi_gram();
        for i in 0..2 {
            for j in 0..2 {
                assert!((t[(i, j)] - dot(&psi[i], &psi[j])).abs() < 1e-14);
            }
        }
    }
}
