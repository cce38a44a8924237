use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::SolveError;
use crate::linalg::{axpy, dot, norm, norm_sq};
use crate::lqn::LqnState;
use crate::small_eig::{Lu, SmallMatrix};

use super::spectrum::{newton_correction, ImplicitSpectrum};
use super::{SolutionCase, SolveMode, SolverOptions, SubproblemSolution};

const PROBE_SEED: u64 = 0x5eed_0001;
/// Halvings of the initial offset allowed while looking for a start left of the root.
const MAX_START_SHRINK: usize = 60;

/// Runs Newton's method on `φ₁` given a way to evaluate `(‖s(λ)‖², ‖w(λ)‖²)`.
///
/// Stops once `|‖s(λ)‖ − λ/σ| < ν·max(1, λ/σ)`. Returns `(λ*, iterations)`.
pub fn newton_secular(
    mut norms: impl FnMut(f64) -> Result<(f64, f64), SolveError>,
    sigma: f64,
    nu: f64,
    lambda_init: f64,
    lower: f64,
    max_iter: usize,
) -> Result<(f64, usize), SolveError> {
    let mut lam = lambda_init;
    for iter in 0..=max_iter {
        let (s2, w2) = norms(lam)?;
        let s_norm = s2.sqrt();
        let r = lam / sigma;
        if (s_norm - r).abs() < nu * r.max(1.0) {
            return Ok((lam, iter));
        }
        if iter == max_iter {
            break;
        }
        if s_norm == 0.0 {
            return Err(SolveError::Domain("zero step norm inside Newton loop".into()));
        }
        let next = lam + newton_correction(s_norm, w2, lam, sigma);
        if !(next > lower) || !next.is_finite() {
            return Err(SolveError::Domain(format!(
                "Newton iterate {next:e} left the admissible interval ({lower:e}, inf)"
            )));
        }
        lam = next;
    }
    Err(SolveError::MaxIterations(max_iter))
}

/// Newton iteration on the spectrum alone (`O(k)` per step).
pub fn solve_lambda(
    spec: &ImplicitSpectrum,
    sigma: f64,
    nu: f64,
    lambda_init: f64,
    max_iter: usize,
) -> Result<(f64, usize), SolveError> {
    let lower = (-spec.lambda1).max(0.0);
    newton_secular(|l| spec.norms_at(l), sigma, nu, lambda_init, lower, max_iter)
}

/// `s = −(B+λI)⁺g = −g/(λ+γ) − ΨV D̄ ĝ₂` with `D̄ = (Λ̂+λI)⁻¹ − (λ+γ)⁻¹I`.
pub fn recover_step(state: &LqnState, spec: &ImplicitSpectrum, g: &[f64], lam: f64) -> Result<Vec<f64>, SolveError> {
    let c = lam + spec.gamma;
    if !(c > 0.0) {
        return Err(SolveError::Domain(format!("lambda + gamma = {c:e} is not positive")));
    }
    let inv_c = 1.0 / c;
    let gap = spec.cluster_tol();
    let mut r = Vec::with_capacity(spec.lam_hat.len());
    for (lh, g2) in spec.lam_hat.iter().zip(&spec.g2) {
        let d = lh + lam;
        let inv = if d <= gap && g2.abs() <= spec.eps_hard_abs {
            0.0
        } else if d <= 0.0 {
            return Err(SolveError::Domain(format!(
                "shift {lam:e} is left of eigenvalue {lh:e} with nonzero gradient component"
            )));
        } else {
            1.0 / d
        };
        r.push((inv - inv_c) * g2);
    }
    let mut s: Vec<f64> = g.iter().map(|v| -inv_c * v).collect();
    if !r.is_empty() {
        let z = combine(&spec.vectors, &r);
        let neg: Vec<f64> = z.iter().map(|v| -v).collect();
        state.psi_mul_add(&neg, &mut s);
    }
    Ok(s)
}

/// `Σ coeffᵢ · columnᵢ`
fn combine(columns: &[Vec<f64>], coeff: &[f64]) -> Vec<f64> {
    let k = columns.first().map_or(0, Vec::len);
    let mut out = vec![0.0; k];
    for (col, c) in columns.iter().zip(coeff) {
        axpy(*c, col, &mut out);
    }
    out
}

/// Unit eigenvector of `B` for its leftmost eigenvalue.
///
/// When `γ` is leftmost the probe is projected onto the complement of
/// `U₂`; the fallback probes are `e₁` and a fixed pseudo-random vector.
pub fn leftmost_eigvec(state: &LqnState, spec: &ImplicitSpectrum, probe: &[f64]) -> Result<Vec<f64>, SolveError> {
    leftmost_eigvec_with(state, spec, &[probe])
}

pub(crate) fn leftmost_eigvec_with(
    state: &LqnState,
    spec: &ImplicitSpectrum,
    probes: &[&[f64]],
) -> Result<Vec<f64>, SolveError> {
    let n = state.dim();
    let gamma_leftmost = spec.cluster_dim > 0 && spec.lam_hat.first().is_none_or(|l| spec.gamma <= *l);
    if !gamma_leftmost {
        let mut u = state.psi_mul(&spec.vectors[0]);
        let nu = norm(&u);
        if nu == 0.0 {
            return Err(SolveError::DegenerateProbe);
        }
        crate::linalg::scale(1.0 / nu, &mut u);
        return Ok(u);
    }

    let mut e1 = vec![0.0; n];
    if n > 0 {
        e1[0] = 1.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(PROBE_SEED);
    let random: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    let fallbacks: [&[f64]; 2] = [&e1, &random];
    for probe in probes.iter().copied().chain(fallbacks) {
        let pn = norm(probe);
        if pn == 0.0 {
            continue;
        }
        let mut r = probe.to_vec();
        if !spec.vectors.is_empty() {
            // r̂ = (I − U₂U₂ᵀ) r with U₂ = ΨV
            let coeff: Vec<f64> = {
                let psi_t = state.psi_t(probe);
                spec.vectors.iter().map(|v| dot(v, &psi_t)).collect()
            };
            let z = combine(&spec.vectors, &coeff);
            let neg: Vec<f64> = z.iter().map(|v| -v).collect();
            state.psi_mul_add(&neg, &mut r);
        }
        let rn = norm(&r);
        if rn > 1e-10 * pn {
            crate::linalg::scale(1.0 / rn, &mut r);
            return Ok(r);
        }
    }
    Err(SolveError::DegenerateProbe)
}

/// `α ≥ 0` with `‖s + αu₁‖ = −λ₁/σ` for `u₁ ⊥ s`.
pub fn hard_case_alpha(s_norm: f64, lambda1: f64, sigma: f64) -> Result<f64, SolveError> {
    let radius = -lambda1 / sigma;
    if !(s_norm < radius) {
        return Err(SolveError::Domain(format!(
            "step norm {s_norm:e} is not inside the hard-case radius {radius:e}"
        )));
    }
    Ok(((radius - s_norm) * (radius + s_norm)).sqrt())
}

/// Minimizer of the cubic model along `−g`: returns `(s_c, m(s_c))`.
pub fn cauchy_point(state: &LqnState, g: &[f64], sigma: f64, f0: f64) -> Result<(Vec<f64>, f64), SolveError> {
    let gg = norm_sq(g);
    let gn = gg.sqrt();
    if gn == 0.0 {
        return Ok((vec![0.0; g.len()], f0));
    }
    let gbg = dot(g, &state.bmul(g)?);
    let ups = cauchy_multiplier(gn, gbg, sigma);
    let s: Vec<f64> = g.iter().map(|v| -ups * v).collect();
    let m = f0 - ups * gg + 0.5 * ups * ups * gbg + sigma / 3.0 * ups.powi(3) * gg * gn;
    Ok((s, m))
}

/// Positive root of `συ²‖g‖³ + υ·gᵀBg − ‖g‖² = 0`, or `‖g‖²/gᵀBg` when `σ = 0`.
pub fn cauchy_multiplier(g_norm: f64, gbg: f64, sigma: f64) -> f64 {
    let a = sigma * g_norm.powi(3);
    let b = gbg;
    let c = g_norm * g_norm;
    if a == 0.0 {
        return if b > 0.0 { c / b } else { f64::INFINITY };
    }
    let disc = (b * b + 4.0 * a * c).sqrt();
    if b >= 0.0 {
        2.0 * c / (b + disc)
    } else {
        (disc - b) / (2.0 * a)
    }
}

/// Shifted solves `(B + λI)⁻¹v` through the Woodbury identity, `O(mn)` each.
struct ShiftedSolver<'a> {
    state: &'a LqnState,
    lu: Lu,
    inv_c: f64,
}

impl<'a> ShiftedSolver<'a> {
    fn new(state: &'a LqnState, m: &SmallMatrix, t: &SmallMatrix, lam: f64) -> Result<Self, SolveError> {
        let c = state.gamma() + lam;
        let inv_c = 1.0 / c;
        let k = m.order();
        let inner = SmallMatrix::from_fn(k, |i, j| m[(i, j)] + inv_c * t[(i, j)]);
        let lu = Lu::new(&inner).map_err(|e| SolveError::Domain(e.to_string()))?;
        Ok(Self { state, lu, inv_c })
    }

    /// `(B+λI)⁻¹v = v/c − Ψ(cM + ΨᵀΨ)⁻¹Ψᵀv / c`, given `Ψᵀv`.
    fn solve_with(&self, v: &[f64], psi_t_v: &[f64]) -> Vec<f64> {
        let mut out: Vec<f64> = v.iter().map(|x| self.inv_c * x).collect();
        if !psi_t_v.is_empty() {
            let z = self.lu.solve(psi_t_v);
            let coeff: Vec<f64> = z.iter().map(|x| -self.inv_c * self.inv_c * x).collect();
            self.state.psi_mul_add(&coeff, &mut out);
        }
        out
    }
}

fn model_decrease(g: &[f64], s: &[f64], lam: f64, sigma: f64) -> f64 {
    // Uses sᵀBs = −gᵀs − λ‖s‖², valid whenever (B + λI)s = −g.
    let gs = dot(g, s);
    let ss = norm_sq(s);
    -(0.5 * gs - 0.5 * lam * ss + sigma / 3.0 * ss * ss.sqrt())
}

/// Global minimizer of `m(s) = sᵀg + ½sᵀBs + (σ/3)‖s‖³`.
pub fn solve_subproblem(
    state: &LqnState,
    g: &[f64],
    sigma: f64,
    opts: &SolverOptions,
    mode: SolveMode,
) -> Result<SubproblemSolution, SolveError> {
    if !(sigma > 0.0) {
        return Err(SolveError::Domain(format!("sigma must be positive, got {sigma:e}")));
    }
    if !crate::linalg::all_finite(g) {
        return Err(SolveError::Domain("non-finite gradient".into()));
    }
    let spec = ImplicitSpectrum::new(state, g)?.with_eps_hard(opts.eps_hard);
    solve_with_spectrum(state, &spec, g, sigma, opts, mode)
}

pub fn solve_with_spectrum(
    state: &LqnState,
    spec: &ImplicitSpectrum,
    g: &[f64],
    sigma: f64,
    opts: &SolverOptions,
    mode: SolveMode,
) -> Result<SubproblemSolution, SolveError> {
    let l1 = spec.lambda1;
    let g_norm = spec.g_norm();

    if g_norm == 0.0 && l1 >= 0.0 {
        return Ok(SubproblemSolution {
            s_star: vec![0.0; g.len()],
            lambda_star: 0.0,
            case: SolutionCase::Interior,
            newton_iters: 0,
            model_decrease: 0.0,
            lambda1: l1,
        });
    }

    if l1 < 0.0 && spec.leftmost_component() <= spec.eps_hard_abs {
        let (s2, _) = spec.norms_at(-l1)?;
        let s_norm = s2.sqrt();
        let radius = -l1 / sigma;
        if (s_norm - radius).abs() < opts.nu * radius.max(1.0) {
            let s = recover_step(state, spec, g, -l1)?;
            return Ok(finish(g, s, -l1, sigma, SolutionCase::BoundarySaddle, 0, l1));
        }
        if s_norm < radius {
            let mut s = recover_step(state, spec, g, -l1)?;
            let u1 = leftmost_eigvec_with(state, spec, &[g])?;
            // u₁ lies in the dropped eigenspace, so it is orthogonal to s up to rounding
            let proj = dot(&u1, &s);
            axpy(-proj, &u1, &mut s);
            let alpha = hard_case_alpha(norm(&s), l1, sigma)?;
            axpy(alpha, &u1, &mut s);
            return Ok(finish(g, s, -l1, sigma, SolutionCase::HardCase, 0, l1));
        }
    }

    let lower = (-l1).max(0.0);
    let start = admissible_start(spec, sigma, lower, opts.eps_shift)?;
    check_deadline(opts)?;

    match mode {
        SolveMode::NormTrick => {
            let (lam, iters) = solve_lambda(spec, sigma, opts.nu, start, opts.max_newton)?;
            let s = recover_step(state, spec, g, lam)?;
            Ok(finish(g, s, lam, sigma, SolutionCase::Interior, iters, l1))
        }
        SolveMode::NaiveLqn => {
            let m = state.middle();
            let t = state.psi_gram();
            let ubar = &spec.ubar;
            let mut last: Option<(f64, Vec<f64>)> = None;
            let (lam, iters) = newton_secular(
                |lam| {
                    let solver = ShiftedSolver::new(state, &m, &t, lam)?;
                    let mut s = solver.solve_with(g, ubar);
                    crate::linalg::scale(-1.0, &mut s);
                    let psi_t_s = state.psi_t(&s);
                    let u = solver.solve_with(&s, &psi_t_s);
                    let s2 = norm_sq(&s);
                    let w2 = dot(&s, &u);
                    last = Some((lam, s));
                    Ok((s2, w2))
                },
                sigma,
                opts.nu,
                start,
                lower,
                opts.max_newton,
            )?;
            let s = match last {
                Some((l, s)) if l == lam => s,
                _ => {
                    let solver = ShiftedSolver::new(state, &m, &t, lam)?;
                    let mut s = solver.solve_with(g, ubar);
                    crate::linalg::scale(-1.0, &mut s);
                    s
                }
            };
            Ok(finish(g, s, lam, sigma, SolutionCase::Interior, iters, l1))
        }
    }
}

fn check_deadline(opts: &SolverOptions) -> Result<(), SolveError> {
    match opts.deadline {
        Some(d) if std::time::Instant::now() > d => Err(SolveError::Timeout),
        _ => Ok(()),
    }
}

/// First Newton iterate: `max(0, −λ₁) + ε`, with `ε` shrunk until the
/// iterate lies left of the root (`‖s(λ)‖ ≥ λ/σ`).
fn admissible_start(spec: &ImplicitSpectrum, sigma: f64, lower: f64, eps_shift: f64) -> Result<f64, SolveError> {
    let mut offset = eps_shift.max(f64::MIN_POSITIVE);
    for _ in 0..MAX_START_SHRINK {
        let lam = lower + offset;
        if lam <= lower {
            break;
        }
        let (s2, _) = spec.norms_at(lam)?;
        if s2.sqrt() >= lam / sigma {
            return Ok(lam);
        }
        offset *= 0.5;
    }
    Err(SolveError::Domain(
        "no admissible starting shift left of the secular root".into(),
    ))
}

fn finish(
    g: &[f64],
    s: Vec<f64>,
    lam: f64,
    sigma: f64,
    case: SolutionCase,
    newton_iters: usize,
    lambda1: f64,
) -> SubproblemSolution {
    let model_decrease = model_decrease(g, &s, lam, sigma);
    SubproblemSolution {
        s_star: s,
        lambda_star: lam,
        case,
        newton_iters,
        model_decrease,
        lambda1,
    }
}
