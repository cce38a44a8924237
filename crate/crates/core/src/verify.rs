//! Property batteries comparing the reduced solver with independent
//! oracles. Each suite is seeded and reports pass counts.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::dense::{brute_force_min, dense_solve_subproblem, symmetric_eigen, DenseMatrix};
use crate::linalg::{axpy, cosine, norm, scale};
use crate::lqn::{LqnState, DEFAULT_EPS_CURV, DEFAULT_KAPPA};
use crate::problems::{make_subproblem_case, CaseKind};
use crate::subproblem::{cauchy_point, solve_subproblem, ImplicitSpectrum, SolutionCase, SolveMode, SolverOptions};

const MAX_REPORTED_FAILURES: usize = 5;

#[derive(Debug, Clone)]
pub struct VerifyOptions {
    pub seed: u64,
    /// Instance count for the oracle battery.
    pub instances: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            instances: 500,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PropertyResult {
    pub name: String,
    pub passed: usize,
    pub total: usize,
    pub failures: Vec<String>,
}

impl PropertyResult {
    fn new(name: &str) -> Self {
        Self {
            name: name.to_string(),
            passed: 0,
            total: 0,
            failures: Vec::new(),
        }
    }

    fn record(&mut self, ok: bool, detail: impl FnOnce() -> String) {
        self.total += 1;
        if ok {
            self.passed += 1;
        } else if self.failures.len() < MAX_REPORTED_FAILURES {
            self.failures.push(detail());
        }
    }

    pub fn ok(&self) -> bool {
        self.passed == self.total
    }
}

type Suite = fn(&VerifyOptions) -> Vec<PropertyResult>;

/// Suite names in run order.
pub const SUITES: [(&str, Suite); 7] = [
    ("oracle", oracle_suite),
    ("hardcase", hardcase_suite),
    ("newton", newton_suite),
    ("sgd-limit", sgd_limit_suite),
    ("lqn", lqn_suite),
    ("modes", modes_suite),
    ("spectrum", spectrum_suite),
];

pub fn suite_names() -> Vec<&'static str> {
    SUITES.iter().map(|(n, _)| *n).collect()
}

/// Runs the named suites (all when `only` is empty).
pub fn run_suites(only: &[String], opts: &VerifyOptions) -> Result<Vec<PropertyResult>, String> {
    for name in only {
        if !SUITES.iter().any(|(n, _)| n == name) {
            return Err(format!(
                "unknown suite `{name}`; available: {}",
                suite_names().join(", ")
            ));
        }
    }
    Ok(SUITES
        .iter()
        .filter(|(n, _)| only.is_empty() || only.iter().any(|o| o == n))
        .flat_map(|(_, suite)| suite(opts))
        .collect())
}

fn rng_for(seed: u64, salt: u64, i: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x2545_F491_4F6C_DD1D) ^ (salt << 32) ^ i as u64)
}

fn gaussian(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

/// Reduced vs dense solver on generated cases of all three kinds, with
/// KKT residuals and the Cauchy decrease condition.
pub fn oracle_suite(opts: &VerifyOptions) -> Vec<PropertyResult> {
    let mut model = PropertyResult::new("oracle/model-value");
    let mut kkt = PropertyResult::new("oracle/kkt");
    let mut cauchy = PropertyResult::new("oracle/cauchy-decrease");
    let sopts = SolverOptions::verification();
    for i in 0..opts.instances {
        let mut rng = rng_for(opts.seed, 1, i);
        let kind = CaseKind::ALL[i % 3];
        let m = rng.gen_range(1..=5);
        let n = rng.gen_range(5..=50).max(m + 1);
        let case = match make_subproblem_case(kind, n, m, rng.gen()) {
            Ok(c) => c,
            Err(e) => {
                model.record(false, || format!("#{i}: {e}"));
                continue;
            }
        };
        let (state, g, sigma) = (&case.state, &case.g, case.sigma);
        let b = DenseMatrix::from_state(state);
        let (sol, dsol) = match (
            solve_subproblem(state, g, sigma, &sopts, SolveMode::NormTrick),
            dense_solve_subproblem(&b, g, sigma, &sopts),
        ) {
            (Ok(a), Ok(d)) => (a, d),
            (a, d) => {
                let msg = format!("#{i} {kind}: reduced {:?} dense {:?}", a.err(), d.err());
                model.record(false, || msg);
                continue;
            }
        };
        let m_red = b.model_value(g, sigma, &sol.s_star, 0.0);
        let m_dense = b.model_value(g, sigma, &dsol.s_star, 0.0);
        model.record(m_red <= m_dense + 1e-8 * (1.0 + m_dense.abs()), || {
            format!("#{i} {kind} n={n} m={m}: reduced {m_red:e} dense {m_dense:e}")
        });

        let mut r = b.matvec(&sol.s_star);
        axpy(sol.lambda_star, &sol.s_star, &mut r);
        axpy(1.0, g, &mut r);
        let res = norm(&r);
        let radius = sol.lambda_star / sigma;
        let gap = (norm(&sol.s_star) - radius).abs();
        let gap_ok = sol.case == SolutionCase::HardCase || gap <= sopts.nu * radius.max(1.0);
        kkt.record(res <= 1e-6 * norm(g).max(1.0) && gap_ok, || {
            format!("#{i} {kind}: residual {res:e}, norm gap {gap:e} ({})", sol.case)
        });

        match cauchy_point(state, g, sigma, 0.0) {
            Ok((_, m_c)) => cauchy.record(m_red <= m_c + 1e-10 * m_c.abs().max(1.0), || {
                format!("#{i} {kind}: m(s*) {m_red:e} > m(s_c) {m_c:e}")
            }),
            Err(e) => cauchy.record(false, || format!("#{i}: {e}")),
        }
    }
    vec![model, kkt, cauchy]
}

/// Tiny hard cases against brute-force search, plus a larger round trip.
pub fn hardcase_suite(opts: &VerifyOptions) -> Vec<PropertyResult> {
    let mut brute = PropertyResult::new("hardcase/brute-force");
    let mut round = PropertyResult::new("hardcase/round-trip");
    let sopts = SolverOptions::verification();
    for i in 0..50 {
        let mut rng = rng_for(opts.seed, 2, i);
        let n = 2 + i % 2;
        let m = if n == 2 { 1 } else { rng.gen_range(1..=2) };
        let case = match make_subproblem_case(CaseKind::Hard, n, m, rng.gen()) {
            Ok(c) => c,
            Err(e) => {
                brute.record(false, || format!("#{i}: {e}"));
                continue;
            }
        };
        let sol = match solve_subproblem(&case.state, &case.g, case.sigma, &sopts, SolveMode::NormTrick) {
            Ok(s) => s,
            Err(e) => {
                brute.record(false, || format!("#{i}: {e}"));
                continue;
            }
        };
        let b = DenseMatrix::from_state(&case.state);
        let radius = 2.0 * sol.lambda_star / case.sigma + 1.0;
        let (_, m_bf) = brute_force_min(&b, &case.g, case.sigma, radius, 100_000, 0.0);
        let m_star = b.model_value(&case.g, case.sigma, &sol.s_star, 0.0);
        brute.record(m_star <= m_bf + 1e-4 && sol.case == SolutionCase::HardCase, || {
            format!("#{i} n={n}: m(s*) {m_star:e} brute {m_bf:e} case {}", sol.case)
        });
    }
    for i in 0..10 {
        let case = match make_subproblem_case(CaseKind::Hard, 100, 5, opts.seed.wrapping_add(i)) {
            Ok(c) => c,
            Err(e) => {
                round.record(false, || format!("#{i}: {e}"));
                continue;
            }
        };
        match solve_subproblem(&case.state, &case.g, case.sigma, &sopts, SolveMode::NormTrick) {
            Ok(sol) => {
                let gap = (norm(&sol.s_star) + sol.lambda1 / case.sigma).abs();
                round.record(
                    sol.case == SolutionCase::HardCase && gap <= 1e-8 * (-sol.lambda1 / case.sigma).max(1.0),
                    || format!("#{i}: case {} gap {gap:e}", sol.case),
                );
            }
            Err(e) => round.record(false, || format!("#{i}: {e}")),
        }
    }
    vec![brute, round]
}

/// Random states built by SR1 updates from hidden diagonal Hessians.
fn random_state(rng: &mut ChaCha8Rng) -> (LqnState, Vec<f64>) {
    let k = rng.gen_range(1..=5);
    let n = rng.gen_range(k + 2..=40);
    let h: Vec<f64> = (0..n).map(|_| rng.gen_range(-4.0..8.0)).collect();
    let mut state = LqnState::new(n, k, 1.0);
    for _ in 0..k {
        let s = gaussian(rng, n);
        let y: Vec<f64> = s.iter().zip(&h).map(|(a, b)| a * b).collect();
        state.try_update(&s, &y, DEFAULT_EPS_CURV, DEFAULT_KAPPA);
    }
    let g = gaussian(rng, n);
    (state, g)
}

/// Newton correction against `−φ₁/φ₁′` with a central difference.
pub fn newton_suite(opts: &VerifyOptions) -> Vec<PropertyResult> {
    let mut res = PropertyResult::new("newton/finite-difference");
    for i in 0..100 {
        let mut rng = rng_for(opts.seed, 3, i);
        let (state, g) = random_state(&mut rng);
        let Ok(spec) = ImplicitSpectrum::new(&state, &g) else {
            res.record(false, || format!("#{i}: spectrum failed"));
            continue;
        };
        let lam = (-spec.lambda1).max(0.0) + rng.gen_range(0.05..3.0);
        let sigma = 10f64.powf(rng.gen_range(-1.0..1.0));
        let h = 1e-6 * lam;
        let outcome = (|| {
            let dphi = (spec.phi1(lam + h, sigma)? - spec.phi1(lam - h, sigma)?) / (2.0 * h);
            let fd = -spec.phi1(lam, sigma)? / dphi;
            Ok::<_, crate::error::SolveError>((spec.newton_step(lam, sigma)?, fd))
        })();
        match outcome {
            Ok((step, fd)) => res.record((step - fd).abs() <= 1e-4 * fd.abs().max(1e-300), || {
                format!("#{i}: newton {step:e} fd {fd:e}")
            }),
            Err(e) => res.record(false, || format!("#{i}: {e}")),
        }
    }
    vec![res]
}

/// At `σ = 1e9` the step is a short multiple of `−g`.
pub fn sgd_limit_suite(opts: &VerifyOptions) -> Vec<PropertyResult> {
    let mut res = PropertyResult::new("sgd-limit/cosine");
    for i in 0..100 {
        let mut rng = rng_for(opts.seed, 4, i);
        let (state, mut g) = random_state(&mut rng);
        let gn = norm(&g);
        scale(1.0 / gn, &mut g);
        match solve_subproblem(&state, &g, 1e9, &SolverOptions::default(), SolveMode::NormTrick) {
            Ok(sol) => {
                let neg: Vec<f64> = g.iter().map(|v| -v).collect();
                let c = cosine(&sol.s_star, &neg);
                res.record(c >= 0.9999, || format!("#{i}: cosine {c}"));
            }
            Err(e) => res.record(false, || format!("#{i}: {e}")),
        }
    }
    vec![res]
}

fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let scale = a
        .iter()
        .chain(b)
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())) / scale
}

/// Random update/reset sequence. With `noise = 0` every pair comes from
/// one symmetric Hessian, so `SᵀY` is symmetric and all stored secant
/// equations hold; otherwise only the newest one does.
fn random_sequence(rng: &mut ChaCha8Rng, noise: f64) -> LqnState {
    let n = rng.gen_range(5..=40);
    let memory = rng.gen_range(1..=6);
    let h: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..6.0)).collect();
    let mut state = LqnState::new(n, memory, 1.0);
    let mut last_s: Option<Vec<f64>> = None;
    for _ in 0..rng.gen_range(1..=25) {
        let op = rng.gen_range(0..10);
        if op == 0 {
            state.reset_trim();
            continue;
        }
        let s = match (&last_s, op) {
            // occasionally a near-repeat of the previous step
            (Some(prev), 1) => prev.iter().map(|v| v * (1.0 + 1e-9)).collect(),
            _ => gaussian(rng, n),
        };
        let mut y: Vec<f64> = s.iter().zip(&h).map(|(a, b)| a * b).collect();
        if noise > 0.0 {
            let e = gaussian(rng, n);
            axpy(noise, &e, &mut y);
        }
        state.try_update(&s, &y, DEFAULT_EPS_CURV, DEFAULT_KAPPA);
        last_s = Some(s);
    }
    state
}

/// Secant equations, agreement with recursive dense SR1, and Gram caches
/// after random update/reset sequences.
pub fn lqn_suite(opts: &VerifyOptions) -> Vec<PropertyResult> {
    let mut secant = PropertyResult::new("lqn/secant");
    let mut dense = PropertyResult::new("lqn/dense-agreement");
    let mut caches = PropertyResult::new("lqn/caches");
    for i in 0..200 {
        let mut rng = rng_for(opts.seed, 5, i);
        let state = random_sequence(&mut rng, 0.0);
        let mut err_sq = 0.0;
        let mut y_sq = 0.0;
        let mut bmul_ok = true;
        for (s, y) in state.s_vectors().iter().zip(state.y_vectors()) {
            match state.bmul(s) {
                Ok(bs) => {
                    err_sq += bs.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
                    y_sq += y.iter().map(|v| v * v).sum::<f64>();
                }
                Err(_) => bmul_ok = false,
            }
        }
        let (e, yf) = (err_sq.sqrt(), y_sq.sqrt());
        secant.record(bmul_ok && e <= 1e-8 * yf.max(1.0), || format!("#{i}: ‖BS − Y‖ = {e:e}"));
        record_caches(&mut caches, &state, i);

        let noisy = random_sequence(&mut rng, 0.1);
        let b = DenseMatrix::from_state(&noisy);
        let v = gaussian(&mut rng, noisy.dim());
        match noisy.bmul(&v) {
            Ok(bv) => {
                let d = rel_diff(&bv, &b.matvec(&v));
                dense.record(d <= 1e-8, || format!("#{i}: compact vs dense {d:e}"));
            }
            Err(e) => dense.record(false, || format!("#{i}: {e}")),
        }
        record_caches(&mut caches, &noisy, i);
    }
    vec![secant, dense, caches]
}

fn record_caches(res: &mut PropertyResult, state: &LqnState, i: usize) {
    let (sts, sty, yty) = state.recompute_caches();
    let worst = rel_diff(sts.as_slice(), state.sts().as_slice())
        .max(rel_diff(sty.as_slice(), state.sty().as_slice()))
        .max(rel_diff(yty.as_slice(), state.yty().as_slice()));
    res.record(worst <= 1e-12, || format!("#{i}: cache drift {worst:e}"));
}

/// Norm-trick and naive modes agree on `λ*` and `s*`.
pub fn modes_suite(opts: &VerifyOptions) -> Vec<PropertyResult> {
    let mut res = PropertyResult::new("modes/equivalence");
    let sopts = SolverOptions::verification();
    for i in 0..100 {
        let mut rng = rng_for(opts.seed, 6, i);
        let kind = CaseKind::ALL[i % 3];
        let case = match make_subproblem_case(kind, rng.gen_range(20..=200), rng.gen_range(1..=5), rng.gen()) {
            Ok(c) => c,
            Err(e) => {
                res.record(false, || format!("#{i}: {e}"));
                continue;
            }
        };
        let a = solve_subproblem(&case.state, &case.g, case.sigma, &sopts, SolveMode::NormTrick);
        let b = solve_subproblem(&case.state, &case.g, case.sigma, &sopts, SolveMode::NaiveLqn);
        match (a, b) {
            (Ok(a), Ok(b)) => {
                let dl = (a.lambda_star - b.lambda_star).abs() / a.lambda_star.abs().max(f64::MIN_POSITIVE);
                let diff: Vec<f64> = a.s_star.iter().zip(&b.s_star).map(|(x, y)| x - y).collect();
                let ds = norm(&diff) / norm(&a.s_star).max(f64::MIN_POSITIVE);
                res.record(dl <= 1e-8 && ds <= 1e-8, || format!("#{i} {kind}: dλ {dl:e} ds {ds:e}"));
            }
            (a, b) => res.record(false, || format!("#{i}: {:?} / {:?}", a.err(), b.err())),
        }
    }
    vec![res]
}

/// Implicit spectrum against a dense eigendecomposition.
pub fn spectrum_suite(opts: &VerifyOptions) -> Vec<PropertyResult> {
    let mut res = PropertyResult::new("spectrum/dense-eigenvalues");
    for i in 0..50 {
        let mut rng = rng_for(opts.seed, 7, i);
        let (state, g) = random_state(&mut rng);
        let (Ok(spec), Ok(eig)) = (
            ImplicitSpectrum::new(&state, &g),
            symmetric_eigen(&DenseMatrix::from_state(&state), None),
        ) else {
            res.record(false, || format!("#{i}: decomposition failed"));
            continue;
        };
        let mut implied = vec![spec.gamma; spec.cluster_dim];
        implied.extend_from_slice(&spec.lam_hat);
        implied.sort_by(f64::total_cmp);
        let worst = implied
            .iter()
            .zip(&eig.values)
            .map(|(a, b)| (a - b).abs() / b.abs().max(1.0))
            .fold(0.0f64, f64::max);
        res.record(worst <= 1e-8, || format!("#{i}: eigenvalue mismatch {worst:e}"));
    }
    vec![res]
}
