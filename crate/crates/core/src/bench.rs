//! Subproblem timing harness: one row per (method, kind, n) with the
//! median (or mean) over repeated solves of a single generated case.

use std::io::Write;
use std::time::{Duration, Instant};

use serde::Serialize;

use crate::error::{ArcError, SolveError};
use crate::linalg::{axpy, norm};
use crate::lqn::LqnState;
use crate::problems::{make_subproblem_case_with_sigma, CaseKind, SubproblemCase};
use crate::registry;
use crate::subproblem::{solve_lambda, ImplicitSpectrum, SolutionCase, SolverOptions, SubproblemSolution};

pub const HEADER: &str = "method,kind,n,m,median_seconds,newton_iters,verified";
/// Beyond this dimension the dense method is not attempted.
pub const DENSE_MAX_N: usize = 2000;

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub dims: Vec<usize>,
    pub kinds: Vec<CaseKind>,
    pub methods: Vec<String>,
    pub memory: usize,
    pub sigma: f64,
    pub repeats: usize,
    pub timeout: Duration,
    pub seed: u64,
    pub mean: bool,
    pub dense_max_n: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            dims: vec![100, 1_000, 10_000, 100_000, 1_000_000],
            kinds: CaseKind::ALL.to_vec(),
            methods: vec!["dense".into(), "naive".into(), "normtrick".into()],
            memory: 5,
            sigma: 1.0,
            repeats: 10,
            timeout: Duration::from_secs(300),
            seed: 0,
            mean: false,
            dense_max_n: DENSE_MAX_N,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub method: String,
    pub kind: CaseKind,
    pub n: usize,
    pub m: usize,
    /// `None` when skipped or timed out.
    pub seconds: Option<f64>,
    pub newton_iters: Option<usize>,
    pub verified: Option<bool>,
}

impl BenchRow {
    pub fn csv_record(&self) -> [String; 7] {
        let dash = || "-".to_string();
        [
            self.method.clone(),
            self.kind.to_string(),
            self.n.to_string(),
            self.m.to_string(),
            self.seconds.map(|s| format!("{s:.2e}")).unwrap_or_else(dash),
            self.newton_iters.map(|k| k.to_string()).unwrap_or_else(dash),
            self.verified.map(|v| v.to_string()).unwrap_or_else(dash),
        ]
    }
}

/// KKT check of a returned solution against the compact `B`.
pub fn kkt_ok(state: &LqnState, g: &[f64], sigma: f64, sol: &SubproblemSolution, nu: f64) -> bool {
    let Ok(mut r) = state.bmul(&sol.s_star) else {
        return false;
    };
    axpy(sol.lambda_star, &sol.s_star, &mut r);
    axpy(1.0, g, &mut r);
    if norm(&r) > 1e-6 * norm(g).max(1.0) {
        return false;
    }
    if sol.lambda_star < (-sol.lambda1).max(0.0) - 1e-12 {
        return false;
    }
    let radius = sol.lambda_star / sigma;
    let gap = (norm(&sol.s_star) - radius).abs();
    match sol.case {
        SolutionCase::HardCase => gap <= 1e-8 * radius.max(1.0),
        _ => gap <= nu * radius.max(1.0),
    }
}

fn aggregate(mut times: Vec<f64>, mean: bool) -> f64 {
    if mean {
        return times.iter().sum::<f64>() / times.len() as f64;
    }
    times.sort_by(f64::total_cmp);
    let k = times.len();
    if k % 2 == 1 {
        times[k / 2]
    } else {
        0.5 * (times[k / 2 - 1] + times[k / 2])
    }
}

/// Times one method on one case. Returns `Ok(None)` on timeout.
pub fn time_method(
    method: &str,
    case: &SubproblemCase,
    repeats: usize,
    timeout: Duration,
    mean: bool,
) -> Result<Option<(f64, usize, bool)>, ArcError> {
    let solver = registry::solvers().create(method, &())?;
    let mut times = Vec::with_capacity(repeats);
    let mut iters = 0;
    let mut verified = true;
    for rep in 0..repeats.max(1) {
        let opts = SolverOptions::verification().with_deadline(Instant::now() + timeout);
        let start = Instant::now();
        let result = solver.solve(&case.state, &case.g, case.sigma, &opts);
        let elapsed = start.elapsed().as_secs_f64();
        match result {
            Ok(sol) => {
                if rep == 0 {
                    iters = sol.newton_iters;
                    verified = kkt_ok(&case.state, &case.g, case.sigma, &sol, opts.nu);
                }
                if elapsed > timeout.as_secs_f64() {
                    return Ok(None);
                }
                times.push(elapsed);
            }
            Err(SolveError::Timeout) => return Ok(None),
            Err(_) => {
                verified = false;
                times.push(elapsed);
            }
        }
    }
    Ok(Some((aggregate(times, mean), iters, verified)))
}

/// Runs the full grid, calling `on_row` as each row completes.
pub fn run_bench(cfg: &BenchConfig, mut on_row: impl FnMut(&BenchRow)) -> Result<Vec<BenchRow>, ArcError> {
    let solvers = registry::solvers();
    for m in &cfg.methods {
        solvers.create(m, &())?;
    }
    let mut rows = Vec::new();
    for &kind in &cfg.kinds {
        for &n in &cfg.dims {
            let case = make_subproblem_case_with_sigma(kind, n, cfg.memory, cfg.sigma, cfg.seed)
                .map_err(|e| ArcError::Config(e.to_string()))?;
            for method in &cfg.methods {
                let mut row = BenchRow {
                    method: method.clone(),
                    kind,
                    n,
                    m: cfg.memory,
                    seconds: None,
                    newton_iters: None,
                    verified: None,
                };
                let skip = method == "dense" && n > cfg.dense_max_n;
                if !skip {
                    if let Some((t, it, ok)) = time_method(method, &case, cfg.repeats, cfg.timeout, cfg.mean)? {
                        row.seconds = Some(t);
                        row.newton_iters = Some(it);
                        row.verified = Some(ok);
                    }
                }
                on_row(&row);
                rows.push(row);
            }
        }
    }
    Ok(rows)
}

pub fn csv_writer<W: Write>(out: W) -> csv::Result<csv::Writer<W>> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HEADER.split(','))?;
    Ok(w)
}

/// Seconds per Newton iteration of the norm-trick solver on `case`,
/// measured on a prebuilt spectrum (median over `repeats`).
pub fn newton_iteration_seconds(case: &SubproblemCase, repeats: usize) -> Result<(f64, usize), SolveError> {
    let spec = ImplicitSpectrum::new(&case.state, &case.g)?;
    let lower = (-spec.lambda1).max(0.0);
    let opts = SolverOptions::verification();
    let start = lower + opts.eps_shift;
    let (_, iters) = solve_lambda(&spec, case.sigma, opts.nu, start, opts.max_newton)?;
    let iters = iters.max(1);
    // batch enough solves per sample to rise above timer resolution
    let inner = 1000;
    let mut times = Vec::with_capacity(repeats);
    for _ in 0..repeats.max(1) {
        let t = Instant::now();
        for _ in 0..inner {
            std::hint::black_box(solve_lambda(
                std::hint::black_box(&spec),
                case.sigma,
                opts.nu,
                start,
                opts.max_newton,
            )?);
        }
        times.push(t.elapsed().as_secs_f64() / (inner * iters) as f64);
    }
    Ok((aggregate(times, false), iters))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_and_mean() {
        assert_eq!(aggregate(vec![3.0, 1.0, 2.0], false), 2.0);
        assert_eq!(aggregate(vec![4.0, 1.0, 2.0, 3.0], false), 2.5);
        assert_eq!(aggregate(vec![1.0, 2.0, 6.0], true), 3.0);
    }

    #[test]
    fn row_formatting() {
        let row = BenchRow {
            method: "normtrick".into(),
            kind: CaseKind::Indefinite,
            n: 1000,
            m: 5,
            seconds: Some(0.019),
            newton_iters: Some(4),
            verified: Some(true),
        };
        assert_eq!(row.csv_record().join(","), "normtrick,indefinite,1000,5,1.90e-2,4,true");
        let dash = BenchRow {
            seconds: None,
            newton_iters: None,
            verified: None,
            ..row
        };
        assert_eq!(dash.csv_record().join(","), "normtrick,indefinite,1000,5,-,-,-");
    }

    #[test]
    fn small_grid_is_verified() {
        let cfg = BenchConfig {
            dims: vec![50],
            repeats: 2,
            ..BenchConfig::default()
        };
        let rows = run_bench(&cfg, |_| {}).unwrap();
        assert_eq!(rows.len(), 9);
        assert!(rows.iter().all(|r| r.verified == Some(true)), "{rows:?}");
    }

    #[test]
    fn dense_skipped_above_limit() {
        let cfg = BenchConfig {
            dims: vec![60],
            kinds: vec![CaseKind::PositiveDefinite],
            methods: vec!["dense".into()],
            repeats: 1,
            dense_max_n: 50,
            ..BenchConfig::default()
        };
        let rows = run_bench(&cfg, |_| {}).unwrap();
        assert_eq!(rows[0].seconds, None);
    }

    #[test]
    fn unknown_method_rejected() {
        let cfg = BenchConfig {
            methods: vec!["bogus".into()],
            ..BenchConfig::default()
        };
        assert!(matches!(run_bench(&cfg, |_| {}), Err(ArcError::Unknown { .. })));
    }
}
