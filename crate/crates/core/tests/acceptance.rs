//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion
//! and exits non-zero if any fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use arclqn::arc::{run, ArcConfig, Branch, Budget, FallbackConfig, MinibatchSampler};
use arclqn::bench::{newton_iteration_seconds, time_method};
use arclqn::dense::{dense_solve_subproblem, DenseMatrix};
use arclqn::linalg::{axpy, norm, norm_inf};
use arclqn::problems::{make_subproblem_case, CaseKind, LogisticSynth, Problem, Rosenbrock};
use arclqn::subproblem::{cauchy_point, solve_subproblem, SolutionCase, SolveMode, SolverOptions};
use arclqn::verify::{self, PropertyResult, VerifyOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 20_240_601;

struct Outcome {
    pass: bool,
    detail: String,
}

fn from_results(results: &[PropertyResult]) -> Outcome {
    let detail = results
        .iter()
        .map(|r| {
            let mut s = format!("{} {}/{}", r.name, r.passed, r.total);
            if let Some(f) = r.failures.first() {
                s.push_str(&format!(" [{f}]"));
            }
            s
        })
        .collect::<Vec<_>>()
        .join("; ");
    Outcome {
        pass: results.iter().all(|r| r.ok() && r.total > 0),
        detail,
    }
}

/// Criteria 1 and 10 share one battery of instances.
fn oracle_battery() -> (Outcome, Outcome) {
    let opts = SolverOptions::verification();
    let (mut model_ok, mut kkt_ok, mut cauchy_ok, mut total) = (0, 0, 0, 0);
    let mut absolute_gap_misses = 0;
    let mut first_failure = None;
    for i in 0..500usize {
        let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ ((i as u64) << 8));
        let kind = CaseKind::ALL[i % 3];
        let m = rng.gen_range(1..=5);
        let n = rng.gen_range(5..=50usize).max(m + 1);
        total += 1;
        let case = make_subproblem_case(kind, n, m, rng.gen()).expect("case generation");
        let (g, sigma) = (&case.g, case.sigma);
        let b = DenseMatrix::from_state(&case.state);
        let sol = solve_subproblem(&case.state, g, sigma, &opts, SolveMode::NormTrick);
        let dense = dense_solve_subproblem(&b, g, sigma, &opts);
        let (Ok(sol), Ok(dense)) = (sol, dense) else {
            first_failure.get_or_insert(format!("#{i}: solver error"));
            continue;
        };

        let m_red = b.model_value(g, sigma, &sol.s_star, 0.0);
        let m_dense = b.model_value(g, sigma, &dense.s_star, 0.0);
        if m_red <= m_dense + 1e-8 * (1.0 + m_dense.abs()) {
            model_ok += 1;
        } else {
            first_failure.get_or_insert(format!("#{i}: m {m_red:e} vs dense {m_dense:e}"));
        }

        let mut r = b.matvec(&sol.s_star);
        axpy(sol.lambda_star, &sol.s_star, &mut r);
        axpy(1.0, g, &mut r);
        let radius = sol.lambda_star / sigma;
        let gap = (norm(&sol.s_star) - radius).abs();
        let hard = sol.case == SolutionCase::HardCase;
        if !hard && gap > opts.nu {
            absolute_gap_misses += 1;
        }
        if norm(&r) <= 1e-6 * norm(g).max(1.0) && (hard || gap <= opts.nu * radius.max(1.0)) {
            kkt_ok += 1;
        } else {
            first_failure.get_or_insert(format!("#{i}: residual {:e} gap {gap:e}", norm(&r)));
        }

        let (_, m_c) = cauchy_point(&case.state, g, sigma, 0.0).expect("cauchy point");
        if m_red <= m_c + 1e-10 * m_c.abs().max(1.0) {
            cauchy_ok += 1;
        }
    }
    let c1 = Outcome {
        pass: model_ok == total && kkt_ok == total,
        detail: format!(
            "model {model_ok}/{total}, kkt {kkt_ok}/{total} (norm gap <= nu*max(1, lambda/sigma), nu = {:e}; \
             {absolute_gap_misses} non-hard instances exceed the unscaled gap nu){}",
            opts.nu,
            first_failure.map(|f| format!(" first failure {f}")).unwrap_or_default()
        ),
    };
    let c10 = Outcome {
        pass: cauchy_ok == total,
        detail: format!("m(s*) <= m(s_c) on {cauchy_ok}/{total}"),
    };
    (c1, c10)
}

fn hard_case_optimality() -> Outcome {
    let res = verify::hardcase_suite(&VerifyOptions {
        seed: SEED,
        ..VerifyOptions::default()
    });
    from_results(&res[..1])
}

fn norm_trick_speedup() -> Outcome {
    let big = make_subproblem_case(CaseKind::Indefinite, 1_000_000, 5, SEED).expect("case");
    let timeout = Duration::from_secs(60);
    let naive = time_method("naive", &big, 5, timeout, false).expect("naive");
    let fast = time_method("normtrick", &big, 5, timeout, false).expect("normtrick");
    let small = make_subproblem_case(CaseKind::Indefinite, 10_000, 5, SEED).expect("case");
    let per_big = newton_iteration_seconds(&big, 7);
    let per_small = newton_iteration_seconds(&small, 7);
    match (naive, fast, per_big, per_small) {
        (Some((tn, itn, okn)), Some((tf, itf, okf)), Ok((pb, _)), Ok((ps, _))) => {
            let speedup = tn / tf;
            let growth = pb / ps;
            Outcome {
                pass: okn && okf && speedup >= 5.0 && growth <= 2.0,
                detail: format!(
                    "n=1e6: naive {tn:.2e} s ({itn} it), normtrick {tf:.2e} s ({itf} it), speedup {speedup:.1}x; \
                     per-iteration {pb:.2e} s at 1e6 vs {ps:.2e} s at 1e4 (ratio {growth:.2})"
                ),
            }
        }
        other => Outcome {
            pass: false,
            detail: format!("timing failed: {other:?}"),
        },
    }
}

fn dense_infeasibility() -> Outcome {
    let case = make_subproblem_case(CaseKind::Indefinite, 10_000, 5, SEED).expect("case");
    let limit = Duration::from_secs(60);
    let fast = time_method("normtrick", &case, 10, limit, false).expect("normtrick");
    let dense = time_method("dense", &case, 1, limit, false).expect("dense");
    let Some((tf, _, okf)) = fast else {
        return Outcome {
            pass: false,
            detail: "normtrick timed out".into(),
        };
    };
    // a timeout means the dense time is at least the limit
    let (td, note) = match dense {
        Some((t, _, _)) => (t, String::new()),
        None => (
            limit.as_secs_f64(),
            format!(" (timed out; lower bound {}s)", limit.as_secs()),
        ),
    };
    let ratio = td / tf;
    Outcome {
        pass: okf && ratio >= 100.0,
        detail: format!("n=1e4: dense >= {td:.2e} s{note}, normtrick {tf:.2e} s, ratio >= {ratio:.2e}"),
    }
}

fn outer_loop_convergence() -> Outcome {
    let p = Rosenbrock::new(100);
    let budget = Budget {
        gtol_inf: Some(1e-5),
        ..Budget::iterations(5000)
    };
    let out = run(&p.initial_point(), &ArcConfig::deterministic(), &p, &budget, 1).expect("run");
    let (_, g) = p.eval_full(&out.x);
    let ginf = norm_inf(&g);
    let accepted: Vec<_> = out
        .trace
        .steps
        .iter()
        .filter(|s| s.branch == Branch::Accepted)
        .collect();
    let each_decreases = accepted.iter().all(|s| s.f_after < s.f_before);
    let sequence_decreases = accepted.windows(2).all(|w| w[1].f_after < w[0].f_after);

    let lr = 1e-4;
    let cfg = ArcConfig {
        eta1: 1e30,
        eta2: 1e30,
        alpha2: lr,
        fallback: FallbackConfig::Sgd,
        ..ArcConfig::deterministic()
    };
    let forced = run(&p.initial_point(), &cfg, &p, &Budget::iterations(300), 1).expect("run");
    let mut x = p.initial_point();
    for _ in 0..300 {
        let (_, g) = p.eval_full(&x);
        axpy(-lr, &g, &mut x);
    }
    let sgd_exact = forced.x == x && forced.trace.count(Branch::Fallback) == 300;

    Outcome {
        pass: ginf <= 1e-5 && out.trace.steps.len() <= 5000 && each_decreases && sequence_decreases && sgd_exact,
        detail: format!(
            "Rosenbrock n=100: |g|inf {ginf:.2e} after {} iterations ({} accepted); f strictly decreasing on \
             accepted steps: {}; forced rejection == SGD for 300 steps: {sgd_exact}",
            out.trace.steps.len(),
            accepted.len(),
            each_decreases && sequence_decreases
        ),
    }
}

fn stochastic_run() -> Outcome {
    let p = LogisticSynth::new(200, 5000, SEED);
    let batch = 128;
    let per_epoch = MinibatchSampler::new(p.n_samples(), batch, SEED).iters_per_epoch();
    let cfg = ArcConfig {
        full_eval_every: per_epoch,
        ..ArcConfig::default()
    };
    let budget = Budget {
        batch_size: Some(batch),
        ..Budget::iterations(50 * per_epoch)
    };
    let runs: Vec<_> = (0..2)
        .map(|_| run(&p.initial_point(), &cfg, &p, &budget, SEED).expect("run"))
        .collect();
    let csv = |o: &arclqn::arc::RunOutcome| {
        let mut buf = Vec::new();
        o.trace.write_csv(&mut buf, false).expect("csv");
        buf
    };
    let deterministic = runs[0].x == runs[1].x && csv(&runs[0]) == csv(&runs[1]);
    let (_, g) = p.eval_full(&runs[0].x);
    let gn = norm(&g);
    Outcome {
        pass: gn <= 1e-2 && deterministic && runs[0].error.is_none(),
        detail: format!(
            "logistic 200x5000, batch 128, 50 epochs: full |g| {gn:.2e} ({} accepted, {} fallback); repeat identical: {deterministic}",
            runs[0].trace.count(Branch::Accepted),
            runs[0].trace.count(Branch::Fallback)
        ),
    }
}

fn main() -> ExitCode {
    let opts = VerifyOptions {
        seed: SEED,
        ..VerifyOptions::default()
    };
    let mut battery: Option<(Outcome, Outcome, Duration)> = None;
    let oracle = || {
        let t = Instant::now();
        let (a, b) = oracle_battery();
        (a, b, t.elapsed())
    };

    let mut all_pass = true;
    let mut report = |id: u32, name: &str, limit: Duration, f: &mut dyn FnMut() -> (Outcome, Duration)| {
        let (o, elapsed) = f();
        let in_time = elapsed <= limit;
        let pass = o.pass && in_time;
        all_pass &= pass;
        println!(
            "[{}] criterion {id:>2} {name}: {} ({:.2} s, limit {} s)",
            if pass { "PASS" } else { "FAIL" },
            o.detail,
            elapsed.as_secs_f64(),
            limit.as_secs()
        );
    };
    let timed = |f: fn() -> Outcome| {
        move || {
            let t = Instant::now();
            let o = f();
            (o, t.elapsed())
        }
    };
    let suite = |f: fn(&VerifyOptions) -> Vec<PropertyResult>, opts: VerifyOptions| {
        move || {
            let t = Instant::now();
            let o = from_results(&f(&opts));
            (o, t.elapsed())
        }
    };

    report(1, "oracle equivalence", Duration::from_secs(60), &mut || {
        let (a, b, t) = oracle();
        let out = (
            Outcome {
                pass: a.pass,
                detail: a.detail.clone(),
            },
            t,
        );
        battery = Some((a, b, t));
        out
    });
    report(
        2,
        "hard-case optimality",
        Duration::from_secs(60),
        &mut timed(hard_case_optimality),
    );
    report(
        3,
        "norm-trick speedup",
        Duration::from_secs(300),
        &mut timed(norm_trick_speedup),
    );
    report(
        4,
        "dense baseline gap",
        Duration::from_secs(300),
        &mut timed(dense_infeasibility),
    );
    report(
        5,
        "newton fidelity",
        Duration::from_secs(1),
        &mut suite(verify::newton_suite, opts.clone()),
    );
    report(
        6,
        "sgd limit",
        Duration::from_secs(10),
        &mut suite(verify::sgd_limit_suite, opts.clone()),
    );
    report(
        7,
        "secant and caches",
        Duration::from_secs(10),
        &mut suite(verify::lqn_suite, opts.clone()),
    );
    report(
        8,
        "outer-loop convergence",
        Duration::from_secs(60),
        &mut timed(outer_loop_convergence),
    );
    report(
        9,
        "stochastic run",
        Duration::from_secs(120),
        &mut timed(stochastic_run),
    );
    report(10, "cauchy decrease", Duration::from_secs(60), &mut || {
        let (_, b, t) = battery.take().expect("battery ran");
        (b, t)
    });

    if all_pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
