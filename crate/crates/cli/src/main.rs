use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{Context, Result};
use arclqn::arc::{run, ArcConfig, Branch, Budget, MinibatchSampler, StopReason};
use arclqn::bench::{csv_writer, run_bench, BenchConfig, DENSE_MAX_N};
use arclqn::linalg::{norm, norm_inf};
use arclqn::problems::CaseKind;
use arclqn::registry::{self, ProblemParams};
use arclqn::verify::{run_suites, VerifyOptions};
use clap::error::ErrorKind;
use clap::{CommandFactory, Parser, Subcommand};
use serde_json::json;

const SEED_ENV: &str = "ARCLQN_SEED";

#[derive(Parser)]
#[command(name = "arclqn", version, about = "Cubic-regularized limited-memory SR1 optimizer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Time subproblem solvers on generated cases and print CSV.
    BenchSubproblem(BenchArgs),
    /// Run the optimizer on a named problem.
    Train(TrainArgs),
    /// Run the property suites against independent oracles.
    Verify(VerifyArgs),
}

#[derive(clap::Args)]
struct BenchArgs {
    #[arg(long, value_delimiter = ',', default_values_t = [100usize, 1_000, 10_000, 100_000, 1_000_000])]
    dims: Vec<usize>,
    /// Case kinds: hard, indefinite, pd.
    #[arg(long, value_delimiter = ',', default_values = ["hard", "indefinite", "pd"])]
    kinds: Vec<CaseKind>,
    #[arg(long, value_delimiter = ',', default_values = ["dense", "naive", "normtrick"])]
    methods: Vec<String>,
    /// Stored pairs per case.
    #[arg(long, default_value_t = 5)]
    m: usize,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long, default_value_t = 10)]
    repeats: usize,
    /// Per-solve limit in seconds; slower methods report "-".
    #[arg(long, default_value_t = 300.0)]
    timeout: f64,
    #[arg(long, default_value_t = DENSE_MAX_N)]
    dense_max_n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Report the mean instead of the median.
    #[arg(long)]
    mean: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args)]
struct TrainArgs {
    #[arg(long)]
    problem: String,
    #[arg(long, default_value_t = 100)]
    n: usize,
    /// Condition number of the quadratic problem.
    #[arg(long, default_value_t = 1e3)]
    condition: f64,
    #[arg(long, default_value_t = 200)]
    n_features: usize,
    #[arg(long = "N", default_value_t = 5000)]
    n_samples: usize,
    /// Minibatch size; full batch when omitted.
    #[arg(long)]
    batch: Option<usize>,
    /// Epochs over the data (overrides --iters).
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long, default_value_t = 5000)]
    iters: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// JSON file with optimizer settings.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Per-step CSV output.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Summary JSON output (stdout when omitted).
    #[arg(long)]
    summary: Option<PathBuf>,
    /// Include per-step wall time in the trace.
    #[arg(long)]
    record_time: bool,
    /// Stop once the full gradient's infinity norm drops to this value.
    /// Defaults to 1e-5 for full-batch runs; 0 disables.
    #[arg(long)]
    gtol: Option<f64>,
    #[arg(long)]
    max_seconds: Option<f64>,
}

#[derive(clap::Args)]
struct VerifyArgs {
    /// Comma-separated suite names.
    #[arg(long, value_delimiter = ',')]
    only: Vec<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Oracle comparisons to run.
    #[arg(long, default_value_t = 500)]
    instances: usize,
    /// Print the report as JSON.
    #[arg(long)]
    json: bool,
}

/// Reports a usage error and exits with status 2.
fn usage_error(msg: impl std::fmt::Display) -> ! {
    Cli::command().error(ErrorKind::InvalidValue, msg).exit()
}

fn resolve_seed(flag: u64) -> u64 {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .unwrap_or_else(|_| usage_error(format!("{SEED_ENV} must be an unsigned integer, got `{v}`"))),
        Err(_) => flag,
    }
}

fn open_out(path: Option<&PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn bench(args: BenchArgs) -> Result<ExitCode> {
    let solvers = registry::solvers();
    for m in &args.methods {
        if let Err(e) = solvers.create(m, &()) {
            usage_error(e);
        }
    }
    if args.timeout.is_nan() || args.timeout <= 0.0 {
        usage_error("--timeout must be positive");
    }
    let cfg = BenchConfig {
        dims: args.dims,
        kinds: args.kinds,
        methods: args.methods,
        memory: args.m,
        sigma: args.sigma,
        repeats: args.repeats,
        timeout: Duration::from_secs_f64(args.timeout),
        seed: resolve_seed(args.seed),
        mean: args.mean,
        dense_max_n: args.dense_max_n,
    };
    let mut w = csv_writer(open_out(args.out.as_ref())?)?;
    let mut write_err = None;
    let rows = run_bench(&cfg, |row| {
        let res = w
            .write_record(row.csv_record())
            .and_then(|_| w.flush().map_err(Into::into));
        if let Err(e) = res {
            write_err.get_or_insert(e);
        }
    });
    let rows = match rows {
        Ok(r) => r,
        Err(e @ arclqn::ArcError::Config(_)) => usage_error(e),
        Err(e) => return Err(e.into()),
    };
    if let Some(e) = write_err {
        return Err(e.into());
    }
    let unverified = rows.iter().filter(|r| r.verified == Some(false)).count();
    if unverified > 0 {
        eprintln!("{unverified} row(s) failed the KKT check");
        return Ok(ExitCode::FAILURE);
    }
    Ok(ExitCode::SUCCESS)
}

fn train(args: TrainArgs) -> Result<ExitCode> {
    let seed = resolve_seed(args.seed);
    let params = ProblemParams {
        n: args.n,
        condition: args.condition,
        n_features: args.n_features,
        n_samples: args.n_samples,
        seed,
    };
    let problem = registry::problems()
        .create(&args.problem, &params)
        .unwrap_or_else(|e| usage_error(e));
    let stochastic = problem.n_samples() > 1;

    let mut cfg = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            ArcConfig::from_json(&text).unwrap_or_else(|e| usage_error(e))
        }
        None if stochastic => ArcConfig::default(),
        None => ArcConfig::deterministic(),
    };

    let sampler = MinibatchSampler::new(problem.n_samples(), args.batch.unwrap_or(problem.n_samples()), seed);
    let full_batch = sampler.is_full_batch();
    if cfg.full_eval_every == 0 && !full_batch {
        cfg.full_eval_every = sampler.iters_per_epoch();
    }
    cfg.validate().unwrap_or_else(|e| usage_error(e));

    let max_iters = match args.epochs {
        Some(e) => e * sampler.iters_per_epoch(),
        None => args.iters,
    };
    let gtol = match args.gtol {
        Some(t) if t > 0.0 => Some(t),
        Some(_) => None,
        None if full_batch => Some(1e-5),
        None => None,
    };
    let budget = Budget {
        max_iters,
        max_seconds: args.max_seconds,
        gtol_inf: gtol,
        batch_size: args.batch,
    };

    let x0 = problem.initial_point();
    let outcome = run(&x0, &cfg, problem.as_ref(), &budget, seed)?;
    if let Some(path) = &args.trace {
        outcome.trace.write_csv(open_out(Some(path))?, args.record_time)?;
    }

    let (f, g) = problem.eval_full(&outcome.x);
    let summary = json!({
        "problem": args.problem,
        "dim": problem.dim(),
        "seed": seed,
        "iterations": outcome.trace.steps.len(),
        "stop": outcome.stop,
        "final_f": f,
        "grad_norm": norm(&g),
        "grad_norm_inf": norm_inf(&g),
        "accepted": outcome.trace.count(Branch::Accepted),
        "fallback": outcome.trace.count(Branch::Fallback),
        "wall_time_seconds": outcome.wall_time.as_secs_f64(),
        "error": outcome.error.as_ref().map(|e| e.to_string()),
    });
    let mut out = open_out(args.summary.as_ref())?;
    writeln!(out, "{}", serde_json::to_string_pretty(&summary)?)?;
    out.flush()?;
    Ok(if outcome.stop == StopReason::NonFinite {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    })
}

fn verify(args: VerifyArgs) -> Result<ExitCode> {
    let opts = VerifyOptions {
        seed: resolve_seed(args.seed),
        instances: args.instances,
    };
    let results = run_suites(&args.only, &opts).unwrap_or_else(|e| usage_error(e));
    let all_ok = results.iter().all(|r| r.ok());
    let mut out = io::stdout().lock();
    if args.json {
        writeln!(out, "{}", serde_json::to_string_pretty(&results)?)?;
    } else {
        for r in &results {
            let tag = if r.ok() { "PASS" } else { "FAIL" };
            writeln!(out, "{tag} {:<28} {}/{}", r.name, r.passed, r.total)?;
            for f in &r.failures {
                writeln!(out, "     {f}")?;
            }
        }
    }
    Ok(if all_ok { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::BenchSubproblem(a) => bench(a),
        Command::Train(a) => train(a),
        Command::Verify(a) => verify(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
