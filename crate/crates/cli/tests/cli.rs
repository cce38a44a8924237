use std::path::Path;
use std::process::{Command, Output};

fn arclqn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_arclqn"))
        .args(args)
        .env_remove("ARCLQN_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn bench_small_grid_rows_are_verified() {
    let out = arclqn(&[
        "bench-subproblem",
        "--dims",
        "100,1000",
        "--kinds",
        "pd",
        "--methods",
        "dense,naive,normtrick",
        "--seed",
        "7",
        "--repeats",
        "2",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "method,kind,n,m,median_seconds,newton_iters,verified");
    assert_eq!(lines.len(), 7);
    for row in &lines[1..] {
        let cols: Vec<&str> = row.split(',').collect();
        assert_eq!(cols[6], "true", "{row}");
        assert!(cols[4].contains('e'), "scientific notation expected: {row}");
    }
}

#[test]
fn bench_dense_above_limit_reports_dash() {
    let out = arclqn(&[
        "bench-subproblem",
        "--dims",
        "300",
        "--kinds",
        "hard",
        "--methods",
        "dense",
        "--dense-max-n",
        "200",
        "--repeats",
        "1",
    ]);
    assert!(out.status.success());
    assert_eq!(stdout(&out).lines().nth(1), Some("dense,hard,300,5,-,-,-"));
}

#[test]
fn bench_writes_to_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bench.csv");
    let out = arclqn(&[
        "bench-subproblem",
        "--dims",
        "50",
        "--methods",
        "normtrick",
        "--repeats",
        "1",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert_eq!(std::fs::read_to_string(&path).unwrap().lines().count(), 4);
}

#[test]
fn invalid_flags_exit_with_two() {
    for args in [
        &["bench-subproblem", "--methods", "lanczos"][..],
        &["bench-subproblem", "--kinds", "weird"],
        &["bench-subproblem", "--dims", "ten"],
        &["train", "--problem", "himmelblau"],
        &["verify", "--only", "nope"],
        &["frobnicate"],
    ] {
        let out = arclqn(args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(String::from_utf8_lossy(&out.stderr).contains("--help"), "{args:?}");
    }
}

#[test]
fn bad_config_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"eta1": 0.9, "eta2": 0.2}"#).unwrap();
    let out = arclqn(&[
        "train",
        "--problem",
        "quadratic",
        "--n",
        "5",
        "--config",
        cfg.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    std::fs::write(&cfg, r#"{"not_a_field": 1}"#).unwrap();
    let out = arclqn(&[
        "train",
        "--problem",
        "quadratic",
        "--n",
        "5",
        "--config",
        cfg.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn train_rosenbrock_reaches_tolerance() {
    let dir = tempfile::tempdir().unwrap();
    let summary = dir.path().join("summary.json");
    let out = arclqn(&[
        "train",
        "--problem",
        "rosenbrock",
        "--n",
        "100",
        "--iters",
        "5000",
        "--seed",
        "1",
        "--summary",
        summary.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let s = read_json(&summary);
    assert!(s["grad_norm_inf"].as_f64().unwrap() <= 1e-5, "{s}");
    assert_eq!(s["stop"], "gradient_tolerance");
    assert!(s["accepted"].as_u64().unwrap() > 0);
}

#[test]
fn train_logistic_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let run = |tag: &str| {
        let trace = dir.path().join(format!("trace{tag}.csv"));
        let summary = dir.path().join(format!("summary{tag}.json"));
        let out = arclqn(&[
            "train",
            "--problem",
            "logistic",
            "--n-features",
            "200",
            "--N",
            "5000",
            "--batch",
            "128",
            "--epochs",
            "50",
            "--trace",
            trace.to_str().unwrap(),
            "--summary",
            summary.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        (std::fs::read(trace).unwrap(), read_json(&summary))
    };
    let (t1, s1) = run("a");
    let (t2, _) = run("b");
    assert_eq!(t1, t2);
    assert!(s1["grad_norm"].as_f64().unwrap() <= 1e-2, "{s1}");
    let text = String::from_utf8(t1).unwrap();
    assert!(text.starts_with("iter,branch,rho,sigma,"));
    // full-batch evaluations appear once per epoch
    let with_full = text
        .lines()
        .skip(1)
        .filter(|l| !l.split(',').nth(5).unwrap().is_empty())
        .count();
    assert_eq!(with_full, 50);
}

#[test]
fn seed_env_overrides_flag() {
    let run = |env: Option<&str>, seed: &str| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_arclqn"));
        cmd.args([
            "train",
            "--problem",
            "logistic",
            "--n-features",
            "10",
            "--N",
            "200",
            "--batch",
            "16",
        ])
        .args(["--iters", "20", "--seed", seed]);
        match env {
            Some(v) => cmd.env("ARCLQN_SEED", v),
            None => cmd.env_remove("ARCLQN_SEED"),
        };
        let out = cmd.output().unwrap();
        assert!(out.status.success());
        let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
        v["seed"].as_u64().unwrap()
    };
    assert_eq!(run(None, "3"), 3);
    assert_eq!(run(Some("11"), "3"), 11);
}

#[test]
fn verify_filters_and_passes() {
    let out = arclqn(&["verify", "--only", "hardcase"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("hardcase/brute-force"));
    assert!(!text.contains("oracle/"));

    let out = arclqn(&[
        "verify",
        "--seed",
        "42",
        "--instances",
        "500",
        "--only",
        "oracle",
        "--json",
    ]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    for r in v.as_array().unwrap() {
        assert_eq!(r["total"], 500);
        assert_eq!(r["passed"], 500);
    }
}

#[test]
fn verify_default_run_passes() {
    let out = arclqn(&["verify"]);
    assert!(out.status.success(), "{}", stdout(&out));
    assert!(!stdout(&out).contains("FAIL"));
}
