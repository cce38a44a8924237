use arclqn::arc::{run, ArcConfig, Branch, Budget, FallbackConfig};
use arclqn::linalg::norm_inf;
use arclqn::problems::{Problem, Quadratic, Rosenbrock};
use arclqn::registry::{self, ProblemParams};

#[test]
fn every_registered_solver_minimizes_rosenbrock_2d() {
    for solver in registry::solvers().names() {
        let p = Rosenbrock::new(2);
        let cfg = ArcConfig {
            solver: solver.to_string(),
            ..ArcConfig::deterministic()
        };
        let budget = Budget {
            gtol_inf: Some(1e-5),
            ..Budget::iterations(2000)
        };
        let out = run(&p.initial_point(), &cfg, &p, &budget, 0).unwrap();
        let (_, g) = p.eval_full(&out.x);
        assert!(norm_inf(&g) <= 1e-5, "{solver}: {:e}", norm_inf(&g));
    }
}

#[test]
fn well_conditioned_quadratic_in_one_accepted_step() {
    // With B = I after no pairs and σ tiny, the cubic step is Newton's.
    let p = Quadratic::new(20, 1.0);
    let cfg = ArcConfig {
        sigma0: 1e-12,
        sigma_floor: 1e-12,
        ..ArcConfig::deterministic()
    };
    let out = run(&p.initial_point(), &cfg, &p, &Budget::iterations(1), 0).unwrap();
    assert_eq!(out.trace.steps[0].branch, Branch::Accepted);
    assert!(norm_inf(&out.x) < 1e-9, "{:?}", out.x);
}

#[test]
fn forced_rejection_matches_sgd_over_many_steps() {
    let p = Rosenbrock::new(6);
    let lr = 1e-4;
    let cfg = ArcConfig {
        eta1: 1e30,
        eta2: 1e30,
        alpha2: lr,
        fallback: FallbackConfig::Sgd,
        ..ArcConfig::deterministic()
    };
    let out = run(&p.initial_point(), &cfg, &p, &Budget::iterations(200), 0).unwrap();
    assert_eq!(out.trace.count(Branch::Fallback), 200);
    let mut x = p.initial_point();
    for _ in 0..200 {
        let (_, g) = p.eval_full(&x);
        for (xi, gi) in x.iter_mut().zip(&g) {
            *xi -= lr * gi;
        }
    }
    assert_eq!(out.x, x);
}

#[test]
fn stochastic_runs_repeat_exactly() {
    let params = ProblemParams {
        n_features: 30,
        n_samples: 400,
        seed: 9,
        ..ProblemParams::default()
    };
    let p = registry::problems().create("logistic", &params).unwrap();
    let budget = Budget {
        batch_size: Some(32),
        ..Budget::iterations(60)
    };
    let cfg = ArcConfig {
        full_eval_every: 13,
        ..ArcConfig::default()
    };
    let traces: Vec<Vec<u8>> = (0..2)
        .map(|_| {
            let out = run(&p.initial_point(), &cfg, p.as_ref(), &budget, 9).unwrap();
            let mut buf = Vec::new();
            out.trace.write_csv(&mut buf, false).unwrap();
            buf
        })
        .collect();
    assert_eq!(traces[0], traces[1]);
    let text = String::from_utf8(traces[0].clone()).unwrap();
    assert_eq!(text.lines().count(), 61);
}

#[test]
fn config_json_round_trip_and_rejection() {
    let cfg = ArcConfig::deterministic();
    assert_eq!(ArcConfig::from_json(&cfg.to_json()).unwrap(), cfg);
    let partial = ArcConfig::from_json(r#"{"memory": 3, "fallback": {"kind": "sgd"}}"#).unwrap();
    assert_eq!(partial.memory, 3);
    assert!(ArcConfig::from_json(r#"{"memroy": 3}"#).is_err());
    assert!(ArcConfig::from_json(r#"{"eta1": 0.9, "eta2": 0.1}"#).is_err());
    assert!(ArcConfig::from_json(r#"{"solver": "lanczos"}"#).is_err());
}
