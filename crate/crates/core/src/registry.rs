//! Name-keyed factories for the interchangeable pieces: subproblem
//! solvers and objective functions.

use crate::dense::DenseSr1Solver;
use crate::error::ArcError;
use crate::problems::{LogisticSynth, Problem, Quadratic, Rosenbrock};
use crate::subproblem::{NaiveLqnSolver, NormTrickSolver, SubproblemSolver};

type Factory<A, T> = Box<dyn Fn(&A) -> Box<T> + Send + Sync>;

pub struct Registry<A, T: ?Sized> {
    kind: &'static str,
    entries: Vec<(&'static str, Factory<A, T>)>,
}

impl<A, T: ?Sized> Registry<A, T> {
    pub fn new(kind: &'static str) -> Self {
        Self {
            kind,
            entries: Vec::new(),
        }
    }

    /// Adds or replaces the factory for `name`.
    pub fn register(&mut self, name: &'static str, factory: impl Fn(&A) -> Box<T> + Send + Sync + 'static) {
        self.entries.retain(|(n, _)| *n != name);
        self.entries.push((name, Box::new(factory)));
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.iter().map(|(n, _)| *n).collect()
    }

    pub fn create(&self, name: &str, args: &A) -> Result<Box<T>, ArcError> {
        self.entries
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, f)| f(args))
            .ok_or_else(|| ArcError::Unknown {
                kind: self.kind,
                name: name.to_string(),
                available: self.names().join(", "),
            })
    }
}

pub fn solvers() -> Registry<(), dyn SubproblemSolver> {
    let mut r: Registry<(), dyn SubproblemSolver> = Registry::new("solver");
    r.register("normtrick", |_| Box::new(NormTrickSolver));
    r.register("naive", |_| Box::new(NaiveLqnSolver));
    r.register("dense", |_| Box::new(DenseSr1Solver));
    r
}

/// Construction parameters shared by all registered problems; each
/// problem reads the fields it needs.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemParams {
    pub n: usize,
    pub condition: f64,
    pub n_features: usize,
    pub n_samples: usize,
    pub seed: u64,
}

impl Default for ProblemParams {
    fn default() -> Self {
        Self {
            n: 100,
            condition: 1e3,
            n_features: 200,
            n_samples: 5000,
            seed: 0,
        }
    }
}

pub fn problems() -> Registry<ProblemParams, dyn Problem> {
    let mut r: Registry<ProblemParams, dyn Problem> = Registry::new("problem");
    r.register("rosenbrock", |p| Box::new(Rosenbrock::new(p.n.max(2))));
    r.register("quadratic", |p| Box::new(Quadratic::new(p.n.max(1), p.condition)));
    r.register("logistic", |p| {
        Box::new(LogisticSynth::new(p.n_features, p.n_samples, p.seed))
    });
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lookup_by_name() {
        let s = solvers();
        assert_eq!(s.names(), vec!["normtrick", "naive", "dense"]);
        for name in s.names() {
            assert_eq!(s.create(name, &()).unwrap().name(), name);
        }
        let err = s.create("lanczos", &()).err().unwrap();
        assert!(err.to_string().contains("normtrick, naive, dense"));

        let p = problems()
            .create(
                "quadratic",
                &ProblemParams {
                    n: 7,
                    ..Default::default()
                },
            )
            .unwrap();
        assert_eq!(p.dim(), 7);
    }

    #[test]
    fn register_replaces() {
        let mut r = solvers();
        r.register("naive", |_| Box::new(NormTrickSolver));
        assert_eq!(r.names().len(), 3);
        assert_eq!(r.create("naive", &()).unwrap().name(), "normtrick");
    }
}
