use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::subproblem::SolutionCase;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Accepted,
    Fallback,
    /// The subproblem solve failed; a fallback step was taken.
    Failed,
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Branch::Accepted => "accepted",
            Branch::Fallback => "fallback",
            Branch::Failed => "failed",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub iter: usize,
    pub branch: Branch,
    /// `None` when no model decrease was available.
    pub rho: Option<f64>,
    pub sigma_after: f64,
    /// Batch objective before and after the step.
    pub f_before: f64,
    pub f_after: f64,
    /// Full objective after the step, on evaluation iterations.
    pub f_full: Option<f64>,
    /// Norm of the batch gradient at the start of the step.
    pub grad_norm: f64,
    pub newton_iters: usize,
    pub case: Option<SolutionCase>,
    pub wall_time_ns: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FullEval {
    pub iter: usize,
    pub f: f64,
    pub grad_norm: f64,
    pub grad_norm_inf: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub steps: Vec<StepReport>,
    pub full_evals: Vec<FullEval>,
}

const HEADER: [&str; 10] = [
    "iter",
    "branch",
    "rho",
    "sigma",
    "f_batch",
    "f_full_or_blank",
    "grad_norm",
    "newton_iters",
    "case",
    "wall_time_ns",
];

fn sci(v: f64) -> String {
    format!("{v:.6e}")
}

impl Trace {
    pub fn count(&self, branch: Branch) -> usize {
        self.steps.iter().filter(|s| s.branch == branch).count()
    }

    /// Writes one CSV row per step. With `timing` off the wall-time column
    /// is left blank so identical runs produce identical bytes.
    pub fn write_csv<W: Write>(&self, out: W, timing: bool) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(HEADER)?;
        for s in &self.steps {
            w.write_record([
                s.iter.to_string(),
                s.branch.to_string(),
                s.rho.map(sci).unwrap_or_default(),
                sci(s.sigma_after),
                sci(s.f_before),
                s.f_full.map(sci).unwrap_or_default(),
                sci(s.grad_norm),
                s.newton_iters.to_string(),
                s.case.map(|c| c.to_string()).unwrap_or_default(),
                if timing {
                    s.wall_time_ns.to_string()
                } else {
                    String::new()
                },
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let trace = Trace {
            steps: vec![StepReport {
                iter: 0,
                branch: Branch::Accepted,
                rho: Some(0.75),
                sigma_after: 0.5,
                f_before: 1.0,
                f_after: 0.4,
                f_full: None,
                grad_norm: 2.0,
                newton_iters: 3,
                case: Some(SolutionCase::Interior),
                wall_time_ns: 1234,
            }],
            full_evals: vec![],
        };
        let mut buf = Vec::new();
        trace.write_csv(&mut buf, false).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "iter,branch,rho,sigma,f_batch,f_full_or_blank,grad_norm,newton_iters,case,wall_time_ns"
        );
        assert_eq!(
            lines.next().unwrap(),
            "0,accepted,7.500000e-1,5.000000e-1,1.000000e0,,2.000000e0,3,interior,"
        );
    }
}
