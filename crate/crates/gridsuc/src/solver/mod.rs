//! Self-contained optimization stack: a bounded-variable revised simplex
//! LP solver, a branch-and-bound MILP layer over it, and a two-stage
//! L-shaped (Benders) decomposition driver.
//!
//! Conventions used throughout:
//! * every problem is a minimization;
//! * row duals are shadow prices, `dual[r] = d(objective)/d(rhs[r])`,
//!   so `>=` rows carry nonnegative duals and `<=` rows nonpositive ones;
//! * infinite bounds are expressed with `f64::INFINITY`.

mod lshaped;
mod milp;
mod simplex;

pub use lshaped::{
    solve_two_stage_lshaped, LShapedOptions, LShapedSolution, LShapedStatus, Recourse, RecourseCut,
};
pub use milp::{solve_milp, MilpOptions, MilpSolution, MilpStatus};
pub use simplex::solve_lp;

use thiserror::Error;

/// Row sense of a linear constraint.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

/// One linear constraint in sparse row form.
#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub coeffs: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

/// A linear program in row form with variable bounds. Minimization.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LpInstance {
    pub objective: Vec<f64>,
    pub bounds: Vec<(f64, f64)>,
    pub rows: Vec<Row>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Primal/dual solution of an [`LpInstance`].
#[derive(Clone, Debug)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Structural variable values (empty unless `Optimal`).
    pub x: Vec<f64>,
    /// One dual per row (empty unless `Optimal`).
    pub duals: Vec<f64>,
    pub objective: f64,
}

/// A mixed binary-continuous program: an LP plus binary markers.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MilpInstance {
    pub lp: LpInstance,
    /// Indices of variables restricted to {0, 1}.
    pub binaries: Vec<usize>,
}

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("instance is malformed: {0}")]
    InvalidInstance(String),
    #[error("numerical failure after {iterations} simplex pivots")]
    NumericalFailure { iterations: usize },
    #[error("problem is infeasible")]
    Infeasible,
    #[error("problem is unbounded")]
    Unbounded,
    #[error("node limit {limit} reached without an incumbent")]
    NodeLimit { limit: usize },
    #[error("iteration limit {limit} reached (lb {lb}, ub {ub})")]
    IterationLimit { limit: usize, lb: f64, ub: f64 },
    #[error("recourse subproblem infeasible for scenario {scenario}: complete recourse violated")]
    SubproblemInfeasible { scenario: usize },
}

impl LpInstance {
    pub fn new(num_vars: usize) -> Self {
        LpInstance {
            objective: vec![0.0; num_vars],
            bounds: vec![(0.0, f64::INFINITY); num_vars],
            rows: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    /// Append a variable, returning its index.
    pub fn add_var(&mut self, cost: f64, lo: f64, hi: f64) -> usize {
        self.objective.push(cost);
        self.bounds.push((lo, hi));
        self.objective.len() - 1
    }

    pub fn add_row(&mut self, sense: Sense, rhs: f64, coeffs: Vec<(usize, f64)>) {
        self.rows.push(Row { coeffs, sense, rhs });
    }

    /// Cheap shape validation; returns a description of the first defect.
    pub fn validate(&self) -> Result<(), SolverError> {
        let n = self.num_vars();
        if self.bounds.len() != n {
            return Err(SolverError::InvalidInstance(format!(
                "bounds length {} != objective length {}",
                self.bounds.len(),
                n
            )));
        }
        for (j, &(lo, hi)) in self.bounds.iter().enumerate() {
            if lo > hi || lo.is_nan() || hi.is_nan() {
                return Err(SolverError::InvalidInstance(format!(
                    "variable {j} has inconsistent bounds [{lo}, {hi}]"
                )));
            }
        }
        for (j, &c) in self.objective.iter().enumerate() {
            if !c.is_finite() {
                return Err(SolverError::InvalidInstance(format!(
                    "variable {j} has non-finite objective coefficient {c}"
                )));
            }
        }
        for (r, row) in self.rows.iter().enumerate() {
            if !row.rhs.is_finite() {
                return Err(SolverError::InvalidInstance(format!(
                    "row {r} has non-finite rhs {}",
                    row.rhs
                )));
            }
            for &(j, a) in &row.coeffs {
                if j >= n || !a.is_finite() {
                    return Err(SolverError::InvalidInstance(format!(
                        "row {r} references variable {j} with coefficient {a}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Objective value of a point.
    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Largest constraint or bound violation of a point.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (&(lo, hi), &v) in self.bounds.iter().zip(x) {
            worst = worst.max(lo - v).max(v - hi);
        }
        for row in &self.rows {
            let lhs: f64 = row.coeffs.iter().map(|&(j, a)| a * x[j]).sum();
            let viol = match row.sense {
                Sense::Le => lhs - row.rhs,
                Sense::Ge => row.rhs - lhs,
                Sense::Eq => (lhs - row.rhs).abs(),
            };
            worst = worst.max(viol);
        }
        worst
    }

    /// Serialize in the classic text LP interchange format (minimization),
    /// with `x<j>` variable names. Binary markers are supplied by the caller.
    pub fn to_lp_format(&self, binaries: &[usize]) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        out.push_str("Minimize\n obj:");
        for (j, &c) in self.objective.iter().enumerate() {
            if c != 0.0 {
                let _ = write!(out, " {} {} x{}", if c < 0.0 { "-" } else { "+" }, c.abs(), j);
            }
        }
        out.push_str("\nSubject To\n");
        for (r, row) in self.rows.iter().enumerate() {
            let _ = write!(out, " c{r}:");
            for &(j, a) in &row.coeffs {
                let _ = write!(out, " {} {} x{}", if a < 0.0 { "-" } else { "+" }, a.abs(), j);
            }
            let op = match row.sense {
                Sense::Le => "<=",
                Sense::Eq => "=",
                Sense::Ge => ">=",
            };
            let _ = writeln!(out, " {op} {}", row.rhs);
        }
        out.push_str("Bounds\n");
        for (j, &(lo, hi)) in self.bounds.iter().enumerate() {
            if lo == f64::NEG_INFINITY && hi == f64::INFINITY {
                let _ = writeln!(out, " x{j} free");
            } else if hi == f64::INFINITY {
                let _ = writeln!(out, " {lo} <= x{j}");
            } else {
                let _ = writeln!(out, " {lo} <= x{j} <= {hi}");
            }
        }
        if !binaries.is_empty() {
            out.push_str("Binary\n");
            for &j in binaries {
                let _ = writeln!(out, " x{j}");
            }
        }
        out.push_str("End\n");
        out
    }
}

impl MilpInstance {
    pub fn to_lp_format(&self) -> String {
        self.lp.to_lp_format(&self.binaries)
    }
}

/// Default primal feasibility tolerance.
pub const FEAS_TOL: f64 = 1e-7;
/// Default relative MILP gap tolerance.
pub const MILP_GAP_TOL: f64 = 1e-6;
/// Default relative L-shaped convergence tolerance.
pub const LSHAPED_TOL: f64 = 1e-6;
