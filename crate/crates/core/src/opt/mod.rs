//! Dense constrained optimization: a primal active-set QP solver and an SQP
//! driver for the nonlinear optimal control problems.

pub mod fd;
pub mod linalg;
mod qp;
mod sqp;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use qp::{solve_qp, solve_qp_with, FarkasCertificate, QpOptions, QpProblem, QpSolution};
pub use sqp::{negative_curvature, solve_nlp, NlpProblem, NlpSolution, SqpOptions};

/// Tolerance used for the linear-quadratic problems.
pub const LINEAR_TOL: f64 = 1e-9;
/// Tolerance used for nonlinear SQP solves.
pub const NONLINEAR_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveOutcome {
    Optimal,
    Infeasible,
    MaxIter,
    NumericalFailure,
}

impl SolveOutcome {
    pub fn as_str(self) -> &'static str {
        match self {
            SolveOutcome::Optimal => "optimal",
            SolveOutcome::Infeasible => "infeasible",
            SolveOutcome::MaxIter => "max_iter",
            SolveOutcome::NumericalFailure => "numerical_failure",
        }
    }
}

impl std::fmt::Display for SolveOutcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Result classification of a solve plus its final KKT residual.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveStatus {
    pub outcome: SolveOutcome,
    pub kkt_residual: f64,
    pub iterations: usize,
}

impl SolveStatus {
    pub fn new(outcome: SolveOutcome, kkt_residual: f64, iterations: usize) -> Self {
        Self { outcome, kkt_residual, iterations }
    }

    pub fn is_optimal(&self) -> bool {
        self.outcome == SolveOutcome::Optimal
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum OptError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("non-finite problem data: {0}")]
    NonFinite(&'static str),
}
