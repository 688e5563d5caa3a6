//! Closed-loop simulation: command sources, the filtered loop with runtime
//! assertions, unfiltered baselines, parameter sweeps and logs.

mod baseline;
mod closed_loop;
mod command;
mod log;
mod sweep;

use serde::Serialize;
use thiserror::Error;

use crate::config::ConfigError;
use crate::filter::FilterError;
use crate::opt::{OptError, SolveOutcome};

pub use baseline::{go_then_return, run_baseline_case3, run_unfiltered};
pub use closed_loop::{run_closed_loop, shifted_candidate, Session, SimOptions, CANDIDATE_TOL, DECREASE_TOL};
pub use command::{discounted_goal_command, CommandContext, CommandDraw, CommandSource, GoalCommand, LiveCommand};
pub use log::{ClosedLoopLog, LogError, LogEvent, StepRecord, LOG_SCHEMA, MARGIN_TOL};
pub use sweep::{nesting_flips, parameter_sweep_s2, rebuild, SweepParam, SweepPoint, SweepReport};

/// Runtime-checked guarantees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Invariant {
    Safety,
    Decrease,
    RecursiveFeasibility,
}

impl Invariant {
    pub fn as_str(self) -> &'static str {
        match self {
            Invariant::Safety => "safety",
            Invariant::Decrease => "lyapunov_decrease",
            Invariant::RecursiveFeasibility => "recursive_feasibility",
        }
    }
}

impl std::fmt::Display for Invariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("initial state is outside the region of attraction (nominal problem {0})")]
    InitialInfeasible(SolveOutcome),
    #[error("assertion `{invariant}` failed at k = {k}: {detail}")]
    Assertion { invariant: Invariant, k: usize, detail: String, log: Box<ClosedLoopLog> },
    #[error("invalid setup: {0}")]
    Config(String),
    #[error(transparent)]
    ConfigFile(#[from] ConfigError),
    #[error(transparent)]
    Filter(#[from] FilterError),
    #[error(transparent)]
    Opt(#[from] OptError),
}
