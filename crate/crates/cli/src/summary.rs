//! Versioned JSON artifacts written by the batch commands.

use serde::{Deserialize, Serialize};

use ps2f_core::sim::{ClosedLoopLog, SweepParam, SweepReport};

pub const SUMMARY_SCHEMA: &str = "ps2f-summary-v1";
pub const BOUNDARY_SCHEMA: &str = "ps2f-boundary-v1";
pub const DARE_SCHEMA: &str = "ps2f-dare-v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedInvariant {
    pub invariant: String,
    pub k: usize,
    pub detail: String,
}

/// Outcome of a closed-loop run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub schema: String,
    pub command: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variant: Option<String>,
    pub steps: usize,
    /// Logged states and inputs with a margin below the tolerance.
    pub violations: usize,
    pub min_margin: Option<f64>,
    pub final_state: Vec<f64>,
    pub final_state_norm: f64,
    /// Worst `V(k+1) - V(k) + (1 - a(k)) l(k)` over `k >= decrease_from`.
    pub max_decrease_slack: Option<f64>,
    pub decrease_from: usize,
    pub fallbacks: usize,
    pub config_violations: Vec<String>,
    pub failed_invariant: Option<FailedInvariant>,
    pub passed: bool,
}

impl RunSummary {
    pub fn from_log(
        command: &str,
        variant: Option<&str>,
        log: &ClosedLoopLog,
        decrease_from: usize,
        config_violations: Vec<String>,
        failed_invariant: Option<FailedInvariant>,
    ) -> Self {
        let min_margin = log.min_margin();
        Self {
            schema: SUMMARY_SCHEMA.into(),
            command: command.into(),
            variant: variant.map(str::to_string),
            steps: log.steps.len(),
            violations: log.violations(),
            min_margin: min_margin.is_finite().then_some(min_margin),
            final_state: log.final_state.clone(),
            final_state_norm: log.final_state_norm(),
            max_decrease_slack: log.max_decrease_slack(decrease_from),
            decrease_from,
            fallbacks: log.fallback_count(),
            config_violations,
            passed: failed_invariant.is_none(),
            failed_invariant,
        }
    }
}

/// Membership grid around one logged step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundarySnapshot {
    pub k: usize,
    pub x: Vec<f64>,
    pub a: f64,
    #[serde(rename = "M")]
    pub m: usize,
    pub u_ext: Vec<f64>,
    pub u_applied: Vec<f64>,
    pub members: usize,
    pub indeterminate: usize,
    /// Closed boundary loops in `(u1, u2)`; a single point for a singleton set.
    pub loops: Vec<Vec<[f64; 2]>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryFile {
    pub schema: String,
    pub command: String,
    pub resolution: usize,
    pub snapshots: Vec<BoundarySnapshot>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub param: String,
    pub values: Vec<f64>,
    pub members: Vec<usize>,
    pub nominal_status: Vec<String>,
    pub nesting_flips: usize,
    /// Whether the set must grow with the parameter.
    pub monotone: bool,
    pub file: String,
}

impl SweepEntry {
    pub fn from_report(report: &SweepReport, file: &str) -> Self {
        Self {
            param: report.param.name().into(),
            values: report.points.iter().map(|p| p.value).collect(),
            members: report.points.iter().map(|p| p.members).collect(),
            nominal_status: report.points.iter().map(|p| p.nominal_status.to_string()).collect(),
            nesting_flips: report.nesting_flips,
            monotone: report.param.is_monotone(),
            file: file.into(),
        }
    }
}

/// Outcome of the parameter sweeps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub schema: String,
    pub command: String,
    pub state: Vec<f64>,
    pub resolution: usize,
    pub sweeps: Vec<SweepEntry>,
    pub failed_invariant: Option<FailedInvariant>,
    pub passed: bool,
}

impl SweepSummary {
    pub fn entry(&self, param: SweepParam) -> Option<&SweepEntry> {
        self.sweeps.iter().find(|s| s.param == param.name())
    }
}

/// Riccati solution and terminal level for a linear configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DareReport {
    pub schema: String,
    #[serde(rename = "P")]
    pub p: Vec<Vec<f64>>,
    #[serde(rename = "K")]
    pub k: Vec<Vec<f64>>,
    pub gamma: f64,
    pub residual: f64,
    pub iterations: usize,
}

impl DareReport {
    /// Human-readable form with four decimals.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let matrix = |out: &mut String, name: &str, rows: &[Vec<f64>]| {
            out.push_str(name);
            out.push_str(" =\n");
            for row in rows {
                let cells: Vec<String> = row.iter().map(|v| format!("{v:>12.4}")).collect();
                out.push_str(&cells.join(" "));
                out.push('\n');
            }
        };
        matrix(&mut out, "P", &self.p);
        matrix(&mut out, "K", &self.k);
        out.push_str(&format!("gamma = {:.4}\n", self.gamma));
        out
    }
}
