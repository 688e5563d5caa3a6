//! Closed-loop logs and their CSV / JSON-lines encodings (`ps2f-log-v1`).

use serde::{Deserialize, Serialize};

use crate::opt::SolveOutcome;

pub const LOG_SCHEMA: &str = "ps2f-log-v1";
/// Margins below this count as constraint violations.
pub const MARGIN_TOL: f64 = 1e-8;

/// One closed-loop step. Margins are ordered `(x_i - lower_i, upper_i - x_i)`
/// per component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub k: usize,
    pub x: Vec<f64>,
    pub u_ext: Vec<f64>,
    pub u: Vec<f64>,
    /// Nominal value at `x(k)`; absent for unfiltered runs.
    pub value: Option<f64>,
    pub a: Option<f64>,
    pub m: Option<usize>,
    pub stage_cost: f64,
    pub x_margins: Vec<f64>,
    pub u_margins: Vec<f64>,
    pub nominal_status: Option<SolveOutcome>,
    pub filter_status: Option<SolveOutcome>,
    pub used_fallback: bool,
    pub t_nominal_ms: f64,
    pub t_filter_ms: f64,
}

impl StepRecord {
    pub fn min_margin(&self) -> f64 {
        self.x_margins.iter().chain(&self.u_margins).copied().fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEvent {
    pub k: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosedLoopLog {
    pub schema: String,
    pub state_dim: usize,
    pub input_dim: usize,
    pub steps: Vec<StepRecord>,
    pub final_state: Vec<f64>,
    pub final_margins: Vec<f64>,
    pub final_value: Option<f64>,
    pub events: Vec<LogEvent>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum Line {
    Header { schema: String, state_dim: usize, input_dim: usize },
    Step(StepRecord),
    Event(LogEvent),
    Final { x: Vec<f64>, margins: Vec<f64>, value: Option<f64> },
}

#[derive(Debug, thiserror::Error)]
pub enum LogError {
    #[error("line {line}: {source}")]
    Json { line: usize, source: serde_json::Error },
    #[error("unsupported schema `{0}`")]
    Schema(String),
    #[error("log has no header line")]
    MissingHeader,
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn fmt_opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

impl ClosedLoopLog {
    pub fn new(state_dim: usize, input_dim: usize) -> Self {
        Self {
            schema: LOG_SCHEMA.to_string(),
            state_dim,
            input_dim,
            steps: Vec::new(),
            final_state: Vec::new(),
            final_margins: Vec::new(),
            final_value: None,
            events: Vec::new(),
        }
    }

    /// Steps with a margin below `-MARGIN_TOL`, counting the final state as one more step.
    pub fn violations(&self) -> usize {
        let steps = self.steps.iter().filter(|r| r.min_margin() < -MARGIN_TOL).count();
        let last = self.final_margins.iter().any(|m| *m < -MARGIN_TOL);
        steps + last as usize
    }

    /// Visited states whose component `i` leaves the state box.
    pub fn state_component_violations(&self, i: usize) -> usize {
        let bad = |m: &[f64]| m.len() > 2 * i + 1 && (m[2 * i] < -MARGIN_TOL || m[2 * i + 1] < -MARGIN_TOL);
        self.steps.iter().filter(|r| bad(&r.x_margins)).count() + bad(&self.final_margins) as usize
    }

    pub fn min_margin(&self) -> f64 {
        self.steps
            .iter()
            .map(StepRecord::min_margin)
            .chain(self.final_margins.iter().copied())
            .fold(f64::INFINITY, f64::min)
    }

    /// Nominal values along the run, ending with the final state's value.
    pub fn values(&self) -> Vec<Option<f64>> {
        self.steps.iter().map(|r| r.value).chain(std::iter::once(self.final_value)).collect()
    }

    /// `(k, V(k+1) - V(k) + (1 - a(k)) l(k))` for every step with `a(k) < 1`
    /// and both values known.
    pub fn decrease_slacks(&self) -> Vec<(usize, f64)> {
        let values = self.values();
        self.steps
            .iter()
            .enumerate()
            .filter_map(|(i, r)| {
                let a = r.a?;
                if a >= 1.0 {
                    return None;
                }
                let (v0, v1) = (values[i]?, values[i + 1]?);
                Some((r.k, v1 - v0 + (1.0 - a) * r.stage_cost))
            })
            .collect()
    }

    /// Largest decrease slack over steps `k >= from`.
    pub fn max_decrease_slack(&self, from: usize) -> Option<f64> {
        self.decrease_slacks().into_iter().filter(|(k, _)| *k >= from).map(|(_, s)| s).reduce(f64::max)
    }

    pub fn fallback_count(&self) -> usize {
        self.steps.iter().filter(|r| r.used_fallback).count()
    }

    pub fn final_state_norm(&self) -> f64 {
        self.final_state.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn csv_header(&self) -> Vec<String> {
        let mut h = vec!["k".to_string()];
        h.extend((0..self.state_dim).map(|i| format!("x{i}")));
        h.extend((0..self.input_dim).map(|i| format!("u_ext{i}")));
        h.extend((0..self.input_dim).map(|i| format!("u{i}")));
        h.extend(["V", "a", "M", "stage_cost"].map(String::from));
        for (name, dim) in [("x", self.state_dim), ("u", self.input_dim)] {
            for i in 0..dim {
                h.push(format!("margin_{name}{i}_lo"));
                h.push(format!("margin_{name}{i}_hi"));
            }
        }
        h.extend(["nominal_status", "filter_status", "fallback", "t_nominal_ms", "t_filter_ms"].map(String::from));
        h
    }

    /// CSV with one row per step and a last row for the final state whose
    /// command, schedule and status fields are empty.
    pub fn to_csv(&self) -> Result<String, LogError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(self.csv_header())?;
        for r in &self.steps {
            let mut row = vec![r.k.to_string()];
            row.extend(r.x.iter().chain(&r.u_ext).chain(&r.u).map(f64::to_string));
            row.push(fmt_opt(r.value));
            row.push(fmt_opt(r.a));
            row.push(fmt_opt(r.m));
            row.push(r.stage_cost.to_string());
            row.extend(r.x_margins.iter().chain(&r.u_margins).map(f64::to_string));
            row.push(fmt_opt(r.nominal_status.map(SolveOutcome::as_str)));
            row.push(fmt_opt(r.filter_status.map(SolveOutcome::as_str)));
            row.push((r.used_fallback as u8).to_string());
            row.push(r.t_nominal_ms.to_string());
            row.push(r.t_filter_ms.to_string());
            w.write_record(&row)?;
        }
        if !self.final_state.is_empty() {
            let mut row = vec![self.steps.len().to_string()];
            row.extend(self.final_state.iter().map(f64::to_string));
            row.extend(std::iter::repeat(String::new()).take(2 * self.input_dim));
            row.push(fmt_opt(self.final_value));
            row.extend(std::iter::repeat(String::new()).take(3));
            row.extend(self.final_margins.iter().map(f64::to_string));
            row.extend(std::iter::repeat(String::new()).take(2 * self.input_dim + 5));
            w.write_record(&row)?;
        }
        let bytes = w.into_inner().map_err(|e| LogError::Csv(e.into_error().into()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    /// Header line, one line per step and event, and a final-state line.
    pub fn to_jsonl(&self) -> String {
        let mut lines = vec![Line::Header { schema: self.schema.clone(), state_dim: self.state_dim, input_dim: self.input_dim }];
        let mut events = self.events.iter().peekable();
        for r in &self.steps {
            while let Some(e) = events.next_if(|e| e.k <= r.k) {
                lines.push(Line::Event(e.clone()));
            }
            lines.push(Line::Step(r.clone()));
        }
        lines.extend(events.cloned().map(Line::Event));
        lines.push(Line::Final { x: self.final_state.clone(), margins: self.final_margins.clone(), value: self.final_value });
        let mut out = String::new();
        for l in &lines {
            out.push_str(&serde_json::to_string(l).expect("log lines serialize"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self, LogError> {
        let mut log: Option<Self> = None;
        for (i, raw) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let line: Line = serde_json::from_str(raw).map_err(|source| LogError::Json { line: i + 1, source })?;
            match line {
                Line::Header { schema, state_dim, input_dim } => {
                    if schema != LOG_SCHEMA {
                        return Err(LogError::Schema(schema));
                    }
                    log = Some(Self::new(state_dim, input_dim));
                }
                other => {
                    let log = log.as_mut().ok_or(LogError::MissingHeader)?;
                    match other {
                        Line::Step(r) => log.steps.push(r),
                        Line::Event(e) => log.events.push(e),
                        Line::Final { x, margins, value } => {
                            log.final_state = x;
                            log.final_margins = margins;
                            log.final_value = value;
                        }
                        Line::Header { .. } => unreachable!(),
                    }
                }
            }
        }
        log.ok_or(LogError::MissingHeader)
    }
}
