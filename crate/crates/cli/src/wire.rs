//! Service wire format: newline-delimited JSON messages over a WebSocket.

use serde::{Deserialize, Serialize};

use ps2f_core::sim::{StepRecord, LOG_SCHEMA};

/// Most vertices carried by a frame's boundary polyline.
pub const MAX_BOUNDARY_VERTICES: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Margins {
    /// `x_i - lower_i, upper_i - x_i` for each state component.
    pub x: Vec<f64>,
    /// The same for the applied input.
    pub u: Vec<f64>,
}

impl Margins {
    pub fn min(&self) -> f64 {
        self.x.iter().chain(&self.u).copied().fold(f64::INFINITY, f64::min)
    }
}

/// One control-loop tick as sent to clients and written to replay files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TelemetryFrame {
    #[serde(rename = "type")]
    pub kind: String,
    pub schema: String,
    pub k: usize,
    /// Seconds since the session started; `k Ts` in replay files.
    pub t_wall: f64,
    pub x: Vec<f64>,
    pub u_ext: Vec<f64>,
    pub u_applied: Vec<f64>,
    pub used_fallback: bool,
    /// Nominal optimal value at `x`.
    #[serde(rename = "V")]
    pub value: f64,
    pub a: f64,
    #[serde(rename = "M")]
    pub m: usize,
    pub stage_cost: f64,
    /// Boundary of the safe-stable input set at `x`; empty when not sampled,
    /// a single vertex when the set is a point.
    pub s2_boundary: Vec<[f64; 2]>,
    /// Step whose state the boundary was sampled at.
    pub s2_boundary_k: Option<usize>,
    pub margins: Margins,
}

impl TelemetryFrame {
    pub fn from_record(rec: &StepRecord, t_wall: f64, s2_boundary: Vec<[f64; 2]>) -> Self {
        Self {
            kind: "frame".into(),
            schema: LOG_SCHEMA.into(),
            k: rec.k,
            t_wall,
            x: rec.x.clone(),
            u_ext: rec.u_ext.clone(),
            u_applied: rec.u.clone(),
            used_fallback: rec.used_fallback,
            value: rec.value.unwrap_or(0.0),
            a: rec.a.unwrap_or(0.0),
            m: rec.m.unwrap_or(0),
            stage_cost: rec.stage_cost,
            s2_boundary_k: (!s2_boundary.is_empty()).then_some(rec.k),
            s2_boundary,
            margins: Margins { x: rec.x_margins.clone(), u: rec.u_margins.clone() },
        }
    }

    /// One NDJSON line, newline included.
    pub fn to_line(&self) -> String {
        let mut s = serde_json::to_string(self).expect("frame serializes");
        s.push('\n');
        s
    }
}

/// Sent when an inbound message is rejected or a control request fails.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorFrame {
    #[serde(rename = "type")]
    pub kind: String,
    pub message: String,
}

impl ErrorFrame {
    pub fn new(message: impl Into<String>) -> Self {
        Self { kind: "error".into(), message: message.into() }
    }

    pub fn to_line(&self) -> String {
        let mut s = serde_json::to_string(self).expect("error frame serializes");
        s.push('\n');
        s
    }
}

/// Client-to-service messages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Inbound {
    /// External command; the latest one wins.
    Cmd { u: Vec<f64> },
    /// Performance weight, clamped to the schedule's range.
    SetA { a: f64 },
    /// Toggles the loop between running and paused.
    Pause,
    /// Moves the plant to `x`.
    Reset { x: Vec<f64> },
}

/// Parses and checks one inbound line against the session dimensions.
pub fn parse_inbound(line: &str, input_dim: usize, state_dim: usize) -> Result<Inbound, String> {
    let msg: Inbound = serde_json::from_str(line.trim()).map_err(|e| format!("malformed message: {e}"))?;
    let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
    match &msg {
        Inbound::Cmd { u } if u.len() != input_dim => {
            Err(format!("cmd needs {input_dim} components, got {}", u.len()))
        }
        Inbound::Reset { x } if x.len() != state_dim => {
            Err(format!("reset needs {state_dim} components, got {}", x.len()))
        }
        Inbound::Cmd { u: v } | Inbound::Reset { x: v } if !finite(v) => Err("values must be finite".into()),
        Inbound::SetA { a } if !a.is_finite() => Err("a must be finite".into()),
        _ => Ok(msg),
    }
}

/// Splits a text message into its non-empty lines.
pub fn lines(text: &str) -> impl Iterator<Item = &str> {
    text.lines().map(str::trim).filter(|l| !l.is_empty())
}
