//! Parameter sweeps of the safe-stable input set at a fixed state.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::config::{ConfigError, Ps2fConfig};
use crate::filter::{sample_s2_set, Membership, S2Grid};
use crate::nominal::solve_nominal;
use crate::opt::SolveOutcome;
use crate::par::Execution;
use crate::sets::TerminalSet;

use super::SimError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    /// Performance weight `a`.
    A,
    /// Filter horizon `M`.
    M,
    /// Nominal horizon `N`, with `M = N`.
    N,
    /// State weight `Q = rho I`; terminal ingredients are re-derived.
    Rho,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::A => "a",
            SweepParam::M => "M",
            SweepParam::N => "N",
            SweepParam::Rho => "rho",
        }
    }

    /// Whether the set must grow with the parameter.
    pub fn is_monotone(self) -> bool {
        matches!(self, SweepParam::A | SweepParam::M)
    }
}

fn as_horizon(v: f64) -> Result<usize, ConfigError> {
    if v >= 1.0 && v.fract() == 0.0 {
        Ok(v as usize)
    } else {
        Err(ConfigError::Invalid(format!("horizon must be a positive integer, got {v}")))
    }
}

/// `cfg` with one parameter replaced.
pub fn rebuild(cfg: &Ps2fConfig, param: SweepParam, value: f64) -> Result<Ps2fConfig, ConfigError> {
    match param {
        SweepParam::A => Ok(cfg.with_a(value)),
        SweepParam::M => {
            let m = as_horizon(value)?;
            if m > cfg.n {
                return Err(ConfigError::Invalid(format!("M = {m} exceeds N = {}", cfg.n)));
            }
            Ok(cfg.with_m(m))
        }
        SweepParam::N => {
            let n = as_horizon(value)?;
            Ok(Ps2fConfig { n, m: n, ..cfg.clone() })
        }
        SweepParam::Rho => {
            let mut spec = cfg.to_spec()?;
            let dim = cfg.state_dim();
            spec.cost.q = crate::config::matrix_to_rows(&(DMatrix::identity(dim, dim) * value));
            if cfg.model.is_linear() {
                spec.cost.p_f = None;
                spec.k = None;
                if matches!(cfg.xf, TerminalSet::Ellipsoid { .. }) {
                    spec.xf.p = None;
                    spec.xf.gamma = None;
                }
            }
            spec.resolve()
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepPoint {
    pub value: f64,
    pub nominal_status: SolveOutcome,
    pub members: usize,
    pub indeterminate: usize,
    /// Boundary loops; empty when the nominal problem is not solved.
    pub boundary: Vec<Vec<[f64; 2]>>,
    #[serde(skip)]
    pub grid: Option<S2Grid>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub param: SweepParam,
    pub state: Vec<f64>,
    pub resolution: usize,
    pub points: Vec<SweepPoint>,
    /// Cells that are members at a smaller value and non-members at a larger one.
    pub nesting_flips: usize,
}

/// Cells member in `small` and non-member in `large`.
pub fn nesting_flips(small: &S2Grid, large: &S2Grid) -> usize {
    small
        .cells
        .iter()
        .zip(&large.cells)
        .filter(|(s, l)| **s == Membership::Member && **l == Membership::NonMember)
        .count()
}

/// Samples the set for each value in `values` (kept in the given order).
/// Nesting flips are counted between consecutive solved values in
/// increasing order for the monotone parameters.
pub fn parameter_sweep_s2(
    cfg: &Ps2fConfig,
    x: &DVector<f64>,
    param: SweepParam,
    values: &[f64],
    resolution: usize,
    exec: Execution,
) -> Result<SweepReport, SimError> {
    let mut points = Vec::with_capacity(values.len());
    for &value in values {
        let c = rebuild(cfg, param, value)?;
        let nominal = solve_nominal(&c, x, None)?;
        if !nominal.is_optimal() {
            points.push(SweepPoint {
                value,
                nominal_status: nominal.status.outcome,
                members: 0,
                indeterminate: 0,
                boundary: Vec::new(),
                grid: None,
            });
            continue;
        }
        let grid = sample_s2_set(&c, x, &nominal, c.a, c.m, resolution, exec)?;
        points.push(SweepPoint {
            value,
            nominal_status: nominal.status.outcome,
            members: grid.count(Membership::Member),
            indeterminate: grid.count(Membership::Indeterminate),
            boundary: grid.boundary(),
            grid: Some(grid),
        });
    }
    let mut flips = 0;
    if param.is_monotone() {
        let mut solved: Vec<&SweepPoint> = points.iter().filter(|p| p.grid.is_some()).collect();
        solved.sort_by(|a, b| a.value.total_cmp(&b.value));
        for w in solved.windows(2) {
            flips += nesting_flips(w[0].grid.as_ref().unwrap(), w[1].grid.as_ref().unwrap());
        }
    }
    Ok(SweepReport { param, state: x.iter().copied().collect(), resolution, points, nesting_flips: flips })
}
