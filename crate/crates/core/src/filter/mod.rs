//! The filtering problem: projection of an external command onto the set of
//! first inputs that keep the nominal performance and terminal guarantees.

mod membership;
mod sampling;

use nalgebra::DVector;
use thiserror::Error;

use crate::config::Ps2fConfig;
use crate::nominal::{sqp_options, NominalSolution};
use crate::ocp::{reference_budget, Layout, OcpProblem, OcpSpec, Terminal, TrajQuad};
use crate::opt::{OptError, SolveOutcome, SolveStatus};

pub use membership::{membership_detail, s2_membership, Membership, MembershipDetail, MEMBERSHIP_TOL};
pub use sampling::{boundary_polylines, downsample_closed, marching_squares, sample_s2_set, telemetry_boundary, S2Grid};

/// Tolerance on the terminal matching and the performance constraint.
pub const FILTER_TOL: f64 = 1e-6;
/// Tolerance on the state and input boxes.
pub const BOX_TOL: f64 = 1e-8;

#[derive(Debug, Error, PartialEq)]
pub enum FilterError {
    #[error("nominal solution is not optimal ({0})")]
    NominalNotOptimal(SolveOutcome),
    #[error("filter horizon {m} outside [1, {n}]")]
    Horizon { m: usize, n: usize },
    #[error("performance weight must be nonnegative, got {0}")]
    Weight(f64),
    #[error("command has dimension {0}, expected {1}")]
    Command(usize, usize),
    #[error(transparent)]
    Opt(#[from] OptError),
}

#[derive(Debug, Clone)]
pub struct FilterResult {
    pub u_applied: DVector<f64>,
    pub u_stack: Vec<DVector<f64>>,
    pub x_traj: Vec<DVector<f64>>,
    pub distortion: f64,
    pub status: SolveStatus,
    pub used_fallback: bool,
    /// Left side of the performance constraint at the returned stack.
    pub performance_slack: f64,
}

pub(crate) fn check_filter_args(cfg: &Ps2fConfig, nominal: &NominalSolution, a: f64, m: usize) -> Result<(), FilterError> {
    if !nominal.is_optimal() {
        return Err(FilterError::NominalNotOptimal(nominal.status.outcome));
    }
    if m < 1 || m > cfg.n || m > nominal.v_star.len() {
        return Err(FilterError::Horizon { m, n: cfg.n });
    }
    if !(a >= 0.0) {
        return Err(FilterError::Weight(a));
    }
    Ok(())
}

/// `sum_{i<M} l(x_i, u_i) - budget - a l(x_0, u_0)`.
pub fn performance_value(cfg: &Ps2fConfig, xs: &[DVector<f64>], us: &[DVector<f64>], budget: f64, a: f64) -> f64 {
    cfg.cost.path(xs, us) - budget - a * cfg.cost.stage(&xs[0], &us[0])
}

/// Projects `u_ext` onto the safe-stable input set at `x`.
///
/// The solve starts from the truncated nominal pair, which is feasible. If
/// the solver does not return a verified optimum the truncated nominal
/// action itself is applied and `used_fallback` is set.
pub fn filter(
    cfg: &Ps2fConfig,
    x: &DVector<f64>,
    u_ext: &DVector<f64>,
    nominal: &NominalSolution,
    a: f64,
    m: usize,
) -> Result<FilterResult, FilterError> {
    check_filter_args(cfg, nominal, a, m)?;
    if u_ext.len() != cfg.input_dim() {
        return Err(FilterError::Command(u_ext.len(), cfg.input_dim()));
    }
    let n = cfg.state_dim();
    let budget = reference_budget(cfg, &nominal.z_star, &nominal.v_star, m);
    let spec = OcpSpec {
        horizon: m,
        objective: TrajQuad::distortion(u_ext, n, m),
        terminal: Terminal::Fixed(nominal.z_star[m].clone()),
        state_box_steps: (1..m).collect(),
        state_box: Some(cfg.x_set.clone()),
        input_box: Some(cfg.u_set.clone()),
        performance: Some(TrajQuad::performance(&cfg.cost.q, &cfg.cost.r, m, budget, a)),
        fixed_first_input: None,
    };
    let ocp = OcpProblem::new(&cfg.model, x.clone(), spec, Layout::for_model(&cfg.model));
    let z0 = ocp.pack(&nominal.v_star[..m], &nominal.z_star[..=m]);
    let sol = ocp.solve(&z0, &sqp_options(cfg))?;

    let (us, xs) = ocp.unpack(&sol.z);
    let slack = performance_value(cfg, &xs, &us, budget, a);
    let verified = sol.is_optimal()
        && slack <= FILTER_TOL
        && (&xs[m] - &nominal.z_star[m]).amax() <= FILTER_TOL
        && xs[..m].iter().all(|xi| cfg.x_set.contains(xi, BOX_TOL))
        && us.iter().all(|ui| cfg.u_set.contains(ui, BOX_TOL));
    if verified {
        let u_applied = us[0].clone();
        return Ok(FilterResult {
            distortion: (u_ext - &u_applied).norm_squared(),
            u_applied,
            u_stack: us,
            x_traj: xs,
            status: sol.status,
            used_fallback: false,
            performance_slack: slack,
        });
    }
    let mut status = sol.status;
    if matches!(status.outcome, SolveOutcome::Optimal | SolveOutcome::Infeasible) {
        // the start point is feasible, so an infeasibility report is numerical
        status.outcome = SolveOutcome::NumericalFailure;
    }
    Ok(truncated_nominal(cfg, u_ext, nominal, a, m, status))
}

/// The truncated nominal pair as a filter result, flagged as a fallback.
pub fn truncated_nominal(cfg: &Ps2fConfig, u_ext: &DVector<f64>, nominal: &NominalSolution, a: f64, m: usize, status: SolveStatus) -> FilterResult {
    let us = nominal.v_star[..m].to_vec();
    let xs = nominal.z_star[..=m].to_vec();
    let budget = reference_budget(cfg, &nominal.z_star, &nominal.v_star, m);
    let slack = performance_value(cfg, &xs, &us, budget, a);
    let u_applied = us[0].clone();
    FilterResult {
        distortion: (u_ext - &u_applied).norm_squared(),
        u_applied,
        u_stack: us,
        x_traj: xs,
        status,
        used_fallback: true,
        performance_slack: slack,
    }
}
