//! The nominal MPC problem: the certified copilot whose value function is
//! the Lyapunov certificate and whose trajectory seeds the filter.

use nalgebra::DVector;

use crate::config::Ps2fConfig;
use crate::ocp::{Layout, OcpProblem, OcpSpec, Terminal, TrajQuad};
use crate::opt::{NlpSolution, OptError, SolveOutcome, SolveStatus, SqpOptions, LINEAR_TOL, NONLINEAR_TOL};
use crate::par::{map_indexed, Execution};
use crate::sets::TerminalSet;

/// Tolerance for the trajectory invariants of an accepted solution.
pub const TRAJ_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct NominalSolution {
    pub v_star: Vec<DVector<f64>>,
    /// `N + 1` states from `z_star[0] = x`, re-simulated from `v_star`.
    pub z_star: Vec<DVector<f64>>,
    pub value: f64,
    pub status: SolveStatus,
}

impl NominalSolution {
    pub fn is_optimal(&self) -> bool {
        self.status.is_optimal()
    }

    pub fn first_input(&self) -> &DVector<f64> {
        &self.v_star[0]
    }

    fn infeasible(cfg: &Ps2fConfig, x: &DVector<f64>, iterations: usize) -> Self {
        let m = cfg.input_dim();
        let v_star = vec![DVector::zeros(m); cfg.n];
        let z_star = cfg.model.rollout(x, &v_star);
        Self { v_star, z_star, value: f64::INFINITY, status: SolveStatus::new(SolveOutcome::Infeasible, f64::INFINITY, iterations) }
    }
}

pub fn sqp_options(cfg: &Ps2fConfig) -> SqpOptions {
    if cfg.model.is_linear() {
        SqpOptions::new(LINEAR_TOL)
    } else {
        SqpOptions::new(NONLINEAR_TOL)
    }
}

pub fn terminal_constraint(cfg: &Ps2fConfig) -> Terminal {
    match &cfg.xf {
        TerminalSet::Ellipsoid { p, gamma } => Terminal::Ellipsoid { p: p.clone(), gamma: *gamma },
        TerminalSet::Origin => Terminal::Fixed(DVector::zeros(cfg.state_dim())),
        TerminalSet::None => Terminal::Free,
    }
}

fn nominal_spec(cfg: &Ps2fConfig) -> OcpSpec {
    let h = cfg.n;
    OcpSpec {
        horizon: h,
        objective: TrajQuad::regulation(&cfg.cost.q, &cfg.cost.r, &cfg.cost.p_f, h),
        terminal: terminal_constraint(cfg),
        state_box_steps: (1..=h).collect(),
        state_box: Some(cfg.x_set.clone()),
        input_box: Some(cfg.u_set.clone()),
        performance: None,
        fixed_first_input: None,
    }
}

/// `sum l(z_i, v_i) + V_f(z_N)`.
pub fn trajectory_cost(cfg: &Ps2fConfig, zs: &[DVector<f64>], vs: &[DVector<f64>]) -> f64 {
    cfg.cost.path(zs, vs) + cfg.cost.terminal(&zs[vs.len()])
}

/// Whether `(zs, vs)` satisfies every constraint of the nominal problem.
pub fn trajectory_feasible(cfg: &Ps2fConfig, zs: &[DVector<f64>], vs: &[DVector<f64>], tol: f64) -> bool {
    vs.iter().all(|v| cfg.u_set.contains(v, tol))
        && zs.iter().all(|z| cfg.x_set.contains(z, tol))
        && cfg.xf.contains(&zs[vs.len()], tol)
}

/// Solves the nominal problem at `x`. `warm` is an input-sequence guess of
/// length `N`; without one the solver starts from zero inputs.
pub fn solve_nominal(cfg: &Ps2fConfig, x: &DVector<f64>, warm: Option<&[DVector<f64>]>) -> Result<NominalSolution, OptError> {
    if x.len() != cfg.state_dim() {
        return Err(OptError::Dimension("state".into()));
    }
    if !cfg.x_set.contains(x, 0.0) {
        return Ok(NominalSolution::infeasible(cfg, x, 0));
    }
    let ocp = OcpProblem::new(&cfg.model, x.clone(), nominal_spec(cfg), Layout::for_model(&cfg.model));
    let m = cfg.input_dim();
    let guess: Vec<DVector<f64>> = match warm {
        Some(w) if w.len() == cfg.n => w.to_vec(),
        _ => vec![DVector::zeros(m); cfg.n],
    };
    let xs = cfg.model.rollout(x, &guess);
    let z0 = ocp.pack(&guess, &xs);
    let sol = ocp.solve(&z0, &sqp_options(cfg))?;
    Ok(finish(cfg, &ocp, sol))
}

fn finish(cfg: &Ps2fConfig, ocp: &OcpProblem<'_>, sol: NlpSolution) -> NominalSolution {
    let (v_star, z_star) = ocp.unpack(&sol.z);
    let mut status = sol.status;
    if status.is_optimal() && !trajectory_feasible(cfg, &z_star, &v_star, TRAJ_TOL) {
        status.outcome = SolveOutcome::NumericalFailure;
    }
    let value = if status.outcome == SolveOutcome::Infeasible { f64::INFINITY } else { trajectory_cost(cfg, &z_star, &v_star) };
    NominalSolution { v_star, z_star, value, status }
}

/// Previous solution shifted by one step, with the terminal controller's
/// action appended (zero when no gain is available).
pub fn shift_warm_start(cfg: &Ps2fConfig, prev: &NominalSolution) -> Vec<DVector<f64>> {
    let mut out: Vec<DVector<f64>> = prev.v_star.iter().skip(1).cloned().collect();
    out.push(terminal_action(cfg, &prev.z_star[prev.v_star.len()]));
    out
}

/// Input appended after the horizon in the recursive-feasibility candidate.
pub fn terminal_action(cfg: &Ps2fConfig, z_end: &DVector<f64>) -> DVector<f64> {
    match (&cfg.xf, &cfg.terminal_gain) {
        (TerminalSet::Ellipsoid { .. }, Some(k)) => -(k * z_end),
        _ => DVector::zeros(cfg.input_dim()),
    }
}

/// Feasibility of the nominal problem at each state (solver failures count as infeasible).
pub fn feasible_region_probe(cfg: &Ps2fConfig, states: &[DVector<f64>], exec: Execution) -> Vec<bool> {
    map_indexed(states.len(), exec, |i| {
        solve_nominal(cfg, &states[i], None).map(|s| s.is_optimal()).unwrap_or(false)
    })
}
