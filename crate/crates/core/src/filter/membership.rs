use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::{check_filter_args, performance_value, FilterError, BOX_TOL, FILTER_TOL};
use crate::config::Ps2fConfig;
use crate::nominal::{sqp_options, NominalSolution};
use crate::ocp::{reference_budget, Layout, OcpProblem, OcpSpec, Terminal, TrajQuad};
use crate::opt::{SolveOutcome, SolveStatus};

/// Threshold on the minimized performance value.
pub const MEMBERSHIP_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Membership {
    Member,
    NonMember,
    Indeterminate,
}

impl Membership {
    /// CSV code: 1 member, 0 non-member, -1 indeterminate.
    pub fn code(self) -> i8 {
        match self {
            Membership::Member => 1,
            Membership::NonMember => 0,
            Membership::Indeterminate => -1,
        }
    }

    pub fn is_member(self) -> bool {
        self == Membership::Member
    }
}

#[derive(Debug, Clone)]
pub struct MembershipDetail {
    pub membership: Membership,
    /// Smallest performance value found over feasible tails (`+inf` if none).
    pub value: f64,
    pub status: SolveStatus,
}

/// Membership of `u0` in the safe-stable set at `x`.
///
/// The tail is chosen to minimize the stage-cost sum with `u(0) = u0`
/// pinned; `u0` is a member iff the minimum satisfies the performance
/// constraint. The minimizer does not depend on `a`.
pub fn membership_detail(
    cfg: &Ps2fConfig,
    x: &DVector<f64>,
    u0: &DVector<f64>,
    nominal: &NominalSolution,
    a: f64,
    m: usize,
) -> Result<MembershipDetail, FilterError> {
    check_filter_args(cfg, nominal, a, m)?;
    if u0.len() != cfg.input_dim() {
        return Err(FilterError::Command(u0.len(), cfg.input_dim()));
    }
    if !cfg.u_set.contains(u0, 0.0) {
        return Ok(MembershipDetail {
            membership: Membership::NonMember,
            value: f64::INFINITY,
            status: SolveStatus::new(SolveOutcome::Infeasible, 0.0, 0),
        });
    }
    let budget = reference_budget(cfg, &nominal.z_star, &nominal.v_star, m);
    let spec = OcpSpec {
        horizon: m,
        objective: TrajQuad::stage_sum(&cfg.cost.q, &cfg.cost.r, m),
        terminal: Terminal::Fixed(nominal.z_star[m].clone()),
        state_box_steps: (1..m).collect(),
        state_box: Some(cfg.x_set.clone()),
        input_box: Some(cfg.u_set.clone()),
        performance: None,
        fixed_first_input: Some(u0.clone()),
    };
    let ocp = OcpProblem::new(&cfg.model, x.clone(), spec, Layout::for_model(&cfg.model));
    let mut guess = nominal.v_star[..m].to_vec();
    guess[0] = u0.clone();
    let xs0 = cfg.model.rollout(x, &guess);
    let sol = ocp.solve(&ocp.pack(&guess, &xs0), &sqp_options(cfg))?;

    let (us, xs) = ocp.unpack(&sol.z);
    let feasible = (&xs[m] - &nominal.z_star[m]).amax() <= FILTER_TOL
        && xs[1..m].iter().all(|xi| cfg.x_set.contains(xi, BOX_TOL))
        && us.iter().all(|ui| cfg.u_set.contains(ui, BOX_TOL));
    let value = if feasible { performance_value(cfg, &xs, &us, budget, a) } else { f64::INFINITY };
    let membership = if feasible && value <= MEMBERSHIP_TOL {
        // a feasible witness settles it whatever the solver status
        Membership::Member
    } else {
        match sol.status.outcome {
            SolveOutcome::Optimal if feasible => Membership::NonMember,
            SolveOutcome::Infeasible if cfg.model.is_linear() => Membership::NonMember,
            _ => Membership::Indeterminate,
        }
    };
    Ok(MembershipDetail { membership, value, status: sol.status })
}

pub fn s2_membership(
    cfg: &Ps2fConfig,
    x: &DVector<f64>,
    u0: &DVector<f64>,
    nominal: &NominalSolution,
    a: f64,
    m: usize,
) -> Result<Membership, FilterError> {
    Ok(membership_detail(cfg, x, u0, nominal, a, m)?.membership)
}
