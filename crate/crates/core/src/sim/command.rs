//! External command generators.

use std::sync::{Arc, Mutex};

use nalgebra::DVector;

use crate::model::SystemModel;
use crate::nominal::NominalSolution;
use crate::ocp::{Layout, OcpProblem, OcpSpec, Terminal, TrajQuad};
use crate::opt::{OptError, SolveStatus, SqpOptions, LINEAR_TOL, NONLINEAR_TOL};
use crate::sets::BoxSet;

use super::SimError;

/// What a command source may look at when producing `u_ext(k)`.
pub struct CommandContext<'a> {
    pub k: usize,
    pub x: &'a DVector<f64>,
    pub model: &'a SystemModel,
    /// Nominal solution at `x`, absent for unfiltered runs.
    pub nominal: Option<&'a NominalSolution>,
    /// Command issued at the previous step (zero at `k = 0`).
    pub previous: &'a DVector<f64>,
}

/// A drawn command plus an optional note for the log.
#[derive(Debug, Clone)]
pub struct CommandDraw {
    pub u: DVector<f64>,
    pub note: Option<String>,
}

impl CommandDraw {
    fn plain(u: DVector<f64>) -> Self {
        Self { u, note: None }
    }
}

/// Discounted goal-reaching controller: minimizes
/// `sum_{i<H} discount^i |p(i) - target|^2` over bounded inputs, where `p`
/// is the leading part of the state.
#[derive(Debug, Clone)]
pub struct GoalCommand {
    pub target: DVector<f64>,
    pub horizon: usize,
    pub discount: f64,
    pub bounds: BoxSet,
}

impl GoalCommand {
    pub fn new(target: DVector<f64>, horizon: usize, discount: f64, bounds: BoxSet) -> Result<Self, SimError> {
        if horizon < 1 {
            return Err(SimError::Config("goal horizon must be at least 1".into()));
        }
        if !(discount > 0.0 && discount < 1.0) {
            return Err(SimError::Config(format!("goal discount must lie in (0, 1), got {discount}")));
        }
        Ok(Self { target, horizon, discount, bounds })
    }
}

/// Restarts allowed when the goal solve stops at a saddle point.
const GOAL_RESTARTS: usize = 4;

/// First input of the discounted goal problem at `x`, solved by SQP from a
/// zero input guess. A zero speed makes every turn-rate derivative vanish,
/// so the solve restarts along negative curvature instead of stopping there.
pub fn discounted_goal_command(
    model: &SystemModel,
    x: &DVector<f64>,
    goal: &GoalCommand,
) -> Result<(DVector<f64>, SolveStatus), OptError> {
    let n = model.state_dim();
    let m = model.input_dim();
    if goal.target.len() > n || goal.bounds.dim() != m {
        return Err(OptError::Dimension("goal target or input bounds".into()));
    }
    let h = goal.horizon;
    let spec = OcpSpec {
        horizon: h,
        objective: TrajQuad::discounted_goal(&goal.target, goal.discount, n, m, h),
        terminal: Terminal::Free,
        state_box_steps: Vec::new(),
        state_box: None,
        input_box: Some(goal.bounds.clone()),
        performance: None,
        fixed_first_input: None,
    };
    let ocp = OcpProblem::new(model, x.clone(), spec, Layout::for_model(model));
    let us = vec![DVector::zeros(m); h];
    let xs = model.rollout(x, &us);
    let tol = if model.is_linear() { LINEAR_TOL } else { NONLINEAR_TOL };
    let sol = ocp.solve_second_order(&ocp.pack(&us, &xs), &SqpOptions::new(tol), GOAL_RESTARTS)?;
    let (us, _) = ocp.unpack(&sol.z);
    Ok((us[0].clone(), sol.status))
}

/// Last-value-wins mailbox for commands from a live operator. Writers never
/// block readers for longer than a copy.
#[derive(Debug, Clone, Default)]
pub struct LiveCommand {
    slot: Arc<Mutex<Option<DVector<f64>>>>,
}

impl LiveCommand {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&self, u: DVector<f64>) {
        *self.slot.lock().unwrap_or_else(|e| e.into_inner()) = Some(u);
    }

    /// Forgets the last command, so readers see zero.
    pub fn clear(&self) {
        *self.slot.lock().unwrap_or_else(|e| e.into_inner()) = None;
    }

    pub fn get(&self, dim: usize) -> DVector<f64> {
        match &*self.slot.lock().unwrap_or_else(|e| e.into_inner()) {
            Some(u) if u.len() == dim => u.clone(),
            _ => DVector::zeros(dim),
        }
    }
}

#[derive(Debug, Clone)]
pub enum CommandSource {
    /// `u1 = -1.2 cos(0.2 k + 0.2)`, `u2 = 0.1 x2`, not clipped.
    Case1Signal,
    DiscountedGoal(GoalCommand),
    /// Recorded commands; the last one is held after the end.
    Replay(Vec<DVector<f64>>),
    Live(LiveCommand),
    Constant(DVector<f64>),
    /// The nominal first input `v*(0; x)`.
    NominalEcho,
    /// `before` for `k < ks`, `after` from then on.
    Switched { ks: usize, before: Box<CommandSource>, after: Box<CommandSource> },
}

impl CommandSource {
    pub fn next(&self, ctx: &CommandContext<'_>) -> Result<CommandDraw, SimError> {
        let m = ctx.model.input_dim();
        let draw = match self {
            CommandSource::Case1Signal => {
                if m != 2 || ctx.x.len() < 2 {
                    return Err(SimError::Config("the reference signal needs two inputs and two states".into()));
                }
                let u1 = -1.2 * (0.2 * ctx.k as f64 + 0.2).cos();
                CommandDraw::plain(DVector::from_vec(vec![u1, 0.1 * ctx.x[1]]))
            }
            CommandSource::DiscountedGoal(goal) => match discounted_goal_command(ctx.model, ctx.x, goal) {
                Ok((u, status)) if status.is_optimal() => CommandDraw::plain(u),
                Ok((_, status)) => CommandDraw {
                    u: ctx.previous.clone(),
                    note: Some(format!("goal controller {}; previous command held", status.outcome)),
                },
                Err(e) => return Err(SimError::Opt(e)),
            },
            CommandSource::Replay(seq) => {
                let u = seq.get(ctx.k).or(seq.last()).cloned().unwrap_or_else(|| DVector::zeros(m));
                CommandDraw::plain(u)
            }
            CommandSource::Live(live) => CommandDraw::plain(live.get(m)),
            CommandSource::Constant(u) => CommandDraw::plain(u.clone()),
            CommandSource::NominalEcho => match ctx.nominal {
                Some(nom) => CommandDraw::plain(nom.first_input().clone()),
                None => return Err(SimError::Config("nominal echo needs a nominal solution".into())),
            },
            CommandSource::Switched { ks, before, after } => {
                return if ctx.k < *ks { before.next(ctx) } else { after.next(ctx) };
            }
        };
        if draw.u.len() != m {
            return Err(SimError::Config(format!("command has dimension {}, expected {m}", draw.u.len())));
        }
        Ok(draw)
    }
}
