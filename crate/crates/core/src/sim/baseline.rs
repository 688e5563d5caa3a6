//! Unfiltered runs, including the go-then-return switcher.

use nalgebra::DVector;

use crate::cases::{case3_config, CASE3_GOAL, GO_DISCOUNT, GO_HORIZON};
use crate::config::Ps2fConfig;

use super::command::{CommandContext, CommandSource, GoalCommand};
use super::log::{ClosedLoopLog, LogEvent, StepRecord};
use super::SimError;

/// Applies the commands of `source` directly to the plant and logs the
/// margins. Nothing is asserted; leaving the constraint sets is recorded.
pub fn run_unfiltered(cfg: &Ps2fConfig, x0: &DVector<f64>, source: &CommandSource, steps: usize) -> Result<ClosedLoopLog, SimError> {
    let mut log = ClosedLoopLog::new(cfg.state_dim(), cfg.input_dim());
    let mut x = x0.clone();
    let mut prev = DVector::zeros(cfg.input_dim());
    for k in 0..steps {
        let draw = source.next(&CommandContext { k, x: &x, model: &cfg.model, nominal: None, previous: &prev })?;
        if let Some(message) = draw.note {
            log.events.push(LogEvent { k, message });
        }
        let u = draw.u;
        log.steps.push(StepRecord {
            k,
            x: x.iter().copied().collect(),
            u_ext: u.iter().copied().collect(),
            u: u.iter().copied().collect(),
            value: None,
            a: None,
            m: None,
            stage_cost: cfg.cost.stage(&x, &u),
            x_margins: cfg.x_set.margins(&x),
            u_margins: cfg.u_set.margins(&u),
            nominal_status: None,
            filter_status: None,
            used_fallback: false,
            t_nominal_ms: 0.0,
            t_filter_ms: 0.0,
        });
        x = cfg.model.step(&x, &u);
        prev = u;
    }
    log.final_state = x.iter().copied().collect();
    log.final_margins = cfg.x_set.margins(&x);
    Ok(log)
}

/// Go toward `target` until `ks`, then return toward the origin.
pub fn go_then_return(cfg: &Ps2fConfig, target: &[f64], ks: usize) -> Result<CommandSource, SimError> {
    let go = GoalCommand::new(DVector::from_column_slice(target), GO_HORIZON, GO_DISCOUNT, cfg.u_set.clone())?;
    let home = GoalCommand::new(DVector::zeros(target.len()), GO_HORIZON, GO_DISCOUNT, cfg.u_set.clone())?;
    Ok(CommandSource::Switched {
        ks,
        before: Box::new(CommandSource::DiscountedGoal(go)),
        after: Box::new(CommandSource::DiscountedGoal(home)),
    })
}

/// The two-controller unicycle baseline from the origin.
pub fn run_baseline_case3(ks: usize, steps: usize) -> Result<ClosedLoopLog, SimError> {
    let cfg = case3_config();
    let source = go_then_return(&cfg, &CASE3_GOAL, ks)?;
    run_unfiltered(&cfg, &DVector::zeros(3), &source, steps)
}
