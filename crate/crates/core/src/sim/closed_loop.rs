//! The filtered closed loop with runtime checks of the safety, decrease and
//! recursive-feasibility guarantees.

use std::time::Instant;

use nalgebra::DVector;

use crate::config::Ps2fConfig;
use crate::filter::{filter, truncated_nominal, FilterResult};
use crate::nominal::{solve_nominal, terminal_action, trajectory_cost, trajectory_feasible, NominalSolution};
use crate::schedule::ModeSchedule;

use super::command::{CommandContext, CommandSource};
use super::log::{ClosedLoopLog, LogEvent, StepRecord, MARGIN_TOL};
use super::{Invariant, SimError};

/// Allowed increase in the decrease inequality.
pub const DECREASE_TOL: f64 = 1e-5;
/// Constraint tolerance when checking the shifted candidate.
pub const CANDIDATE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimOptions {
    /// Abort on a failed runtime check.
    pub assertions: bool,
    /// Store wall-clock solve times; zero otherwise so logs are reproducible.
    pub record_timings: bool,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self { assertions: true, record_timings: false }
    }
}

/// Input sequence for the next state built from the applied stack: the
/// filtered tail, the remaining nominal inputs, then the terminal action.
pub fn shifted_candidate(cfg: &Ps2fConfig, nominal: &NominalSolution, applied: &FilterResult) -> Vec<DVector<f64>> {
    let m = applied.u_stack.len();
    let mut out: Vec<DVector<f64>> = applied.u_stack[1..].to_vec();
    out.extend(nominal.v_star[m..].iter().cloned());
    out.push(terminal_action(cfg, &nominal.z_star[nominal.v_star.len()]));
    out
}

fn elapsed_ms(t: Instant, on: bool) -> f64 {
    if on {
        t.elapsed().as_secs_f64() * 1e3
    } else {
        0.0
    }
}

fn fail(log: &ClosedLoopLog, k: usize, invariant: Invariant, detail: String) -> SimError {
    SimError::Assertion { invariant, k, detail, log: Box::new(log.clone()) }
}

/// One filtered closed-loop session, advanced a step at a time.
pub struct Session {
    cfg: Ps2fConfig,
    schedule: ModeSchedule,
    opts: SimOptions,
    x: DVector<f64>,
    k: usize,
    nominal: NominalSolution,
    t_nominal_ms: f64,
    last_command: DVector<f64>,
    a_override: Option<f64>,
    log: ClosedLoopLog,
}

impl Session {
    pub fn new(cfg: Ps2fConfig, x0: DVector<f64>, schedule: ModeSchedule, opts: SimOptions) -> Result<Self, SimError> {
        let problems = schedule.check(cfg.n);
        if !problems.is_empty() {
            return Err(SimError::Config(problems.join("; ")));
        }
        if x0.len() != cfg.state_dim() {
            return Err(SimError::Config(format!("initial state has dimension {}, expected {}", x0.len(), cfg.state_dim())));
        }
        let t = Instant::now();
        let nominal = solve_nominal(&cfg, &x0, None)?;
        if !nominal.is_optimal() {
            return Err(SimError::InitialInfeasible(nominal.status.outcome));
        }
        let mut log = ClosedLoopLog::new(cfg.state_dim(), cfg.input_dim());
        log.final_state = x0.iter().copied().collect();
        log.final_margins = cfg.x_set.margins(&x0);
        log.final_value = Some(nominal.value);
        Ok(Self {
            last_command: DVector::zeros(cfg.input_dim()),
            t_nominal_ms: elapsed_ms(t, opts.record_timings),
            cfg,
            schedule,
            opts,
            x: x0,
            k: 0,
            nominal,
            a_override: None,
            log,
        })
    }

    pub fn config(&self) -> &Ps2fConfig {
        &self.cfg
    }

    pub fn schedule(&self) -> &ModeSchedule {
        &self.schedule
    }

    pub fn state(&self) -> &DVector<f64> {
        &self.x
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn nominal(&self) -> &NominalSolution {
        &self.nominal
    }

    pub fn log(&self) -> &ClosedLoopLog {
        &self.log
    }

    pub fn into_log(self) -> ClosedLoopLog {
        self.log
    }

    /// Performance weight used at the next step.
    pub fn current_a(&self) -> f64 {
        self.a_override.unwrap_or_else(|| self.schedule.a_at(self.k))
    }

    pub fn current_m(&self) -> usize {
        self.schedule.m_at(self.k).clamp(1, self.cfg.n)
    }

    /// Replaces the scheduled `a(k)` from now on (`None` restores the schedule).
    pub fn set_a_override(&mut self, a: Option<f64>) {
        self.a_override = a;
    }

    pub fn note(&mut self, message: impl Into<String>) {
        self.log.events.push(LogEvent { k: self.k, message: message.into() });
    }

    /// Moves the plant to `x` without resetting the time index.
    pub fn reset(&mut self, x: DVector<f64>) -> Result<(), SimError> {
        if x.len() != self.cfg.state_dim() {
            return Err(SimError::Config(format!("state has dimension {}, expected {}", x.len(), self.cfg.state_dim())));
        }
        let nominal = solve_nominal(&self.cfg, &x, None)?;
        if !nominal.is_optimal() {
            return Err(SimError::InitialInfeasible(nominal.status.outcome));
        }
        self.x = x;
        self.nominal = nominal;
        self.last_command = DVector::zeros(self.cfg.input_dim());
        self.log.final_state = self.x.iter().copied().collect();
        self.log.final_margins = self.cfg.x_set.margins(&self.x);
        self.log.final_value = Some(self.nominal.value);
        self.note(format!("reset to {:?}", self.log.final_state));
        Ok(())
    }


    /// Draws a command from `source` and advances one step.
    pub fn step(&mut self, source: &CommandSource) -> Result<StepRecord, SimError> {
        let draw = source.next(&CommandContext {
            k: self.k,
            x: &self.x,
            model: &self.cfg.model,
            nominal: Some(&self.nominal),
            previous: &self.last_command,
        })?;
        if let Some(note) = draw.note {
            self.note(note);
        }
        self.step_with(draw.u)
    }

    /// Filters `u_ext`, applies the result and solves the nominal problem at
    /// the successor state.
    pub fn step_with(&mut self, u_ext: DVector<f64>) -> Result<StepRecord, SimError> {
        let cfg = &self.cfg;
        if u_ext.len() != cfg.input_dim() {
            return Err(SimError::Config(format!("command has dimension {}, expected {}", u_ext.len(), cfg.input_dim())));
        }
        let a = self.current_a();
        let m = self.current_m();

        let t = Instant::now();
        let res = if self.nominal.is_optimal() {
            filter(cfg, &self.x, &u_ext, &self.nominal, a, m)?
        } else {
            // the nominal sequence is the feasible shifted candidate here
            truncated_nominal(cfg, &u_ext, &self.nominal, a, m, self.nominal.status)
        };
        let t_filter_ms = elapsed_ms(t, self.opts.record_timings);

        let u = res.u_applied.clone();
        let record = StepRecord {
            k: self.k,
            x: self.x.iter().copied().collect(),
            u_ext: u_ext.iter().copied().collect(),
            u: u.iter().copied().collect(),
            value: Some(self.nominal.value),
            a: Some(a),
            m: Some(m),
            stage_cost: cfg.cost.stage(&self.x, &u),
            x_margins: cfg.x_set.margins(&self.x),
            u_margins: cfg.u_set.margins(&u),
            nominal_status: Some(self.nominal.status.outcome),
            filter_status: Some(res.status.outcome),
            used_fallback: res.used_fallback,
            t_nominal_ms: self.t_nominal_ms,
            t_filter_ms,
        };
        self.log.steps.push(record.clone());
        if res.used_fallback {
            let message = format!("filter {}; truncated nominal input applied", res.status.outcome);
            self.log.events.push(LogEvent { k: self.k, message });
        }
        if self.opts.assertions && record.min_margin() < -MARGIN_TOL {
            let detail = format!("minimum margin {:e}", record.min_margin());
            return Err(fail(&self.log, self.k, Invariant::Safety, detail));
        }

        let x_next = cfg.model.step(&self.x, &u);
        let candidate = shifted_candidate(cfg, &self.nominal, &res);
        let cand_states = cfg.model.rollout(&x_next, &candidate);
        let cand_ok = trajectory_feasible(cfg, &cand_states, &candidate, CANDIDATE_TOL);
        if self.opts.assertions && !cand_ok {
            return Err(fail(&self.log, self.k, Invariant::RecursiveFeasibility, "shifted candidate violates a constraint".into()));
        }

        let t = Instant::now();
        let mut next = solve_nominal(cfg, &x_next, Some(&candidate))?;
        if !next.is_optimal() {
            let cold = solve_nominal(cfg, &x_next, None)?;
            if cold.is_optimal() {
                next = cold;
            }
        }
        self.t_nominal_ms = elapsed_ms(t, self.opts.record_timings);
        if !next.is_optimal() {
            if !cand_ok {
                let detail = format!("nominal problem {} at x(k+1)", next.status.outcome);
                return Err(fail(&self.log, self.k, Invariant::RecursiveFeasibility, detail));
            }
            // the certified candidate stands in for the unsolved problem, flagged by its status
            let message = format!("nominal solver {} at x(k+1); shifted candidate kept", next.status.outcome);
            self.log.events.push(LogEvent { k: self.k, message });
            next = NominalSolution {
                value: trajectory_cost(cfg, &cand_states, &candidate),
                v_star: candidate,
                z_star: cand_states,
                status: next.status,
            };
        }

        if self.opts.assertions && a < 1.0 && self.nominal.is_optimal() {
            let slack = next.value - self.nominal.value + (1.0 - a) * record.stage_cost;
            if slack > DECREASE_TOL {
                return Err(fail(&self.log, self.k, Invariant::Decrease, format!("decrease slack {slack:e}")));
            }
        }

        self.x = x_next;
        self.nominal = next;
        self.last_command = u_ext;
        self.k += 1;
        self.log.final_state = self.x.iter().copied().collect();
        self.log.final_margins = self.cfg.x_set.margins(&self.x);
        self.log.final_value = Some(self.nominal.value);
        Ok(record)
    }
}

/// Runs `steps` filtered steps from `x0`.
pub fn run_closed_loop(
    cfg: &Ps2fConfig,
    x0: &DVector<f64>,
    source: &CommandSource,
    schedule: &ModeSchedule,
    steps: usize,
    opts: SimOptions,
) -> Result<ClosedLoopLog, SimError> {
    let mut session = Session::new(cfg.clone(), x0.clone(), schedule.clone(), opts)?;
    for _ in 0..steps {
        session.step(source)?;
    }
    Ok(session.into_log())
}
