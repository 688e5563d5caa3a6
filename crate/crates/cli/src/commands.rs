//! The batch commands: closed-loop runs, parameter sweeps and the Riccati report.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::ValueEnum;
use nalgebra::DVector;
use serde::Serialize;

use ps2f_core::cases::{case3_schedule, CASE1_STEPS, CASE3_GOAL, CASE3_KS, CASE3_STEPS};
use ps2f_core::config::{matrix_to_rows, validate_config, Ps2fConfig, TerminalKind, TerminalSpec, Violation};
use ps2f_core::filter::{sample_s2_set, telemetry_boundary};
use ps2f_core::linear::{max_ellipsoid_level, solve_dare};
use ps2f_core::nominal::solve_nominal;
use ps2f_core::par::Execution;
use ps2f_core::schedule::ModeSchedule;
use ps2f_core::sim::{
    go_then_return, parameter_sweep_s2, run_closed_loop, run_unfiltered, ClosedLoopLog, CommandSource, SimError,
    SimOptions, SweepParam,
};

use crate::configs;
use crate::summary::{
    BoundaryFile, BoundarySnapshot, DareReport, FailedInvariant, RunSummary, SweepEntry, SweepSummary,
    BOUNDARY_SCHEMA, DARE_SCHEMA, SUMMARY_SCHEMA,
};
use crate::wire::TelemetryFrame;

/// Steps at which the double-integrator run records the input-set boundary.
pub const CASE1_SNAPSHOTS: [usize; 15] = [0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 15, 30, 70, 99];
pub const DEFAULT_GRID: usize = 41;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LogFormat {
    Csv,
    Jsonl,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Variant {
    /// Goal controller then return controller, unfiltered.
    Baseline,
    /// The same commands through the filter.
    Ps2f,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Baseline => "baseline",
            Variant::Ps2f => "ps2f",
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub config: Option<PathBuf>,
    pub out: PathBuf,
    pub steps: Option<usize>,
    /// Lattice resolution for boundary files; zero disables them.
    pub grid: Option<usize>,
    pub assertions: bool,
    pub format: LogFormat,
    pub timings: bool,
}

impl RunOptions {
    pub fn new(out: impl Into<PathBuf>) -> Self {
        Self { config: None, out: out.into(), steps: None, grid: None, assertions: true, format: LogFormat::Csv, timings: false }
    }

    fn sim(&self) -> SimOptions {
        SimOptions { assertions: self.assertions, record_timings: self.timings }
    }
}

fn write(dir: &Path, name: &str, text: &str) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write(dir, name, &text)
}

fn write_log(dir: &Path, log: &ClosedLoopLog, format: LogFormat) -> Result<()> {
    match format {
        LogFormat::Csv => write(dir, "log.csv", &log.to_csv()?),
        LogFormat::Jsonl => write(dir, "log.jsonl", &log.to_jsonl()),
    }
}

fn prepare(out: &Path) -> Result<()> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))
}

fn config_notes(cfg: &Ps2fConfig) -> Vec<String> {
    validate_config(cfg).violations.iter().map(|v| format!("{v:?}")).collect()
}

/// Splits a run result into its log and the failed check, if any.
fn settle(result: Result<ClosedLoopLog, SimError>) -> Result<(ClosedLoopLog, Option<FailedInvariant>)> {
    match result {
        Ok(log) => Ok((log, None)),
        Err(SimError::Assertion { invariant, k, detail, log }) => {
            Ok((*log, Some(FailedInvariant { invariant: invariant.as_str().into(), k, detail })))
        }
        Err(e) => Err(e.into()),
    }
}

fn snapshots(cfg: &Ps2fConfig, log: &ClosedLoopLog, at: &[usize], resolution: usize) -> Result<Vec<BoundarySnapshot>> {
    let mut out = Vec::new();
    for step in log.steps.iter().filter(|s| at.contains(&s.k)) {
        let x = DVector::from_vec(step.x.clone());
        let nominal = solve_nominal(cfg, &x, None)?;
        if !nominal.is_optimal() {
            continue;
        }
        let (a, m) = (step.a.unwrap_or(cfg.a), step.m.unwrap_or(cfg.m));
        let grid = sample_s2_set(cfg, &x, &nominal, a, m, resolution, Execution::Parallel)?;
        out.push(BoundarySnapshot {
            k: step.k,
            x: step.x.clone(),
            a,
            m,
            u_ext: step.u_ext.clone(),
            u_applied: step.u.clone(),
            members: grid.count(ps2f_core::filter::Membership::Member),
            indeterminate: grid.count(ps2f_core::filter::Membership::Indeterminate),
            loops: grid.boundary(),
        });
    }
    Ok(out)
}

/// Double integrator from `(2, -2)` tracking the reference signal.
pub fn case1(opts: &RunOptions) -> Result<RunSummary> {
    prepare(&opts.out)?;
    let cfg = configs::load(opts.config.as_deref(), configs::CASE1_JSON)?;
    let x0 = DVector::from_vec(vec![2.0, -2.0]);
    if cfg.state_dim() != 2 || cfg.input_dim() != 2 {
        bail!("case1 needs a system with two states and two inputs");
    }
    let schedule = ModeSchedule::constant(cfg.a, cfg.m);
    let steps = opts.steps.unwrap_or(CASE1_STEPS);
    let (log, failed) =
        settle(run_closed_loop(&cfg, &x0, &CommandSource::Case1Signal, &schedule, steps, opts.sim()))?;
    write_log(&opts.out, &log, opts.format)?;
    let resolution = opts.grid.unwrap_or(DEFAULT_GRID);
    if resolution >= 2 {
        let file = BoundaryFile {
            schema: BOUNDARY_SCHEMA.into(),
            command: "case1".into(),
            resolution,
            snapshots: snapshots(&cfg, &log, &CASE1_SNAPSHOTS, resolution)?,
        };
        write_json(&opts.out, "boundary.json", &file)?;
    }
    let summary = RunSummary::from_log("case1", None, &log, 0, config_notes(&cfg), failed);
    write_json(&opts.out, "summary.json", &summary)?;
    Ok(summary)
}

/// Sweep values for each parameter, as `(param, file, values)`.
pub fn case2_sweeps() -> Vec<(SweepParam, &'static str, Vec<f64>)> {
    vec![
        (SweepParam::A, "sweep_a.json", vec![0.0, 0.25, 0.5, 0.75, 0.95]),
        (SweepParam::M, "sweep_m.json", vec![1.0, 2.0, 3.0, 4.0, 5.0]),
        (SweepParam::Rho, "sweep_rho.json", vec![1.0, 10.0, 100.0]),
        (SweepParam::N, "sweep_n.json", vec![1.0, 2.0, 3.0, 4.0, 5.0]),
    ]
}

/// The four parameter sweeps of the input set at `(2, -2)`.
pub fn case2(opts: &RunOptions) -> Result<SweepSummary> {
    prepare(&opts.out)?;
    let base = configs::load(opts.config.as_deref(), configs::CASE1_JSON)?;
    if base.state_dim() != 2 || base.input_dim() != 2 {
        bail!("case2 needs a system with two states and two inputs");
    }
    let x0 = DVector::from_vec(vec![2.0, -2.0]);
    let resolution = opts.grid.unwrap_or(DEFAULT_GRID).max(2);
    let mut sweeps = Vec::new();
    let mut failed = None;
    for (param, file, values) in case2_sweeps() {
        // the weight and horizon sweeps hold the other filter parameter at its reference value
        let cfg = match param {
            SweepParam::A | SweepParam::Rho => base.with_m(base.n),
            SweepParam::M | SweepParam::N => base.clone(),
        };
        let report = parameter_sweep_s2(&cfg, &x0, param, &values, resolution, Execution::Parallel)?;
        write_json(&opts.out, file, &report)?;
        let entry = SweepEntry::from_report(&report, file);
        if opts.assertions && entry.monotone && entry.nesting_flips > 0 && failed.is_none() {
            failed = Some(FailedInvariant {
                invariant: "set_nesting".into(),
                k: 0,
                detail: format!("{} cells leave the set as {} grows", entry.nesting_flips, entry.param),
            });
        }
        sweeps.push(entry);
    }
    let summary = SweepSummary {
        schema: SUMMARY_SCHEMA.into(),
        command: "case2".into(),
        state: x0.iter().copied().collect(),
        resolution,
        sweeps,
        passed: failed.is_none(),
        failed_invariant: failed,
    };
    write_json(&opts.out, "summary.json", &summary)?;
    Ok(summary)
}

/// Replay frames for a logged run; `t_wall` is simulation time.
pub fn replay_frames(cfg: &Ps2fConfig, log: &ClosedLoopLog, resolution: usize) -> Result<String> {
    let ts = configs::sample_time(cfg).unwrap_or(1.0);
    let mut out = String::new();
    for step in &log.steps {
        let boundary = if resolution >= 2 && step.value.is_some() {
            let x = DVector::from_vec(step.x.clone());
            let nominal = solve_nominal(cfg, &x, None)?;
            if nominal.is_optimal() {
                let (a, m) = (step.a.unwrap_or(cfg.a), step.m.unwrap_or(cfg.m));
                telemetry_boundary(&sample_s2_set(cfg, &x, &nominal, a, m, resolution, Execution::Parallel)?)
            } else {
                Vec::new()
            }
        } else {
            Vec::new()
        };
        out.push_str(&TelemetryFrame::from_record(step, step.k as f64 * ts, boundary).to_line());
    }
    Ok(out)
}

/// Unicycle go-and-return task, unfiltered or filtered.
pub fn case3(opts: &RunOptions, variant: Variant, ks: Option<usize>) -> Result<RunSummary> {
    prepare(&opts.out)?;
    let cfg = configs::load(opts.config.as_deref(), configs::CASE3_JSON)?;
    if cfg.state_dim() < CASE3_GOAL.len() || cfg.input_dim() != 2 {
        bail!("case3 needs a planar system with two inputs");
    }
    let ks = ks.unwrap_or(CASE3_KS);
    let steps = opts.steps.unwrap_or(CASE3_STEPS);
    let x0 = DVector::zeros(cfg.state_dim());
    let source = go_then_return(&cfg, &CASE3_GOAL, ks)?;
    let schedule: ModeSchedule = case3_schedule(ks);
    let (log, failed) = match variant {
        Variant::Baseline => (run_unfiltered(&cfg, &x0, &source, steps)?, None),
        Variant::Ps2f => settle(run_closed_loop(&cfg, &x0, &source, &schedule, steps, opts.sim()))?,
    };
    write_log(&opts.out, &log, opts.format)?;
    write(&opts.out, "frames.jsonl", &replay_frames(&cfg, &log, opts.grid.unwrap_or(0))?)?;
    let summary = RunSummary::from_log("case3", Some(variant.name()), &log, ks, config_notes(&cfg), failed);
    write_json(&opts.out, "summary.json", &summary)?;
    Ok(summary)
}

/// Riccati solution, LQR gain and terminal level of a linear configuration.
pub fn dare(config: Option<&Path>, out: Option<&Path>) -> Result<DareReport> {
    let mut spec = configs::load_spec(config, configs::CASE1_JSON)?;
    // resolve without the Riccati-derived parts so controllability is checked first
    spec.cost.p_f = Some(spec.cost.q.clone());
    spec.xf = TerminalSpec { kind: TerminalKind::None, p: None, gamma: None };
    spec.k = None;
    let cfg = spec.resolve()?;
    let Some((a, b)) = cfg.model.matrices() else {
        bail!("the Riccati report needs a linear model");
    };
    if let Some(Violation::Uncontrollable { rank, n }) =
        validate_config(&cfg).violations.into_iter().find(|v| matches!(v, Violation::Uncontrollable { .. }))
    {
        bail!("(A, B) is not controllable: controllability matrix has rank {rank} < {n}");
    }
    let ric = solve_dare(a, b, &cfg.cost.q, &cfg.cost.r)?;
    let gamma = max_ellipsoid_level(&ric.p, Some(&ric.k), &cfg.x_set, Some(&cfg.u_set))?;
    let report = DareReport {
        schema: DARE_SCHEMA.into(),
        p: matrix_to_rows(&ric.p),
        k: matrix_to_rows(&ric.k),
        gamma,
        residual: ric.residual,
        iterations: ric.iterations,
    };
    if let Some(dir) = out {
        prepare(dir)?;
        write_json(dir, "dare.json", &report)?;
    }
    Ok(report)
}
