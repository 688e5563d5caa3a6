mod common;

use std::fs;
use std::process::Command;

use common::{linear_config, no_terminal_config, options, read_json};
use ps2f_cli::commands::{self, LogFormat, Variant, CASE1_SNAPSHOTS};
use ps2f_cli::configs;
use ps2f_cli::summary::{BoundaryFile, RunSummary, SweepSummary, BOUNDARY_SCHEMA, SUMMARY_SCHEMA};
use ps2f_cli::wire::TelemetryFrame;
use ps2f_core::cases::{case1_config, case3_config};
use ps2f_core::config::Ps2fConfig;
use ps2f_core::sim::{ClosedLoopLog, SweepParam};

#[test]
fn embedded_configs_match_the_reference_cases() {
    let c1 = Ps2fConfig::from_json(configs::CASE1_JSON).unwrap();
    assert_eq!(c1.to_spec().unwrap(), case1_config().to_spec().unwrap());
    let c3 = Ps2fConfig::from_json(configs::CASE3_JSON).unwrap();
    assert_eq!(c3.to_spec().unwrap(), case3_config().to_spec().unwrap());
    assert_eq!(configs::sample_time(&c3), Some(0.2));
    assert_eq!(configs::sample_time(&c1), None);
}

#[test]
fn dare_reproduces_the_reference_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let report = commands::dare(None, Some(dir.path())).unwrap();
    let expected = [[10.92, 0.92], [0.92, 11.85]];
    for i in 0..2 {
        for j in 0..2 {
            assert!((report.p[i][j] - expected[i][j]).abs() <= 0.01, "P[{i}][{j}] = {}", report.p[i][j]);
        }
    }
    assert!((report.gamma - 7.28).abs() <= 0.05);
    let text = report.render();
    assert!(text.contains("10.9156") && text.contains("11.8495"), "{text}");
    assert!(text.contains("gamma = 7.2799"), "{text}");
    let json = read_json(&dir.path().join("dare.json"));
    assert_eq!(json["schema"], "ps2f-dare-v1");
    assert_eq!(json["P"][0][0].as_f64().unwrap(), report.p[0][0]);
}

#[test]
fn dare_scalar_and_zero_dynamics() {
    let dir = tempfile::tempdir().unwrap();
    let golden = linear_config(dir.path(), "golden.json", &[&[1.0]], &[&[1.0]], &[&[1.0]], &[&[1.0]]);
    let r = commands::dare(Some(&golden), None).unwrap();
    assert!(r.render().contains("1.6180"), "{}", r.render());
    assert!((r.p[0][0] - (1.0 + 5f64.sqrt()) / 2.0).abs() <= 1e-9);

    let zero = linear_config(
        dir.path(),
        "zero.json",
        &[&[0.0, 0.0], &[0.0, 0.0]],
        &[&[1.0, 0.0], &[0.0, 1.0]],
        &[&[3.0, 1.0], &[1.0, 2.0]],
        &[&[1.0, 0.0], &[0.0, 1.0]],
    );
    let r = commands::dare(Some(&zero), None).unwrap();
    assert_eq!(r.p, vec![vec![3.0, 1.0], vec![1.0, 2.0]]);
}

#[test]
fn dare_rejects_uncontrollable_pairs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = linear_config(
        dir.path(),
        "unc.json",
        &[&[1.2, 0.0], &[0.0, 1.0]],
        &[&[0.0], &[1.0]],
        &[&[1.0, 0.0], &[0.0, 1.0]],
        &[&[1.0]],
    );
    let err = commands::dare(Some(&cfg), None).unwrap_err();
    assert!(err.to_string().contains("not controllable"), "{err}");
}

#[test]
fn dare_rejects_nonlinear_models() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("uni.json");
    fs::write(&path, configs::CASE3_JSON).unwrap();
    assert!(commands::dare(Some(&path), None).is_err());
}

#[test]
fn case1_summary_and_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let mut opts = options(dir.path());
    opts.grid = Some(11);
    let summary = commands::case1(&opts).unwrap();
    assert!(summary.passed);
    assert_eq!(summary.schema, SUMMARY_SCHEMA);
    assert_eq!(summary.steps, 100);
    assert_eq!(summary.violations, 0);
    assert!(summary.max_decrease_slack.unwrap() <= 1e-5);
    assert!(summary.final_state_norm <= 1e-2);

    let on_disk: RunSummary = serde_json::from_value(read_json(&dir.path().join("summary.json"))).unwrap();
    assert_eq!(on_disk, summary);
    let boundary: BoundaryFile = serde_json::from_value(read_json(&dir.path().join("boundary.json"))).unwrap();
    assert_eq!(boundary.schema, BOUNDARY_SCHEMA);
    assert_eq!(boundary.resolution, 11);
    let ks: Vec<usize> = boundary.snapshots.iter().map(|s| s.k).collect();
    assert_eq!(ks, CASE1_SNAPSHOTS.to_vec());
    assert!(boundary.snapshots.iter().all(|s| !s.loops.is_empty() && s.loops.iter().all(|l| !l.is_empty())));

    let csv = fs::read_to_string(dir.path().join("log.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 101);
    assert!(csv.starts_with("k,x0,x1,"));
}

#[test]
fn case1_jsonl_log_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let mut opts = options(dir.path());
    opts.format = LogFormat::Jsonl;
    opts.steps = Some(20);
    commands::case1(&opts).unwrap();
    assert!(!dir.path().join("log.csv").exists());
    assert!(!dir.path().join("boundary.json").exists());
    let log = ClosedLoopLog::from_jsonl(&fs::read_to_string(dir.path().join("log.jsonl")).unwrap()).unwrap();
    assert_eq!(log.schema, "ps2f-log-v1");
    assert_eq!(log.steps.len(), 20);
}

#[test]
fn outputs_are_identical_across_runs() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for dir in [&a, &b] {
        let mut opts = options(dir.path());
        opts.grid = Some(9);
        commands::case1(&opts).unwrap();
        let mut opts = options(&dir.path().join("case3"));
        opts.steps = Some(12);
        opts.grid = Some(5);
        commands::case3(&opts, Variant::Ps2f, Some(5)).unwrap();
    }
    for name in ["summary.json", "boundary.json", "log.csv", "case3/summary.json", "case3/log.csv", "case3/frames.jsonl"] {
        let x = fs::read(a.path().join(name)).unwrap();
        let y = fs::read(b.path().join(name)).unwrap();
        assert!(x == y, "{name} differs between runs");
    }
}

#[test]
fn failed_decrease_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let mut opts = options(dir.path());
    opts.config = Some(no_terminal_config(dir.path(), 5, 5));
    let summary = commands::case1(&opts).unwrap();
    assert!(!summary.passed);
    let failed = summary.failed_invariant.unwrap();
    assert_eq!(failed.invariant, "lyapunov_decrease");
    // the log stops at the failing step
    assert_eq!(summary.steps, failed.k + 1);
    let on_disk = read_json(&dir.path().join("summary.json"));
    assert_eq!(on_disk["failed_invariant"]["invariant"], "lyapunov_decrease");
    assert!(dir.path().join("log.csv").exists());
}

#[test]
fn failed_recursive_feasibility_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let mut opts = options(dir.path());
    opts.config = Some(no_terminal_config(dir.path(), 2, 2));
    let summary = commands::case1(&opts).unwrap();
    assert_eq!(summary.failed_invariant.unwrap().invariant, "recursive_feasibility");
}

#[test]
fn assertions_off_runs_to_the_end() {
    let dir = tempfile::tempdir().unwrap();
    let mut opts = options(dir.path());
    opts.config = Some(no_terminal_config(dir.path(), 5, 5));
    opts.assertions = false;
    opts.steps = Some(30);
    let summary = commands::case1(&opts).unwrap();
    assert!(summary.passed);
    assert_eq!(summary.steps, 30);
    // the broken guarantee still shows in the slack
    assert!(summary.max_decrease_slack.unwrap() > 1e-5);
}

#[test]
fn case2_sweeps() {
    let dir = tempfile::tempdir().unwrap();
    let mut opts = options(dir.path());
    opts.grid = Some(11);
    let summary: SweepSummary = commands::case2(&opts).unwrap();
    assert!(summary.passed);
    assert_eq!(summary.sweeps.len(), 4);
    for entry in &summary.sweeps {
        assert!(dir.path().join(&entry.file).exists());
        if entry.monotone {
            assert_eq!(entry.nesting_flips, 0, "{}", entry.param);
            assert!(entry.members.windows(2).all(|w| w[0] <= w[1]), "{}: {:?}", entry.param, entry.members);
        }
    }
    let a = summary.entry(SweepParam::A).unwrap();
    assert!(a.members.last() > a.members.first());
    let n = summary.entry(SweepParam::N).unwrap();
    assert_eq!(n.nominal_status[0], "infeasible");
    assert!(n.nominal_status[1..].iter().all(|s| s == "optimal"));
    let file = read_json(&dir.path().join("sweep_n.json"));
    assert_eq!(file["param"], "n");
    assert_eq!(file["points"][0]["boundary"].as_array().unwrap().len(), 0);
}

#[test]
fn case3_baseline_violates_and_filter_does_not() {
    let dir = tempfile::tempdir().unwrap();
    let base = commands::case3(&options(&dir.path().join("base")), Variant::Baseline, Some(30)).unwrap();
    assert!(base.violations > 0);
    assert_eq!(base.variant.as_deref(), Some("baseline"));

    let filtered = commands::case3(&options(&dir.path().join("ps2f")), Variant::Ps2f, Some(30)).unwrap();
    assert!(filtered.passed);
    assert_eq!(filtered.violations, 0);
    assert_eq!(filtered.steps, 150);
    assert_eq!(filtered.decrease_from, 30);
    assert!(filtered.max_decrease_slack.unwrap() <= 1e-5);

    let frames = fs::read_to_string(dir.path().join("ps2f/frames.jsonl")).unwrap();
    let frames: Vec<TelemetryFrame> = frames.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(frames.len(), 150);
    assert!(frames.windows(2).all(|w| w[1].k == w[0].k + 1));
    assert!(frames.iter().all(|f| f.margins.min() >= -1e-8));
    assert!((frames[10].t_wall - 2.0).abs() < 1e-12);
    assert_eq!(frames[0].a, 100.0);
    assert_eq!(frames[30].a, 0.5);
}

#[test]
fn case3_other_switch_index_stays_safe() {
    let dir = tempfile::tempdir().unwrap();
    let mut opts = options(dir.path());
    opts.steps = Some(60);
    let s = commands::case3(&opts, Variant::Ps2f, Some(10)).unwrap();
    assert!(s.passed);
    assert_eq!(s.violations, 0);
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ps2f"))
}

#[test]
fn binary_dare_prints_four_decimals() {
    let out = bin().arg("dare").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("10.9156") && text.contains("gamma = 7.2799"), "{text}");
}

#[test]
fn binary_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = no_terminal_config(dir.path(), 5, 5);
    let out = bin()
        .args(["case1", "--grid", "0", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("run"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let summary = read_json(&dir.path().join("run/summary.json"));
    assert_eq!(summary["failed_invariant"]["invariant"], "lyapunov_decrease");

    let out = bin().args(["case1", "--assert", "off", "--steps", "5", "--grid", "0", "--config"]).arg(&cfg)
        .arg("--out").arg(dir.path().join("off")).output().unwrap();
    assert_eq!(out.status.code(), Some(0));

    let out = bin().args(["case1", "--config"]).arg(dir.path().join("missing.json")).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.json"));

    let out = bin().args(["case3", "--variant", "teleport"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}
