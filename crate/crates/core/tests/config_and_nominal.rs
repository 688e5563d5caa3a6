mod common;

use common::{rng, uniform_vec, v2};
use nalgebra::{DMatrix, DVector};
use ps2f_core::cases::{case1_config, case1_config_with, case1_initial_state, case3_config};
use ps2f_core::config::{validate_config, Ps2fConfig, Violation};
use ps2f_core::nominal::{feasible_region_probe, solve_nominal, trajectory_cost, trajectory_feasible, TRAJ_TOL};
use ps2f_core::opt::SolveOutcome;
use ps2f_core::par::Execution;
use ps2f_core::sets::{BoxSet, TerminalSet};

#[test]
fn reference_configs_validate() {
    assert!(validate_config(&case1_config()).is_valid(), "{:?}", validate_config(&case1_config()).violations);
    assert!(validate_config(&case3_config()).is_valid(), "{:?}", validate_config(&case3_config()).violations);
}

#[test]
fn horizon_order_is_reported() {
    let cfg = case1_config();
    let bad = Ps2fConfig { m: cfg.n + 1, ..cfg };
    assert!(validate_config(&bad).has(|v| matches!(v, Violation::HorizonOrder { .. })));
}

#[test]
fn input_set_without_origin_is_reported() {
    let cfg = case1_config();
    let bad = Ps2fConfig { u_set: BoxSet::from_slices(&[0.5, 0.5], &[1.0, 1.0]).unwrap(), ..cfg };
    assert!(validate_config(&bad).has(|v| matches!(v, Violation::OriginNotInterior { .. })));
}

#[test]
fn uncontrollable_pair_is_reported() {
    let mut cfg = case1_config();
    cfg.model = ps2f_core::model::SystemModel::linear(
        DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]),
        DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]),
    );
    assert!(validate_config(&cfg).has(|v| matches!(v, Violation::Uncontrollable { .. })));
}

#[test]
fn terminal_weight_without_decrease_is_reported() {
    let mut cfg = case1_config();
    let weak = DMatrix::identity(2, 2);
    cfg.cost.p_f = weak.clone();
    cfg.xf = TerminalSet::Ellipsoid { p: weak, gamma: 1.0 };
    // V_f(A_cl x) - V_f(x) <= -l(x, -Kx) cannot hold with Q = 10 I
    assert!(validate_config(&cfg).has(|v| matches!(v, Violation::TerminalNotInvariant { .. })));
}

#[test]
fn validation_is_deterministic() {
    let cfg = case1_config();
    assert_eq!(format!("{:?}", validate_config(&cfg)), format!("{:?}", validate_config(&cfg)));
}

#[test]
fn config_json_round_trip() {
    for cfg in [case1_config(), case3_config()] {
        let text = serde_json::to_string(&cfg.to_spec().unwrap()).unwrap();
        let back = Ps2fConfig::from_json(&text).unwrap();
        assert_eq!(back.n, cfg.n);
        assert_eq!(back.m, cfg.m);
        assert_eq!(back.a, cfg.a);
        assert!((&back.cost.p_f - &cfg.cost.p_f).amax() < 1e-12);
        assert_eq!(back.xf.kind_str(), cfg.xf.kind_str());
    }
}

#[test]
fn nominal_at_origin_is_zero() {
    for cfg in [case1_config(), case3_config()] {
        let x = DVector::zeros(cfg.state_dim());
        let sol = solve_nominal(&cfg, &x, None).unwrap();
        assert!(sol.is_optimal());
        assert!(sol.value.abs() < 1e-12);
        assert!(sol.v_star.iter().all(|v| v.amax() < 1e-9));
        assert!(sol.z_star.iter().all(|z| z.amax() < 1e-9));
    }
}

#[test]
fn nominal_case1_corner() {
    let cfg = case1_config();
    let x = case1_initial_state();
    let sol = solve_nominal(&cfg, &x, None).unwrap();
    assert!(sol.is_optimal());
    // cost consistency against an independent re-evaluation
    let xs = cfg.model.rollout(&x, &sol.v_star);
    let mut v = cfg.cost.terminal(&xs[cfg.n]);
    for i in 0..cfg.n {
        v += cfg.cost.stage(&xs[i], &sol.v_star[i]);
    }
    assert!((v - sol.value).abs() <= 1e-9 * v);
    assert!((trajectory_cost(&cfg, &xs, &sol.v_star) - v).abs() <= 1e-9 * v);
    assert!(trajectory_feasible(&cfg, &xs, &sol.v_star, TRAJ_TOL));
}

#[test]
fn single_step_horizon_is_infeasible_at_corner() {
    let cfg = case1_config_with(10.0, 1, 1, 0.95).unwrap();
    let sol = solve_nominal(&cfg, &case1_initial_state(), None).unwrap();
    assert_eq!(sol.status.outcome, SolveOutcome::Infeasible);
}

#[test]
fn feasibility_probe_on_case1_lattice() {
    let cfg = case1_config();
    let r = 41;
    let axis = cfg.x_set.lattice_axis(0, r);
    let states: Vec<DVector<f64>> = axis.iter().flat_map(|&a| axis.iter().map(move |&b| v2(a, b))).collect();
    let seq = feasible_region_probe(&cfg, &states, Execution::Sequential);
    let coarse: Vec<DVector<f64>> = states.iter().step_by(7).cloned().collect();
    let coarse_seq: Vec<bool> = seq.iter().step_by(7).copied().collect();
    assert_eq!(feasible_region_probe(&cfg, &coarse, Execution::Parallel), coarse_seq);
    let corner = states.iter().position(|s| (s - v2(2.0, -2.0)).amax() < 1e-12).unwrap();
    assert!(seq[corner]);
    // inside the terminal set everything is feasible
    for (s, ok) in states.iter().zip(&seq) {
        if cfg.xf.contains(s, 0.0) {
            assert!(ok, "{s}");
        }
    }
    // the corner driving away from the origin cannot be recovered in time
    let far = states.iter().position(|s| (s - v2(2.0, 2.0)).amax() < 1e-12).unwrap();
    assert!(!seq[far]);
    let outside = vec![v2(2.5, 0.0), v2(0.0, -3.0)];
    assert_eq!(feasible_region_probe(&cfg, &outside, Execution::Parallel), vec![false, false]);
}

#[test]
fn nominal_closed_loop_keeps_feasibility_and_decreases() {
    let cfg = case1_config();
    let mut g = rng(17);
    let mut runs = 0;
    while runs < 10 {
        let mut x = uniform_vec(&mut g, 2, 2.0);
        let mut sol = solve_nominal(&cfg, &x, None).unwrap();
        if !sol.is_optimal() {
            continue;
        }
        runs += 1;
        for _ in 0..20 {
            let u = sol.first_input().clone();
            let next_x = cfg.model.step(&x, &u);
            let next = solve_nominal(&cfg, &next_x, None).unwrap();
            assert!(next.is_optimal(), "lost feasibility at {next_x}");
            assert!(next.value <= sol.value - cfg.cost.stage(&x, &u) + 1e-6);
            x = next_x;
            sol = next;
        }
    }
}

#[test]
fn unicycle_nominal_from_random_states() {
    let cfg = case3_config();
    let mut g = rng(2);
    for _ in 0..10 {
        let x = uniform_vec(&mut g, 3, 0.1);
        let sol = solve_nominal(&cfg, &x, None).unwrap();
        if sol.is_optimal() {
            let xs = cfg.model.rollout(&x, &sol.v_star);
            assert!(xs[cfg.n].amax() <= 1e-6);
            assert!(trajectory_feasible(&cfg, &xs, &sol.v_star, 1e-6));
        }
    }
}
