//! Property suites for the filter guarantees on the double integrator.

use nalgebra::DVector;
use proptest::prelude::*;
use ps2f_core::cases::case1_config;
use ps2f_core::filter::{filter, sample_s2_set, Membership};
use ps2f_core::nominal::solve_nominal;
use ps2f_core::opt::SolveOutcome;
use ps2f_core::par::Execution;
use ps2f_core::sim::nesting_flips;

fn state() -> impl Strategy<Value = DVector<f64>> {
    (-2.0f64..=2.0, -2.0f64..=2.0).prop_map(|(a, b)| DVector::from_vec(vec![a, b]))
}

fn command() -> impl Strategy<Value = DVector<f64>> {
    (-3.0f64..=3.0, -3.0f64..=3.0).prop_map(|(a, b)| DVector::from_vec(vec![a, b]))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn filter_is_never_infeasible_where_nominal_is(x in state(), u in command(), a in 0.0f64..1.0, m in 1usize..=5) {
        let cfg = case1_config();
        let nominal = solve_nominal(&cfg, &x, None).unwrap();
        prop_assume!(nominal.is_optimal());
        let res = filter(&cfg, &x, &u, &nominal, a, m).unwrap();
        prop_assert_ne!(res.status.outcome, SolveOutcome::Infeasible);
        prop_assert!(cfg.u_set.contains(&res.u_applied, 1e-8));
        prop_assert!(cfg.x_set.contains(&cfg.model.step(&x, &res.u_applied), 1e-8));
    }

    #[test]
    fn zero_weight_reproduces_nominal(x in state(), u in command(), m in 1usize..=5) {
        let cfg = case1_config();
        let nominal = solve_nominal(&cfg, &x, None).unwrap();
        prop_assume!(nominal.is_optimal());
        let res = filter(&cfg, &x, &u, &nominal, 0.0, m).unwrap();
        prop_assert!((&res.u_applied - nominal.first_input()).amax() <= 1e-6);
        let filtered = cfg.cost.path(&res.x_traj, &res.u_stack);
        let reference = cfg.cost.path(&nominal.z_star[..=m], &nominal.v_star[..m]);
        prop_assert!((filtered - reference).abs() <= 1e-6);
    }

    #[test]
    fn single_step_horizon_reproduces_nominal(x in state(), u in command(), a in 0.0f64..1.0) {
        let cfg = case1_config();
        let nominal = solve_nominal(&cfg, &x, None).unwrap();
        prop_assume!(nominal.is_optimal());
        let res = filter(&cfg, &x, &u, &nominal, a, 1).unwrap();
        prop_assert!((&res.u_applied - nominal.first_input()).amax() <= 1e-6);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn membership_grids_are_nested(x in state()) {
        let cfg = case1_config();
        let nominal = solve_nominal(&cfg, &x, None).unwrap();
        prop_assume!(nominal.is_optimal());
        let grid = |a: f64, m: usize| sample_s2_set(&cfg, &x, &nominal, a, m, 9, Execution::Parallel).unwrap();
        let by_a: Vec<_> = [0.0, 0.5, 0.95].iter().map(|&a| grid(a, 2)).collect();
        for w in by_a.windows(2) {
            prop_assert_eq!(nesting_flips(&w[0], &w[1]), 0);
        }
        let by_m: Vec<_> = [1, 2, 5].iter().map(|&m| grid(0.95, m)).collect();
        for w in by_m.windows(2) {
            prop_assert_eq!(nesting_flips(&w[0], &w[1]), 0);
        }
        prop_assert!(by_m.iter().all(|g| g.count(Membership::Indeterminate) == 0));
    }
}
