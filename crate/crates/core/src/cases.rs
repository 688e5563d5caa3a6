//! The reference configurations: a double integrator with an ellipsoidal
//! terminal set and a unicycle with a terminal equality.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::config::Ps2fConfig;
use crate::cost::QuadraticCost;
use crate::linear::{max_ellipsoid_level, solve_dare, LinearError};
use crate::model::SystemModel;
use crate::schedule::ModeSchedule;
use crate::sets::{BoxSet, TerminalSet};

pub const CASE1_STEPS: usize = 100;
pub const CASE3_STEPS: usize = 150;
pub const CASE3_KS: usize = 30;
pub const CASE3_GOAL: [f64; 2] = [0.5, 0.5];
pub const GO_HORIZON: usize = 5;
pub const GO_DISCOUNT: f64 = 0.9;

pub fn case1_initial_state() -> DVector<f64> {
    DVector::from_vec(vec![2.0, -2.0])
}

/// Linear configuration with `Q = rho I`; terminal weight, gain and
/// ellipsoid level are derived from the Riccati solution.
pub fn case1_config_with(rho: f64, n: usize, m: usize, a: f64) -> Result<Ps2fConfig, LinearError> {
    let am = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
    let bm = DMatrix::identity(2, 2);
    let q = DMatrix::identity(2, 2) * rho;
    let r = DMatrix::identity(2, 2);
    let ric = solve_dare(&am, &bm, &q, &r)?;
    let x_set = BoxSet::symmetric(2, 2.0);
    let u_set = BoxSet::symmetric(2, 1.0);
    let gamma = max_ellipsoid_level(&ric.p, Some(&ric.k), &x_set, Some(&u_set))?;
    Ok(Ps2fConfig {
        model: SystemModel::linear(am, bm),
        n,
        m,
        a,
        cost: QuadraticCost::new(q, r, ric.p.clone()),
        x_set,
        u_set,
        xf: TerminalSet::Ellipsoid { p: ric.p, gamma },
        terminal_gain: Some(ric.k),
    })
}

/// `N = 5`, `M = 2`, `a = 0.95`, `Q = 10 I`.
pub fn case1_config() -> Ps2fConfig {
    case1_config_with(10.0, 5, 2, 0.95).expect("reference system is stabilizable")
}

pub fn case3_config() -> Ps2fConfig {
    Ps2fConfig {
        model: SystemModel::unicycle(0.2),
        n: 5,
        m: 5,
        a: 0.5,
        cost: QuadraticCost::new(DMatrix::identity(3, 3) * 10.0, DMatrix::identity(2, 2), DMatrix::zeros(3, 3)),
        x_set: BoxSet::from_slices(&[-0.5, -0.5, -PI / 3.0], &[0.5, 0.5, PI / 3.0]).expect("nonempty box"),
        u_set: BoxSet::symmetric(2, 10.0),
        xf: TerminalSet::Origin,
        terminal_gain: None,
    }
}

/// `a = 100` before the switch index, `0.5` after, `M = 5` throughout.
pub fn case3_schedule(ks: usize) -> ModeSchedule {
    ModeSchedule::two_phase(100.0, 0.5, ks, 5)
}
