#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use ps2f_core::cases::case1_config;
use ps2f_core::config::Ps2fConfig;
use ps2f_core::linear::{build_lifted, LiftedMatrices};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn v2(a: f64, b: f64) -> DVector<f64> {
    DVector::from_vec(vec![a, b])
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_vec(rng: &mut ChaCha8Rng, dim: usize, r: f64) -> DVector<f64> {
    DVector::from_fn(dim, |_, _| rng.gen_range(-r..=r))
}

pub fn case1_matrices() -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let cfg = case1_config();
    let (a, b) = cfg.model.matrices().unwrap();
    (a.clone(), b.clone(), cfg.cost.q.clone(), cfg.cost.r.clone())
}

/// Lifted matrices of a linear configuration at filter horizon `m`, weight `a`.
pub fn lifted_for(cfg: &Ps2fConfig, m: usize, a: f64) -> LiftedMatrices {
    let (am, bm) = cfg.model.matrices().unwrap();
    let k = cfg.terminal_gain.as_ref().unwrap();
    build_lifted(am, bm, &cfg.cost.q, &cfg.cost.r, &cfg.cost.p_f, k, m, a)
}
