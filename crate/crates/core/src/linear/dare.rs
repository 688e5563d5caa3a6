use nalgebra::DMatrix;

use super::LinearError;
use crate::opt::linalg::symmetrize;

const MAX_ITER: usize = 100_000;
const STEP_TOL: f64 = 1e-12;
const RESIDUAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct RiccatiResult {
    pub p: DMatrix<f64>,
    /// LQR gain, `u = -K x`.
    pub k: DMatrix<f64>,
    pub a_cl: DMatrix<f64>,
    pub residual: f64,
    pub iterations: usize,
}

fn gain(a: &DMatrix<f64>, b: &DMatrix<f64>, r: &DMatrix<f64>, p: &DMatrix<f64>) -> Result<DMatrix<f64>, LinearError> {
    let s = r + b.transpose() * p * b;
    let rhs = b.transpose() * p * a;
    let chol = s.cholesky().ok_or(LinearError::Singular("R + B'PB"))?;
    Ok(chol.solve(&rhs))
}

/// Frobenius norm of the Riccati equation residual at `p`.
pub fn dare_residual(a: &DMatrix<f64>, b: &DMatrix<f64>, q: &DMatrix<f64>, r: &DMatrix<f64>, p: &DMatrix<f64>) -> f64 {
    match gain(a, b, r, p) {
        Ok(k) => {
            let rhs = q + a.transpose() * p * a - a.transpose() * p * b * k;
            (p - rhs).norm()
        }
        Err(_) => f64::INFINITY,
    }
}

pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    m.complex_eigenvalues().iter().map(|c| c.norm()).fold(0.0, f64::max)
}

/// Value iteration from `P = Q` until successive iterates agree to 1e-12.
pub fn solve_dare(a: &DMatrix<f64>, b: &DMatrix<f64>, q: &DMatrix<f64>, r: &DMatrix<f64>) -> Result<RiccatiResult, LinearError> {
    let n = a.nrows();
    let m = b.ncols();
    if a.ncols() != n || b.nrows() != n || q.shape() != (n, n) || r.shape() != (m, m) {
        return Err(LinearError::Dimension("A, B, Q, R".into()));
    }
    let mut p = q.clone();
    let mut iterations = 0;
    loop {
        if iterations >= MAX_ITER {
            return Err(LinearError::NotConverged(iterations));
        }
        let k = gain(a, b, r, &p)?;
        let next = symmetrize(&(q + a.transpose() * &p * a - a.transpose() * &p * b * &k));
        iterations += 1;
        let change = (&next - &p).norm();
        p = next;
        if !change.is_finite() {
            return Err(LinearError::NotConverged(iterations));
        }
        if change <= STEP_TOL {
            break;
        }
    }
    let k = gain(a, b, r, &p)?;
    let a_cl = a - b * &k;
    let residual = dare_residual(a, b, q, r, &p);
    if residual > RESIDUAL_TOL {
        return Err(LinearError::NotConverged(iterations));
    }
    let rho = spectral_radius(&a_cl);
    if rho >= 1.0 {
        return Err(LinearError::Unstable(rho));
    }
    Ok(RiccatiResult { p, k, a_cl, residual, iterations })
}
