//! Discrete-time plant models.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::opt::fd;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Linear,
    Unicycle,
    Custom,
}

/// User-supplied dynamics. Derivatives fall back to central differences.
pub trait Dynamics: Send + Sync {
    fn state_dim(&self) -> usize;
    fn input_dim(&self) -> usize;
    fn step(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64>;

    fn jacobians(&self, x: &DVector<f64>, u: &DVector<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
        let n = self.state_dim();
        let jx = fd::jacobian(|w| self.step(w, u), x, n);
        let ju = fd::jacobian(|w| self.step(x, w), u, n);
        (jx, ju)
    }
}

#[derive(Clone)]
pub enum SystemModel {
    Linear { a: DMatrix<f64>, b: DMatrix<f64> },
    /// Planar unicycle, state `(p_x, p_y, theta)`, input `(v, omega)`, forward Euler.
    Unicycle { ts: f64 },
    Custom(Arc<dyn Dynamics>),
}

impl fmt::Debug for SystemModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SystemModel::Linear { a, b } => f.debug_struct("Linear").field("a", a).field("b", b).finish(),
            SystemModel::Unicycle { ts } => f.debug_struct("Unicycle").field("ts", ts).finish(),
            SystemModel::Custom(d) => write!(f, "Custom({}x{})", d.state_dim(), d.input_dim()),
        }
    }
}

impl SystemModel {
    pub fn linear(a: DMatrix<f64>, b: DMatrix<f64>) -> Self {
        SystemModel::Linear { a, b }
    }

    pub fn unicycle(ts: f64) -> Self {
        SystemModel::Unicycle { ts }
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            SystemModel::Linear { .. } => ModelKind::Linear,
            SystemModel::Unicycle { .. } => ModelKind::Unicycle,
            SystemModel::Custom(_) => ModelKind::Custom,
        }
    }

    pub fn state_dim(&self) -> usize {
        match self {
            SystemModel::Linear { a, .. } => a.nrows(),
            SystemModel::Unicycle { .. } => 3,
            SystemModel::Custom(d) => d.state_dim(),
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            SystemModel::Linear { b, .. } => b.ncols(),
            SystemModel::Unicycle { .. } => 2,
            SystemModel::Custom(d) => d.input_dim(),
        }
    }

    pub fn is_linear(&self) -> bool {
        matches!(self, SystemModel::Linear { .. })
    }

    /// `(A, B)` for linear models.
    pub fn matrices(&self) -> Option<(&DMatrix<f64>, &DMatrix<f64>)> {
        match self {
            SystemModel::Linear { a, b } => Some((a, b)),
            _ => None,
        }
    }

    pub fn step(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        match self {
            SystemModel::Linear { a, b } => a * x + b * u,
            SystemModel::Unicycle { ts } => {
                let (th, v, w) = (x[2], u[0], u[1]);
                DVector::from_vec(vec![x[0] + ts * v * th.cos(), x[1] + ts * v * th.sin(), th + ts * w])
            }
            SystemModel::Custom(d) => d.step(x, u),
        }
    }

    /// `(df/dx, df/du)` at `(x, u)`.
    pub fn jacobians(&self, x: &DVector<f64>, u: &DVector<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
        match self {
            SystemModel::Linear { a, b } => (a.clone(), b.clone()),
            SystemModel::Unicycle { ts } => {
                let (th, v) = (x[2], u[0]);
                let (s, c) = th.sin_cos();
                let mut jx = DMatrix::identity(3, 3);
                jx[(0, 2)] = -ts * v * s;
                jx[(1, 2)] = ts * v * c;
                let ju = DMatrix::from_row_slice(3, 2, &[ts * c, 0.0, ts * s, 0.0, 0.0, *ts]);
                (jx, ju)
            }
            SystemModel::Custom(d) => d.jacobians(x, u),
        }
    }

    /// Hessian of `w' f(x, u)` with respect to the stacked `(x, u)`.
    pub fn hessian_contraction(&self, x: &DVector<f64>, u: &DVector<f64>, w: &DVector<f64>) -> DMatrix<f64> {
        let n = self.state_dim();
        let m = self.input_dim();
        match self {
            SystemModel::Linear { .. } => DMatrix::zeros(n + m, n + m),
            SystemModel::Unicycle { ts } => {
                let (th, v) = (x[2], u[0]);
                let (s, c) = th.sin_cos();
                let mut h = DMatrix::zeros(5, 5);
                h[(2, 2)] = ts * v * (-w[0] * c - w[1] * s);
                let cross = ts * (-w[0] * s + w[1] * c);
                h[(2, 3)] = cross;
                h[(3, 2)] = cross;
                h
            }
            SystemModel::Custom(d) => {
                let mut xu = DVector::zeros(n + m);
                xu.rows_mut(0, n).copy_from(x);
                xu.rows_mut(n, m).copy_from(u);
                let grad = |p: &DVector<f64>| {
                    let xs = p.rows(0, n).clone_owned();
                    let us = p.rows(n, m).clone_owned();
                    let (jx, ju) = d.jacobians(&xs, &us);
                    let mut g = DVector::zeros(n + m);
                    g.rows_mut(0, n).copy_from(&(jx.transpose() * w));
                    g.rows_mut(n, m).copy_from(&(ju.transpose() * w));
                    g
                };
                fd::hessian_from_gradient(grad, &xu)
            }
        }
    }

    /// Open-loop rollout; returns `inputs.len() + 1` states starting at `x0`.
    pub fn rollout(&self, x0: &DVector<f64>, inputs: &[DVector<f64>]) -> Vec<DVector<f64>> {
        let mut xs = Vec::with_capacity(inputs.len() + 1);
        xs.push(x0.clone());
        for u in inputs {
            let next = self.step(xs.last().unwrap(), u);
            xs.push(next);
        }
        xs
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unicycle_jacobians_match_differences() {
        let m = SystemModel::unicycle(0.2);
        let x = DVector::from_vec(vec![0.1, -0.2, 0.7]);
        let u = DVector::from_vec(vec![1.3, -0.4]);
        let (jx, ju) = m.jacobians(&x, &u);
        let jx_fd = fd::jacobian(|w| m.step(w, &u), &x, 3);
        let ju_fd = fd::jacobian(|w| m.step(&x, w), &u, 3);
        assert!((jx - jx_fd).amax() < 1e-8);
        assert!((ju - ju_fd).amax() < 1e-8);
    }

    #[test]
    fn unicycle_contraction_matches_differences() {
        let m = SystemModel::unicycle(0.2);
        let x = DVector::from_vec(vec![0.1, -0.2, 0.7]);
        let u = DVector::from_vec(vec![1.3, -0.4]);
        let w = DVector::from_vec(vec![0.5, -2.0, 1.0]);
        let h = m.hessian_contraction(&x, &u, &w);
        let mut xu = DVector::zeros(5);
        xu.rows_mut(0, 3).copy_from(&x);
        xu.rows_mut(3, 2).copy_from(&u);
        let h_fd = fd::hessian_from_gradient(
            |p| {
                let (jx, ju) = m.jacobians(&p.rows(0, 3).clone_owned(), &p.rows(3, 2).clone_owned());
                let mut g = DVector::zeros(5);
                g.rows_mut(0, 3).copy_from(&(jx.transpose() * &w));
                g.rows_mut(3, 2).copy_from(&(ju.transpose() * &w));
                g
            },
            &xu,
        );
        assert!((h - h_fd).amax() < 1e-7);
    }

    struct Pendulum;

    impl Dynamics for Pendulum {
        fn state_dim(&self) -> usize {
            2
        }
        fn input_dim(&self) -> usize {
            1
        }
        fn step(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
            DVector::from_vec(vec![x[0] + 0.1 * x[1], x[1] + 0.1 * (x[0].sin() + u[0])])
        }
    }

    #[test]
    fn custom_model_uses_differences() {
        let m = SystemModel::Custom(Arc::new(Pendulum));
        assert_eq!(m.kind(), ModelKind::Custom);
        let x = DVector::from_vec(vec![0.3, 0.0]);
        let u = DVector::from_vec(vec![0.0]);
        let (jx, ju) = m.jacobians(&x, &u);
        assert!((jx[(1, 0)] - 0.1 * 0.3f64.cos()).abs() < 1e-8);
        assert!((ju[(1, 0)] - 0.1).abs() < 1e-8);
        let h = m.hessian_contraction(&x, &u, &DVector::from_vec(vec![0.0, 1.0]));
        assert!((h[(0, 0)] + 0.1 * 0.3f64.sin()).abs() < 1e-4);
    }
}
