use nalgebra::{DMatrix, DVector};

/// `l(x, u) = x'Qx + u'Ru`, `V_f(x) = x'P_f x`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticCost {
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub p_f: DMatrix<f64>,
}

impl QuadraticCost {
    pub fn new(q: DMatrix<f64>, r: DMatrix<f64>, p_f: DMatrix<f64>) -> Self {
        Self { q, r, p_f }
    }

    pub fn stage(&self, x: &DVector<f64>, u: &DVector<f64>) -> f64 {
        x.dot(&(&self.q * x)) + u.dot(&(&self.r * u))
    }

    pub fn terminal(&self, x: &DVector<f64>) -> f64 {
        x.dot(&(&self.p_f * x))
    }

    /// Sum of stage costs along paired sequences (the longer one is truncated).
    pub fn path(&self, xs: &[DVector<f64>], us: &[DVector<f64>]) -> f64 {
        xs.iter().zip(us).map(|(x, u)| self.stage(x, u)).sum()
    }
}
