//! Central finite differences, used as the fallback derivative route for
//! custom models and as an independent check of analytic derivatives.

use nalgebra::{DMatrix, DVector};

pub const STEP: f64 = 1e-6;

pub fn gradient<F>(f: F, z: &DVector<f64>) -> DVector<f64>
where
    F: Fn(&DVector<f64>) -> f64,
{
    let mut g = DVector::zeros(z.len());
    let mut zp = z.clone();
    for i in 0..z.len() {
        let orig = zp[i];
        zp[i] = orig + STEP;
        let fp = f(&zp);
        zp[i] = orig - STEP;
        let fm = f(&zp);
        zp[i] = orig;
        g[i] = (fp - fm) / (2.0 * STEP);
    }
    g
}

/// Jacobian of a vector function with `rows` outputs.
pub fn jacobian<F>(f: F, z: &DVector<f64>, rows: usize) -> DMatrix<f64>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    let mut jac = DMatrix::zeros(rows, z.len());
    let mut zp = z.clone();
    for i in 0..z.len() {
        let orig = zp[i];
        zp[i] = orig + STEP;
        let fp = f(&zp);
        zp[i] = orig - STEP;
        let fm = f(&zp);
        zp[i] = orig;
        jac.set_column(i, &((fp - fm) / (2.0 * STEP)));
    }
    jac
}

/// Symmetrized Jacobian of a gradient map.
pub fn hessian_from_gradient<F>(grad: F, z: &DVector<f64>) -> DMatrix<f64>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    let h = jacobian(grad, z, z.len());
    (&h + h.transpose()) * 0.5
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gradient_of_quadratic() {
        let z = DVector::from_vec(vec![1.0, -2.0]);
        let g = gradient(|z| z[0] * z[0] + 3.0 * z[0] * z[1], &z);
        assert!((g[0] - (2.0 - 6.0)).abs() < 1e-8);
        assert!((g[1] - 3.0).abs() < 1e-8);
    }
}
