use nalgebra::{DMatrix, DVector};

use crate::opt::linalg::block_diag_repeat;

/// Stacked dynamics and the quadratic form of the performance constraint
/// over an `M`-step input stack `u = (u_0, ..., u_{M-1})`:
///
/// ```text
///     x_stack = Phi x + Gamma u
///     J(x, u) = u'Hu + 2x'Fu + x'Gx
///             = sum l(x_i, u_i) - nominal segment cost - a l(x, u_0)
/// ```
///
/// The terminal equality `x_M = A_cl^M x` reads `Aeq u = beq x`.
#[derive(Debug, Clone)]
pub struct LiftedMatrices {
    pub phi: DMatrix<f64>,
    pub gamma: DMatrix<f64>,
    pub q_tilde: DMatrix<f64>,
    pub r_tilde: DMatrix<f64>,
    pub aeq: DMatrix<f64>,
    pub beq: DMatrix<f64>,
    pub h: DMatrix<f64>,
    pub f: DMatrix<f64>,
    pub g: DMatrix<f64>,
    pub e1: DMatrix<f64>,
    pub em: DMatrix<f64>,
    pub a: f64,
    pub m: usize,
    pub n: usize,
    pub m_in: usize,
}

impl LiftedMatrices {
    /// `J(x, u)` for a full stack.
    pub fn quadratic_value(&self, x: &DVector<f64>, u: &DVector<f64>) -> f64 {
        u.dot(&(&self.h * u)) + 2.0 * x.dot(&(&self.f * u)) + x.dot(&(&self.g * x))
    }

    pub fn rollout(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        &self.phi * x + &self.gamma * u
    }
}

fn mat_pow(a: &DMatrix<f64>, k: usize) -> DMatrix<f64> {
    let mut out = DMatrix::identity(a.nrows(), a.ncols());
    for _ in 0..k {
        out = &out * a;
    }
    out
}

#[allow(clippy::too_many_arguments)]
pub fn build_lifted(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    p: &DMatrix<f64>,
    k: &DMatrix<f64>,
    m: usize,
    a_weight: f64,
) -> LiftedMatrices {
    let n = a.nrows();
    let mi = b.ncols();
    let mut phi = DMatrix::zeros((m + 1) * n, n);
    let mut powers = Vec::with_capacity(m + 1);
    for i in 0..=m {
        let ai = mat_pow(a, i);
        phi.view_mut((i * n, 0), (n, n)).copy_from(&ai);
        powers.push(ai);
    }
    let mut gamma = DMatrix::zeros((m + 1) * n, m * mi);
    for i in 1..=m {
        for j in 0..i {
            let blk = &powers[i - 1 - j] * b;
            gamma.view_mut((i * n, j * mi), (n, mi)).copy_from(&blk);
        }
    }
    let q_tilde = block_diag_repeat(q, m, n);
    let r_tilde = block_diag_repeat(r, m, 0);
    let mut e1 = DMatrix::zeros(mi, m * mi);
    e1.view_mut((0, 0), (mi, mi)).fill_with_identity();
    let mut em = DMatrix::zeros(n, (m + 1) * n);
    em.view_mut((0, m * n), (n, n)).fill_with_identity();

    let a_cl = a - b * k;
    let a_cl_m = mat_pow(&a_cl, m);
    let aeq = &em * &gamma;
    let beq = &a_cl_m - &em * &phi;
    let h = gamma.transpose() * &q_tilde * &gamma + &r_tilde - a_weight * (e1.transpose() * r * &e1);
    let f = phi.transpose() * &q_tilde * &gamma;
    let seg = p - a_cl_m.transpose() * p * &a_cl_m;
    let g = phi.transpose() * &q_tilde * &phi - seg - a_weight * q;
    LiftedMatrices { phi, gamma, q_tilde, r_tilde, aeq, beq, h, f, g, e1, em, a: a_weight, m, n, m_in: mi }
}

/// `x'(P - (A_cl^M)' P A_cl^M) x`, the stage cost of the first `M` LQR steps.
pub fn nominal_segment_cost(p: &DMatrix<f64>, a_cl: &DMatrix<f64>, m: usize, x: &DVector<f64>) -> f64 {
    let am = mat_pow(a_cl, m);
    let seg = p - am.transpose() * p * &am;
    x.dot(&(seg * x))
}
