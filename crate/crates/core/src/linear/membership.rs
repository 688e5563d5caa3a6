use nalgebra::{DMatrix, DVector};

use super::{LiftedMatrices, LinearError};
use crate::opt::linalg::{independent_rows, rank, sym_eigen_sorted, RowSpaceSplit};

const NEG_EIG: f64 = 1e-10;
const VALUE_TOL: f64 = 1e-9;

/// Minimum of `J(x, u)` over stacks with first block `u0` that satisfy the
/// terminal equality, ignoring box constraints.
///
/// Returns `+inf` when no stack reaches the terminal state and `-inf` when
/// the quadratic is unbounded below on the slice.
pub fn closed_form_value(l: &LiftedMatrices, x: &DVector<f64>, u0: &DVector<f64>) -> Result<f64, LinearError> {
    let (n, mi, m) = (l.n, l.m_in, l.m);
    if x.len() != n || u0.len() != mi {
        return Err(LinearError::Dimension("x or u0".into()));
    }
    let r = rank(&l.aeq, 1e-10);
    if r < n {
        return Err(LinearError::RankDeficient { rank: r, n });
    }
    let tail = (m - 1) * mi;
    let a0 = l.aeq.columns(0, mi).clone_owned();
    let at = l.aeq.columns(mi, tail).clone_owned();
    let rhs = &l.beq * x - &a0 * u0;

    // pin the first block, then remove the terminal equality from the tail
    let keep = independent_rows(&at, 1e-10);
    let mut sub = DMatrix::zeros(keep.len(), tail);
    let mut sub_rhs = DVector::zeros(keep.len());
    for (i, &row) in keep.iter().enumerate() {
        sub.set_row(i, &at.row(row));
        sub_rhs[i] = rhs[row];
    }
    let split = RowSpaceSplit::new(&sub, 1e-12).ok_or(LinearError::Singular("terminal equality"))?;
    let tp = split.particular(&sub_rhs);
    let resid = (&at * &tp - &rhs).amax();
    if resid > 1e-9 * (1.0 + rhs.amax()) {
        return Ok(f64::INFINITY);
    }

    let mut base = DVector::zeros(m * mi);
    base.rows_mut(0, mi).copy_from(u0);
    base.rows_mut(mi, tail).copy_from(&tp);
    let c0 = l.quadratic_value(x, &base);
    let k = split.null.ncols();
    if k == 0 {
        return Ok(c0);
    }
    let mut nfull = DMatrix::zeros(m * mi, k);
    nfull.view_mut((mi, 0), (tail, k)).copy_from(&split.null);
    let hr = nfull.transpose() * &l.h * &nfull;
    // J(base + N w) = c0 + 2 gr'w + w'Hr w
    let gr = nfull.transpose() * (&l.h * &base + l.f.transpose() * x);
    let (vals, vecs) = sym_eigen_sorted(&hr);
    if vals[0] < -NEG_EIG {
        return Ok(f64::NEG_INFINITY);
    }
    let scale = 1.0 + gr.amax();
    let mut value = c0;
    for (i, &lam) in vals.iter().enumerate() {
        let proj = vecs.column(i).dot(&gr);
        if lam.abs() <= NEG_EIG {
            if proj.abs() > 1e-9 * scale {
                return Ok(f64::NEG_INFINITY);
            }
        } else {
            value -= proj * proj / lam;
        }
    }
    Ok(value)
}

/// True iff some stack with first block `u0` meets the terminal equality and
/// has `J(x, u) <= 0` (within 1e-9). Box constraints are not considered.
pub fn closed_form_membership(l: &LiftedMatrices, x: &DVector<f64>, u0: &DVector<f64>) -> Result<bool, LinearError> {
    Ok(closed_form_value(l, x, u0)? <= VALUE_TOL)
}
