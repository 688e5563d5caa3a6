use nalgebra::DMatrix;

use super::LinearError;
use crate::sets::BoxSet;

/// Largest `gamma` with `{x' P x <= gamma}` inside the state box and, when a
/// gain is given, inside the input box pulled back through `u = -K x`.
///
/// For a face `h' x <= c` the support of the ellipsoid is
/// `sqrt(gamma h' P^-1 h)`, so the face allows `gamma <= c^2 / h' P^-1 h`.
pub fn max_ellipsoid_level(
    p: &DMatrix<f64>,
    k: Option<&DMatrix<f64>>,
    x: &BoxSet,
    u: Option<&BoxSet>,
) -> Result<f64, LinearError> {
    let n = p.nrows();
    if p.ncols() != n || x.dim() != n {
        return Err(LinearError::Dimension("P and X".into()));
    }
    let p_inv = p.clone().cholesky().ok_or(LinearError::Singular("P"))?.inverse();
    let mut faces = x.faces();
    if let (Some(k), Some(u)) = (k, u) {
        if k.shape() != (u.dim(), n) {
            return Err(LinearError::Dimension("K and U".into()));
        }
        for (h, c) in u.faces() {
            faces.push((-(k.transpose() * h), c));
        }
    }
    let mut gamma = f64::INFINITY;
    for (h, c) in faces {
        let s = h.dot(&(&p_inv * &h));
        if s > 0.0 {
            gamma = gamma.min(c * c / s);
        }
    }
    Ok(gamma)
}
