//! Small dense linear-algebra helpers shared by the solvers.
//!
//! Everything here works on `nalgebra` dynamic matrices and uses a fixed
//! elimination order so results are bitwise reproducible.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Householder QR of an `r x c` matrix with `r >= c`, returning the full
/// orthogonal factor `Q` (`r x r`) and the upper-trapezoidal `R` (`r x c`).
///
/// No column pivoting: column order is the caller's order.
pub fn householder_qr(a: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let (rows, cols) = a.shape();
    let mut r = a.clone();
    let mut q = DMatrix::<f64>::identity(rows, rows);
    for k in 0..cols.min(rows.saturating_sub(1)) {
        let norm = r.view((k, k), (rows - k, 1)).norm();
        if norm == 0.0 {
            continue;
        }
        let alpha = if r[(k, k)] > 0.0 { -norm } else { norm };
        let mut v = r.view((k, k), (rows - k, 1)).clone_owned();
        v[0] -= alpha;
        let vnorm2 = v.norm_squared();
        if vnorm2 == 0.0 {
            continue;
        }
        // R <- (I - 2 v v^T / v^T v) R on the trailing block
        for j in k..cols {
            let mut dot = 0.0;
            for i in 0..rows - k {
                dot += v[i] * r[(k + i, j)];
            }
            let s = 2.0 * dot / vnorm2;
            for i in 0..rows - k {
                r[(k + i, j)] -= s * v[i];
            }
        }
        // Q <- Q (I - 2 v v^T / v^T v)
        for i in 0..rows {
            let mut dot = 0.0;
            for l in 0..rows - k {
                dot += q[(i, k + l)] * v[l];
            }
            let s = 2.0 * dot / vnorm2;
            for l in 0..rows - k {
                q[(i, k + l)] -= s * v[l];
            }
        }
        for i in k + 1..rows {
            r[(i, k)] = 0.0;
        }
    }
    (q, r)
}

/// Range/nullspace split of the row space of `a` (`p x d`, `p <= d`, full row rank).
#[derive(Debug, Clone)]
pub struct RowSpaceSplit {
    /// Orthonormal basis of range(a^T), `d x p`.
    pub range: DMatrix<f64>,
    /// Orthonormal basis of null(a), `d x (d - p)`.
    pub null: DMatrix<f64>,
    /// Upper-triangular factor with `a^T = range * r`, `p x p`.
    pub r: DMatrix<f64>,
}

impl RowSpaceSplit {
    /// Factors `a^T`. Returns `None` when a diagonal entry of `R` falls below
    /// `rank_tol` times the largest one, i.e. the rows are dependent.
    pub fn new(a: &DMatrix<f64>, rank_tol: f64) -> Option<Self> {
        let (p, d) = a.shape();
        if p == 0 {
            return Some(Self {
                range: DMatrix::zeros(d, 0),
                null: DMatrix::identity(d, d),
                r: DMatrix::zeros(0, 0),
            });
        }
        if p > d {
            return None;
        }
        let (q, r_full) = householder_qr(&a.transpose());
        let r = r_full.view((0, 0), (p, p)).clone_owned();
        let scale = (0..p).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
        if scale == 0.0 || (0..p).any(|i| r[(i, i)].abs() <= rank_tol * scale) {
            return None;
        }
        Some(Self {
            range: q.columns(0, p).clone_owned(),
            null: q.columns(p, d - p).clone_owned(),
            r,
        })
    }

    /// Minimum-norm solution of `a z = b`.
    pub fn particular(&self, b: &DVector<f64>) -> DVector<f64> {
        // a z = r^T range^T z = b
        let y = solve_lower(&self.r.transpose(), b);
        &self.range * y
    }

    /// Least-squares multipliers `nu` with `a^T nu ~= v`.
    pub fn multipliers(&self, v: &DVector<f64>) -> DVector<f64> {
        let rhs = self.range.transpose() * v;
        solve_upper(&self.r, &rhs)
    }
}

/// Forward substitution for lower-triangular `l`.
pub fn solve_lower(l: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let n = b.len();
    let mut x = DVector::zeros(n);
    for i in 0..n {
        let mut s = b[i];
        for j in 0..i {
            s -= l[(i, j)] * x[j];
        }
        x[i] = s / l[(i, i)];
    }
    x
}

/// Back substitution for upper-triangular `u`.
pub fn solve_upper(u: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let n = b.len();
    let mut x = DVector::zeros(n);
    for i in (0..n).rev() {
        let mut s = b[i];
        for j in i + 1..n {
            s -= u[(i, j)] * x[j];
        }
        x[i] = s / u[(i, i)];
    }
    x
}

/// Greedy selection of linearly independent rows, scanned in index order.
///
/// A row is kept when its component orthogonal to the rows kept so far has
/// norm above `tol` times its own norm.
pub fn independent_rows(a: &DMatrix<f64>, tol: f64) -> Vec<usize> {
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut kept = Vec::new();
    for i in 0..a.nrows() {
        let row = a.row(i).transpose();
        let norm = row.norm();
        if norm == 0.0 {
            continue;
        }
        let mut v = row.clone();
        // two passes of modified Gram-Schmidt
        for _ in 0..2 {
            for b in &basis {
                let c = b.dot(&v);
                v.axpy(-c, b, 1.0);
            }
        }
        let rn = v.norm();
        if rn > tol * norm {
            basis.push(v / rn);
            kept.push(i);
        }
    }
    kept
}

/// Symmetric part `(m + m^T) / 2`.
pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Eigenvalues of a symmetric matrix, ascending.
pub fn sym_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let eig = SymmetricEigen::new(symmetrize(m));
    let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    vals.sort_by(|a, b| a.total_cmp(b));
    vals
}

/// Eigen-decomposition with eigenvalues sorted ascending (columns permuted to match).
pub fn sym_eigen_sorted(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), DMatrix::zeros(0, 0));
    }
    let eig = SymmetricEigen::new(symmetrize(m));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]).then(a.cmp(&b)));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vecs = DMatrix::zeros(n, n);
    for (c, &i) in order.iter().enumerate() {
        vecs.set_column(c, &eig.eigenvectors.column(i));
    }
    (vals, vecs)
}

/// Smallest eigenvalue of a symmetric matrix (`+inf` for an empty one).
pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    sym_eigenvalues(m).first().copied().unwrap_or(f64::INFINITY)
}

/// Singular values, descending.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Numerical rank with singular values relative to the largest.
pub fn rank(m: &DMatrix<f64>, rel_tol: f64) -> usize {
    let s = singular_values(m);
    match s.first() {
        Some(&max) if max > 0.0 => s.iter().filter(|&&v| v > rel_tol * max).count(),
        _ => 0,
    }
}

/// Infinity norm of a vector (0 for empty).
pub fn inf_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

/// Block-diagonal matrix with `count` copies of `block` followed by `tail` zero rows/cols.
pub fn block_diag_repeat(block: &DMatrix<f64>, count: usize, tail: usize) -> DMatrix<f64> {
    let (r, c) = block.shape();
    let mut out = DMatrix::zeros(r * count + tail, c * count + tail);
    for k in 0..count {
        out.view_mut((k * r, k * c), (r, c)).copy_from(block);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn qr_reconstructs_and_is_orthogonal() {
        let a = DMatrix::from_row_slice(4, 2, &[1.0, 2.0, 3.0, 4.0, 0.5, -1.0, 2.0, 0.0]);
        let (q, r) = householder_qr(&a);
        assert!((&q * &r - &a).norm() < 1e-12);
        assert!((q.transpose() * &q - DMatrix::identity(4, 4)).norm() < 1e-12);
        for i in 1..4 {
            for j in 0..i.min(2) {
                assert_eq!(r[(i, j)], 0.0);
            }
        }
    }

    #[test]
    fn row_space_split_solves_and_spans_nullspace() {
        let a = DMatrix::from_row_slice(2, 3, &[1.0, 1.0, 0.0, 0.0, 1.0, 1.0]);
        let b = DVector::from_vec(vec![2.0, 1.0]);
        let split = RowSpaceSplit::new(&a, 1e-12).unwrap();
        let z = split.particular(&b);
        assert!((&a * &z - &b).norm() < 1e-12);
        assert_eq!(split.null.ncols(), 1);
        assert!((&a * &split.null).norm() < 1e-12);
    }

    #[test]
    fn dependent_rows_are_detected() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 2.0, 0.0, 0.0, 1.0]);
        assert_eq!(independent_rows(&a, 1e-10), vec![0, 2]);
        assert!(RowSpaceSplit::new(&a.rows(0, 2).clone_owned(), 1e-10).is_none());
    }
}
