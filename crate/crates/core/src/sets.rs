//! Box constraint sets and terminal sets.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::opt::linalg::min_eigenvalue;

#[derive(Debug, Error, PartialEq)]
pub enum SetError {
    #[error("bound vectors differ in length ({0} vs {1})")]
    Length(usize, usize),
    #[error("lower bound not below upper bound in component {0}")]
    Empty(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoxSet {
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
}

impl BoxSet {
    pub fn new(lower: DVector<f64>, upper: DVector<f64>) -> Result<Self, SetError> {
        if lower.len() != upper.len() {
            return Err(SetError::Length(lower.len(), upper.len()));
        }
        if let Some(i) = (0..lower.len()).find(|&i| !(lower[i] < upper[i])) {
            return Err(SetError::Empty(i));
        }
        Ok(Self { lower, upper })
    }

    /// `[-r, r]^dim`.
    pub fn symmetric(dim: usize, r: f64) -> Self {
        Self { lower: DVector::from_element(dim, -r), upper: DVector::from_element(dim, r) }
    }

    pub fn from_slices(lower: &[f64], upper: &[f64]) -> Result<Self, SetError> {
        Self::new(DVector::from_row_slice(lower), DVector::from_row_slice(upper))
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn contains(&self, x: &DVector<f64>, tol: f64) -> bool {
        (0..self.dim()).all(|i| x[i] >= self.lower[i] - tol && x[i] <= self.upper[i] + tol)
    }

    /// `lower < 0 < upper` componentwise.
    pub fn contains_origin_strictly(&self) -> bool {
        (0..self.dim()).all(|i| self.lower[i] < 0.0 && 0.0 < self.upper[i])
    }

    /// Signed distances to every face, ordered `(x_i - lower_i, upper_i - x_i)` per component.
    pub fn margins(&self, x: &DVector<f64>) -> Vec<f64> {
        (0..self.dim()).flat_map(|i| [x[i] - self.lower[i], self.upper[i] - x[i]]).collect()
    }

    pub fn min_margin(&self, x: &DVector<f64>) -> f64 {
        self.margins(x).into_iter().fold(f64::INFINITY, f64::min)
    }

    pub fn clamp(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.dim(), (0..self.dim()).map(|i| x[i].clamp(self.lower[i], self.upper[i])))
    }

    /// Half-spaces `h' x <= c` describing the box.
    pub fn faces(&self) -> Vec<(DVector<f64>, f64)> {
        let n = self.dim();
        let mut out = Vec::with_capacity(2 * n);
        for i in 0..n {
            let mut h = DVector::zeros(n);
            h[i] = 1.0;
            out.push((h.clone(), self.upper[i]));
            out.push((-h, -self.lower[i]));
        }
        out
    }

    /// `R` evenly spaced points per axis; only meaningful for 2-D boxes.
    pub fn lattice_axis(&self, axis: usize, resolution: usize) -> Vec<f64> {
        let (lo, hi) = (self.lower[axis], self.upper[axis]);
        if resolution <= 1 {
            return vec![0.5 * (lo + hi)];
        }
        (0..resolution).map(|i| lo + (hi - lo) * i as f64 / (resolution - 1) as f64).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TerminalSet {
    /// `{x : x' P x <= gamma}`.
    Ellipsoid { p: DMatrix<f64>, gamma: f64 },
    /// `{0}` as a terminal equality.
    Origin,
    /// No terminal constraint beyond the state box.
    None,
}

impl TerminalSet {
    pub fn contains(&self, x: &DVector<f64>, tol: f64) -> bool {
        match self {
            TerminalSet::Ellipsoid { p, gamma } => x.dot(&(p * x)) <= gamma + tol,
            TerminalSet::Origin => x.amax() <= tol,
            TerminalSet::None => true,
        }
    }

    /// Checks the structural invariants (`P` positive definite, `gamma > 0`).
    pub fn is_well_formed(&self) -> bool {
        match self {
            TerminalSet::Ellipsoid { p, gamma } => {
                let sym = (p - p.transpose()).amax() <= 1e-9 * (1.0 + p.amax());
                sym && min_eigenvalue(p) > 1e-10 && *gamma > 0.0
            }
            _ => true,
        }
    }

    pub fn kind_str(&self) -> &'static str {
        match self {
            TerminalSet::Ellipsoid { .. } => "ellipsoid",
            TerminalSet::Origin => "origin",
            TerminalSet::None => "none",
        }
    }
}
