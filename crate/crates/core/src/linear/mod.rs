//! Closed-form tools for linear models with quadratic costs.

mod dare;
mod ellipsoid;
mod lifted;
mod membership;

use thiserror::Error;

pub use dare::{dare_residual, solve_dare, spectral_radius, RiccatiResult};
pub use ellipsoid::max_ellipsoid_level;
pub use lifted::{build_lifted, nominal_segment_cost, LiftedMatrices};
pub use membership::{closed_form_membership, closed_form_value};

#[derive(Debug, Error, PartialEq)]
pub enum LinearError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("Riccati iteration did not converge after {0} iterations")]
    NotConverged(usize),
    #[error("closed loop is not stable (spectral radius {0})")]
    Unstable(f64),
    #[error("singular matrix: {0}")]
    Singular(&'static str),
    #[error("terminal equality has rank {rank} < {n}")]
    RankDeficient { rank: usize, n: usize },
}
