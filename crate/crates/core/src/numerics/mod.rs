//! Special functions, bracketed root finding, adaptive quadrature and the
//! exponential-plus-offset least-squares fit used throughout the crate.
//!
//! Everything here is a pure function of its inputs.

mod bessel;
mod fit;
mod quad;
mod roots;

pub use bessel::{bessel_i, bessel_j, bessel_k, i012, j012, k012, BesselEval};
pub use fit::{fit_exp_offset, FitProblem, FitResult};
pub use quad::{integrate, integrate_with_error};
pub use roots::{find_root, RootBracket};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericsError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("no sign change across bracket [{lower}, {upper}]")]
    Bracket { lower: f64, upper: f64 },
    #[error("no convergence after {iterations} iterations")]
    Convergence { iterations: usize },
    #[error("degenerate fit: {0}")]
    FitDegenerate(String),
}

pub type Result<T> = std::result::Result<T, NumericsError>;
