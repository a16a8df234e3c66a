//! Density estimates, comparison grids, total variation against the signed
//! Edgeworth measure, rate regression and the Stein identity check.

mod grid;
mod kde;
mod rate;
mod stein_check;
mod tv;

pub use grid::{DensityGrid, GridSpec, DENSITY_GRID_HEADER};
pub use kde::{kde, kde_all, silverman_bandwidth, Bandwidth, KdeColumns};
pub use rate::{rate_regression, RatePoint, RateReport};
pub use stein_check::{stein_discrepancy_check, stein_panel, SteinCheck};
pub use tv::{tv_signed, DensitySource, TvEstimate, MIN_GRID_POINTS};

use thiserror::Error;

use crate::edgeworth::EdgeworthError;
use crate::ou::OuError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiagnosticsError {
    #[error("the batch is empty")]
    EmptyBatch,
    #[error("bandwidth must be positive and finite, got {0}")]
    InvalidBandwidth(String),
    #[error("derivative order {0} is not in 0..=2")]
    InvalidDerivative(usize),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("rate regression needs {0}")]
    Regression(String),
    #[error("Γ samples are not available for this batch")]
    GammaUnavailable,
    #[error(transparent)]
    Stein(#[from] OuError),
    #[error(transparent)]
    Edgeworth(#[from] EdgeworthError),
    #[error("malformed density grid: {0}")]
    Parse(String),
}

fn check_increasing(x: &[f64]) -> Result<(), DiagnosticsError> {
    if x.iter().any(|v| !v.is_finite()) || x.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(DiagnosticsError::InvalidGrid(
            "points must be finite and strictly increasing".into(),
        ));
    }
    Ok(())
}

/// `∫ y dx` by the trapezoid rule.
pub fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2)
        .zip(y.windows(2))
        .map(|(xw, yw)| 0.5 * (xw[1] - xw[0]) * (yw[0] + yw[1]))
        .sum()
}
