//! Edgeworth expansions for elements of a fixed Wiener chaos.
//!
//! The spectral layer ([`hermite`], [`ou`]) is generic over [`scalar::Scalar`]
//! and runs on `f32`, `f64` and exact rationals. Simulation, estimation and
//! diagnostics work in `f64`.

pub mod cli;
pub mod diagnostics;
pub mod edgeworth;
pub mod hermite;
pub mod ou;
pub mod quadrature;
pub mod scalar;
pub mod sim;
pub mod stats;

/// Exact rational scalar.
pub type Rational = num_rational::BigRational;
/// Hermite series in double precision.
pub type Series = hermite::HermiteSeries<f64>;
/// Hermite series with exact rational coefficients.
pub type ExactSeries = hermite::HermiteSeries<Rational>;
/// Double-precision quadrature rule.
pub type Rule = quadrature::QuadratureRule<f64>;
