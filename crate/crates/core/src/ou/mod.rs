//! Ornstein–Uhlenbeck calculus on `L²(γ)`.
//!
//! `L = Δ - x·∇` acts on `H_k` by `-k`, so the semigroup and resolvent are
//! diagonal in the Hermite basis. Each operator also has a quadrature
//! realization used to cross-check the spectral one.

mod s_operator;
mod stein;

pub use s_operator::{s_operator, s_operator_mehler, t_operator, t_operator_via_s, shifted_product};
pub use stein::{stein_solve, SteinSolution};

use thiserror::Error;

use crate::hermite::{hermite_eval_all, HermiteRank, HermiteSeries};
use crate::quadrature::{adaptive_integrate, QuadratureRule};
use crate::scalar::{pow_usize, Real, Scalar};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OuError {
    #[error("semigroup time must be finite and nonnegative, got {0}")]
    InvalidTime(f64),
    #[error("derivative formula needs t > 0, got {0}")]
    NonPositiveTime(f64),
    #[error("resolvent pole: eigenvalue k = {k} meets -alpha (rank {rank}, alpha = {alpha})")]
    ResolventPole { k: usize, rank: String, alpha: String },
    #[error("rank {rank} below the required {required}")]
    RankTooLow { rank: String, required: usize },
    #[error("function value is not finite at x = {0}")]
    NonFinite(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("pole of the shifted product polynomial at k = {0}")]
    ProductPole(usize),
    #[error("integration failed: {0}")]
    Integration(String),
}

fn check_time<T: Real>(t: T) -> Result<(), OuError> {
    if !t.is_finite() || t < T::zero() {
        return Err(OuError::InvalidTime(t.to_f64().unwrap_or(f64::NAN)));
    }
    Ok(())
}

/// `P_t`: `c_k ↦ e^{-kt} c_k`.
pub fn semigroup_apply_spectral<T: Real>(
    s: &HermiteSeries<T>,
    t: T,
) -> Result<HermiteSeries<T>, OuError> {
    check_time(t)?;
    Ok(s.map_indexed(|k, c| *c * (-T::lit(k as f64) * t).exp()))
}

/// `P_t` written in `q = e^{-t} ∈ (0, 1]`: `c_k ↦ q^k c_k`. Exact over rationals.
pub fn semigroup_apply_factor<T: Scalar>(
    s: &HermiteSeries<T>,
    q: &T,
) -> Result<HermiteSeries<T>, OuError> {
    if !(*q > T::zero() && *q <= T::one()) {
        return Err(OuError::InvalidParameter(format!(
            "semigroup factor must lie in (0, 1], got {q:?}"
        )));
    }
    Ok(s.map_indexed(|k, c| c.clone() * pow_usize(q, k)))
}

/// Mehler form `Σ_j w_j f(x e^{-t} + sqrt(1 - e^{-2t}) y_j)`.
pub fn semigroup_apply_mehler<T: Real>(
    f: impl Fn(T) -> T,
    t: T,
    x: T,
    rule: &QuadratureRule<T>,
) -> Result<T, OuError> {
    check_time(t)?;
    let a = (-t).exp();
    let b = (-(-T::lit(2.0) * t).exp_m1()).sqrt();
    let mut acc = T::zero();
    for (&y, &w) in rule.nodes().iter().zip(rule.weights()) {
        let z = x * a + b * y;
        let v = f(z);
        if !v.is_finite() {
            return Err(OuError::NonFinite(z.to_f64().unwrap_or(f64::NAN)));
        }
        acc = acc + w * v;
    }
    Ok(acc)
}

/// `∂_x^k P_t f(x)` by integration by parts against the Gaussian kernel.
pub fn semigroup_derivative<T: Real>(
    f: impl Fn(T) -> T,
    t: T,
    k: usize,
    x: T,
    rule: &QuadratureRule<T>,
) -> Result<T, OuError> {
    if !t.is_finite() || t <= T::zero() {
        return Err(OuError::NonPositiveTime(t.to_f64().unwrap_or(f64::NAN)));
    }
    let a = (-t).exp();
    let b2 = -(-T::lit(2.0) * t).exp_m1();
    let b = b2.sqrt();
    let mut acc = T::zero();
    for (&y, &w) in rule.nodes().iter().zip(rule.weights()) {
        let z = x * a + b * y;
        let v = f(z);
        if !v.is_finite() {
            return Err(OuError::NonFinite(z.to_f64().unwrap_or(f64::NAN)));
        }
        acc = acc + w * hermite_eval_all(k, y)[k] * v;
    }
    let kk = T::lit(k as f64);
    Ok((-kk * t).exp() * b2.powf(-kk / T::lit(2.0)) * acc)
}

/// `R(α) = (L - α)^{-1}`: `c_k ↦ -c_k / (k + α)`. Requires `rank > -α`.
pub fn resolvent_apply<T: Scalar>(
    s: &HermiteSeries<T>,
    alpha: &T,
) -> Result<HermiteSeries<T>, OuError> {
    let rank = s.declared_rank();
    let HermiteRank::Finite(r) = rank else {
        return Ok(HermiteSeries::zero(s.truncation()));
    };
    if <T as Scalar>::from_usize(r) + alpha.clone() <= T::zero() {
        let minus_alpha = -alpha.clone();
        let k = (r..=s.truncation())
            .find(|&k| <T as Scalar>::from_usize(k) >= minus_alpha)
            .unwrap_or(r);
        return Err(OuError::ResolventPole {
            k,
            rank: rank.to_string(),
            alpha: format!("{alpha:?}"),
        });
    }
    Ok(s.map_indexed(|k, c| {
        if k < r {
            T::zero()
        } else {
            -c.clone() / (<T as Scalar>::from_usize(k) + alpha.clone())
        }
    }))
}

/// Applies `L - α` to a series, the inverse of [`resolvent_apply`].
pub fn generator_shift_apply<T: Scalar>(s: &HermiteSeries<T>, alpha: &T) -> HermiteSeries<T> {
    s.map_indexed(|k, c| -(<T as Scalar>::from_usize(k) + alpha.clone()) * c.clone())
}

/// Result of the time-integral realization of the resolvent.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolventIntegral {
    pub value: f64,
    pub t_max: f64,
    /// `e^{-(α + rank) t_max}`; the neglected tail is of this order.
    pub tail_bound: f64,
    pub tail_warning: bool,
}

/// Horizon at which `e^{-(α + rank) t}` falls to `1e-10`.
pub fn default_t_max(alpha: f64, rank: usize) -> f64 {
    1e10f64.ln() / (alpha + rank as f64)
}

/// `-∫_0^{t_max} e^{-αt} P_t f(x) dt` with Mehler evaluation of `P_t`.
pub fn resolvent_integral_check(
    f: impl Fn(f64) -> f64,
    alpha: f64,
    rank: usize,
    x: f64,
    t_max: f64,
    rule: &QuadratureRule<f64>,
) -> Result<ResolventIntegral, OuError> {
    let decay = alpha + rank as f64;
    if decay <= 0.0 {
        return Err(OuError::ResolventPole {
            k: rank,
            rank: rank.to_string(),
            alpha: alpha.to_string(),
        });
    }
    if !(t_max.is_finite() && t_max > 0.0) {
        return Err(OuError::InvalidTime(t_max));
    }
    let tail_bound = (-decay * t_max).exp();
    let tail_warning = tail_bound >= 1e-10;
    if tail_warning {
        log::warn!("resolvent tail bound {tail_bound:e} at t_max = {t_max}");
    }
    let mut failure = None;
    let mut integrand = |t: f64| match semigroup_apply_mehler(&f, t, x, rule) {
        Ok(v) => (-alpha * t).exp() * v,
        Err(e) => {
            failure.get_or_insert(e);
            f64::NAN
        }
    };
    let integral = adaptive_integrate(&mut integrand, 0.0, t_max, 1e-11);
    if let Some(e) = failure {
        return Err(e);
    }
    let value = -integral.map_err(|e| OuError::Integration(e.to_string()))?;
    Ok(ResolventIntegral {
        value,
        t_max,
        tail_bound,
        tail_warning,
    })
}
