//! Probabilists' Hermite polynomials and truncated Hermite series.
//!
//! `H_0 = 1`, `H_1 = x`, `H_{k+1} = x H_k - k H_{k-1}`; `E[H_j(N) H_k(N)] = k! δ_jk`
//! for `N ~ N(0,1)`. A [`HermiteSeries`] stores `c_0..c_N` of `Σ c_k H_k`.

use std::fmt::{self, Display};
use std::str::FromStr;

use thiserror::Error;

use crate::quadrature::QuadratureRule;
use crate::scalar::{factorial, Real, Scalar};

/// Largest `k` for which `k!` is representable in `f64`.
pub const MAX_FACTORIAL: usize = 170;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HermiteError {
    #[error("k! overflows for k = {0} (limit {MAX_FACTORIAL})")]
    FactorialOverflow(usize),
    #[error("function value is not finite at quadrature node x = {node}")]
    NonFiniteValue { node: f64 },
    #[error("projection order {order} exceeds truncation + 1 = {limit}")]
    ProjectionOrder { order: usize, limit: usize },
    #[error("malformed series record: {0}")]
    Parse(String),
}

/// Values `[H_0(x), ..., H_n(x)]` by the three-term recurrence.
pub fn hermite_eval_all<T: Scalar>(n: usize, x: T) -> Vec<T> {
    let mut out = Vec::with_capacity(n + 1);
    out.push(T::one());
    if n == 0 {
        return out;
    }
    out.push(x.clone());
    for k in 1..n {
        let next = x.clone() * out[k].clone() - <T as Scalar>::from_usize(k) * out[k - 1].clone();
        out.push(next);
    }
    out
}

/// Normalized values `H_k(x) / sqrt(k!)`, stable for large `k`.
pub(crate) fn normalized_hermite_all<T: Real>(n: usize, x: T) -> Vec<T> {
    let mut out = Vec::with_capacity(n + 1);
    out.push(T::one());
    if n == 0 {
        return out;
    }
    out.push(x);
    for k in 1..n {
        let kk = T::lit(k as f64);
        let next = (x * out[k] - kk.sqrt() * out[k - 1]) / (kk + T::one()).sqrt();
        out.push(next);
    }
    out
}

/// `‖H_k‖² = k!` in `L²(γ)`.
pub fn hermite_norm_sq<T: Scalar>(k: usize) -> Result<T, HermiteError> {
    if k > MAX_FACTORIAL {
        return Err(HermiteError::FactorialOverflow(k));
    }
    let value: T = factorial(k);
    if !value.is_finite_value() {
        return Err(HermiteError::FactorialOverflow(k));
    }
    Ok(value)
}

/// Hermite rank: index of the first coefficient above tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum HermiteRank {
    Finite(usize),
    Infinite,
}

impl HermiteRank {
    pub fn finite(self) -> Option<usize> {
        match self {
            HermiteRank::Finite(r) => Some(r),
            HermiteRank::Infinite => None,
        }
    }
}

impl Display for HermiteRank {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HermiteRank::Finite(r) => write!(f, "{r}"),
            HermiteRank::Infinite => f.write_str("infinite"),
        }
    }
}

/// Truncated expansion `Σ_{k=0}^{N} c_k H_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct HermiteSeries<T> {
    coeffs: Vec<T>,
    declared_rank: HermiteRank,
}

impl<T: Scalar> HermiteSeries<T> {
    /// Builds a series, declaring its rank with the scalar's default tolerance.
    /// An empty vector is read as the zero constant.
    pub fn new(coeffs: Vec<T>) -> Self {
        Self::with_rank_tol(coeffs, &T::default_rank_tol())
    }

    pub fn with_rank_tol(mut coeffs: Vec<T>, tol: &T) -> Self {
        if coeffs.is_empty() {
            coeffs.push(T::zero());
        }
        let declared_rank = rank_of(&coeffs, tol);
        Self {
            coeffs,
            declared_rank,
        }
    }

    pub fn zero(truncation: usize) -> Self {
        Self::new(vec![T::zero(); truncation + 1])
    }

    /// `H_k` as a series truncated at `max(k, truncation)`.
    pub fn basis(k: usize, truncation: usize) -> Self {
        let mut coeffs = vec![T::zero(); truncation.max(k) + 1];
        coeffs[k] = T::one();
        Self::new(coeffs)
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<T> {
        self.coeffs
    }

    /// Coefficient `c_k`, zero past the truncation.
    pub fn coeff(&self, k: usize) -> T {
        self.coeffs.get(k).cloned().unwrap_or_else(T::zero)
    }

    pub fn truncation(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn declared_rank(&self) -> HermiteRank {
        self.declared_rank
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_zero())
    }

    /// Smallest `k` with `|c_k| > tol`.
    pub fn rank(&self, tol: &T) -> HermiteRank {
        rank_of(&self.coeffs, tol)
    }

    /// `c'_k = (k+1) c_{k+1}`; truncation drops by one (stays 0 for constants).
    pub fn derivative(&self) -> Self {
        if self.coeffs.len() == 1 {
            return Self::zero(0);
        }
        let coeffs = (0..self.truncation())
            .map(|k| <T as Scalar>::from_usize(k + 1) * self.coeffs[k + 1].clone())
            .collect();
        Self::new(coeffs)
    }

    /// Zeroes `c_0..c_{m-1}`.
    pub fn project_at_least(&self, m: usize) -> Result<Self, HermiteError> {
        let limit = self.truncation() + 1;
        if m > limit {
            return Err(HermiteError::ProjectionOrder { order: m, limit });
        }
        let mut coeffs = self.coeffs.clone();
        for c in coeffs.iter_mut().take(m) {
            *c = T::zero();
        }
        Ok(Self::new(coeffs))
    }

    pub fn scale(&self, factor: &T) -> Self {
        Self::new(
            self.coeffs
                .iter()
                .map(|c| c.clone() * factor.clone())
                .collect(),
        )
    }

    /// Coefficient-wise map `c_k ↦ g(k, c_k)`.
    pub fn map_indexed(&self, mut g: impl FnMut(usize, &T) -> T) -> Self {
        Self::new(
            self.coeffs
                .iter()
                .enumerate()
                .map(|(k, c)| g(k, c))
                .collect(),
        )
    }

    /// Sum of two series; the result has the larger truncation.
    pub fn add(&self, other: &Self) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        Self::new((0..n).map(|k| self.coeff(k) + other.coeff(k)).collect())
    }

    /// Pointwise value `Σ c_k H_k(x)`.
    pub fn eval(&self, x: T) -> T {
        hermite_eval_all(self.truncation(), x)
            .into_iter()
            .zip(&self.coeffs)
            .fold(T::zero(), |acc, (h, c)| acc + h * c.clone())
    }

    /// `‖φ‖²_{L²(γ)} = Σ c_k² k!`.
    pub fn norm_sq(&self) -> T {
        self.coeffs
            .iter()
            .enumerate()
            .fold(T::zero(), |acc, (k, c)| {
                acc + c.clone() * c.clone() * factorial::<T>(k)
            })
    }
}

fn rank_of<T: Scalar>(coeffs: &[T], tol: &T) -> HermiteRank {
    coeffs
        .iter()
        .position(|c| c.abs_value() > *tol)
        .map_or(HermiteRank::Infinite, HermiteRank::Finite)
}

impl<T: Scalar + Display> HermiteSeries<T> {
    /// `index,coefficient` records, one per line, with a header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,coefficient\n");
        for (k, c) in self.coeffs.iter().enumerate() {
            out.push_str(&format!("{k},{c}\n"));
        }
        out
    }
}

impl<T: Scalar + FromStr> HermiteSeries<T> {
    /// Parses the `index,coefficient` format; missing indices are zero.
    pub fn from_csv(text: &str) -> Result<Self, HermiteError> {
        let mut pairs = Vec::new();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            if line.starts_with('#') || line == "index,coefficient" {
                continue;
            }
            let (idx, val) = line
                .split_once(',')
                .ok_or_else(|| HermiteError::Parse(line.to_string()))?;
            let k: usize = idx
                .trim()
                .parse()
                .map_err(|_| HermiteError::Parse(line.to_string()))?;
            let c: T = val
                .trim()
                .parse()
                .map_err(|_| HermiteError::Parse(line.to_string()))?;
            pairs.push((k, c));
        }
        let n = pairs.iter().map(|(k, _)| *k).max().unwrap_or(0);
        let mut coeffs = vec![T::zero(); n + 1];
        for (k, c) in pairs {
            coeffs[k] = c;
        }
        Ok(Self::new(coeffs))
    }
}

/// `c_k = E[H_k(N) f(N)] / k!` for `k ≤ truncation`, by Gauss–Hermite quadrature.
///
/// Exact for polynomial `f` as long as `deg f + truncation < 2 * rule.order()`.
pub fn coefficients_of<T: Real>(
    f: impl Fn(T) -> T,
    truncation: usize,
    rule: &QuadratureRule<T>,
) -> Result<HermiteSeries<T>, HermiteError> {
    let mut acc = vec![T::zero(); truncation + 1];
    for (&x, &w) in rule.nodes().iter().zip(rule.weights()) {
        let fx = f(x);
        if !fx.is_finite() {
            return Err(HermiteError::NonFiniteValue {
                node: x.to_f64().unwrap_or(f64::NAN),
            });
        }
        for (a, psi) in acc.iter_mut().zip(normalized_hermite_all(truncation, x)) {
            *a = *a + w * psi * fx;
        }
    }
    // E[ψ_k f] / sqrt(k!) with ψ_k = H_k / sqrt(k!)
    let mut inv_sqrt_fact = T::one();
    let coeffs = acc
        .into_iter()
        .enumerate()
        .map(|(k, a)| {
            if k > 0 {
                inv_sqrt_fact = inv_sqrt_fact / T::lit(k as f64).sqrt();
            }
            a * inv_sqrt_fact
        })
        .collect();
    Ok(HermiteSeries::new(coeffs))
}
