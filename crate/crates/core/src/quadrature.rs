//! Gauss–Hermite rules for `E[f(N)]`, Gauss–Legendre rules for finite
//! intervals and an adaptive Gauss–Legendre integrator.

use thiserror::Error;

use crate::hermite::normalized_hermite_all;
use crate::scalar::Real;

pub const DEFAULT_ORDER: usize = 128;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadratureError {
    #[error("quadrature order must be at least 1")]
    EmptyRule,
    #[error("node computation did not converge for order {0}")]
    NoConvergence(usize),
    #[error("integrand is not finite at t = {0}")]
    NonFinite(f64),
}

/// Nodes and weights with `Σ w_i f(x_i) ≈ E[f(N)]`, or `≈ ∫ f` for Legendre rules.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule<T> {
    nodes: Vec<T>,
    weights: Vec<T>,
}

impl<T: Real> QuadratureRule<T> {
    /// Gauss–Hermite rule for the standard Gaussian measure; weights sum to 1.
    ///
    /// Nodes are the eigenvalues of the Jacobi matrix with off-diagonal
    /// `sqrt(k)`, isolated by Sturm bisection and polished by Newton steps on
    /// the normalized recurrence.
    pub fn gauss_hermite(order: usize) -> Result<Self, QuadratureError> {
        if order == 0 {
            return Err(QuadratureError::EmptyRule);
        }
        let n = order;
        let bound = T::lit(2.0) * T::lit((n.max(2) - 1) as f64).sqrt() + T::one();
        let mut nodes = Vec::with_capacity(n);
        for i in 0..n {
            // i-th smallest eigenvalue: smallest λ with count(λ) > i
            let (mut lo, mut hi) = (-bound, bound);
            for _ in 0..256 {
                let mid = (lo + hi) / T::lit(2.0);
                if mid <= lo || mid >= hi {
                    break;
                }
                if sturm_count(n, mid) > i {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            nodes.push((lo + hi) / T::lit(2.0));
        }
        let sqrt_n = T::lit(n as f64).sqrt();
        for x in nodes.iter_mut() {
            for _ in 0..3 {
                let psi = normalized_hermite_all(n, *x);
                let denom = sqrt_n * psi[n - 1];
                if denom == T::zero() {
                    break;
                }
                let step = psi[n] / denom;
                if !step.is_finite() {
                    return Err(QuadratureError::NoConvergence(n));
                }
                *x = *x - step;
            }
        }
        let mut weights: Vec<T> = nodes
            .iter()
            .map(|&x| {
                let p = normalized_hermite_all(n - 1, x)[n - 1];
                T::one() / (T::lit(n as f64) * p * p)
            })
            .collect();
        // exact symmetry about 0
        for i in 0..n / 2 {
            let j = n - 1 - i;
            let x = (nodes[j] - nodes[i]) / T::lit(2.0);
            nodes[i] = -x;
            nodes[j] = x;
            let w = (weights[i] + weights[j]) / T::lit(2.0);
            weights[i] = w;
            weights[j] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = T::zero();
        }
        let total = weights.iter().fold(T::zero(), |a, &w| a + w);
        if !total.is_finite() || total <= T::zero() {
            return Err(QuadratureError::NoConvergence(n));
        }
        for w in weights.iter_mut() {
            *w = *w / total;
        }
        Ok(Self { nodes, weights })
    }

    /// Gauss–Legendre rule on `[-1, 1]`; weights sum to 2.
    pub fn gauss_legendre(order: usize) -> Result<Self, QuadratureError> {
        if order == 0 {
            return Err(QuadratureError::EmptyRule);
        }
        let n = order;
        let mut nodes = vec![T::zero(); n];
        let mut weights = vec![T::zero(); n];
        let pi = T::PI();
        for i in 0..n.div_ceil(2) {
            let mut x = (pi * (T::lit(i as f64) + T::lit(0.75)) / (T::lit(n as f64) + T::lit(0.5))).cos();
            let mut dp = T::one();
            let mut converged = false;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x = x - dx;
                if dx.abs() <= T::epsilon() * T::lit(4.0) {
                    converged = true;
                    break;
                }
            }
            if !converged {
                return Err(QuadratureError::NoConvergence(n));
            }
            let (_, d) = legendre(n, x);
            if d.is_finite() {
                dp = d;
            }
            let w = T::lit(2.0) / ((T::one() - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = T::zero();
        }
        Ok(Self { nodes, weights })
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[T] {
        &self.nodes
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    /// `Σ w_i f(x_i)`.
    pub fn apply(&self, mut f: impl FnMut(T) -> T) -> T {
        self.nodes
            .iter()
            .zip(&self.weights)
            .fold(T::zero(), |acc, (&x, &w)| acc + w * f(x))
    }

    /// Legendre rule mapped to `[a, b]`.
    pub fn integrate(&self, a: T, b: T, mut f: impl FnMut(T) -> T) -> T {
        let half = (b - a) / T::lit(2.0);
        let mid = (a + b) / T::lit(2.0);
        half * self.apply(|u| f(mid + half * u))
    }
}

/// Number of eigenvalues of the Hermite Jacobi matrix below `lambda`.
fn sturm_count<T: Real>(n: usize, lambda: T) -> usize {
    let tiny = T::min_positive_value().sqrt();
    let mut count = 0;
    let mut q = -lambda;
    for k in 0..n {
        if k > 0 {
            q = -lambda - T::lit(k as f64) / q;
        }
        if q == T::zero() {
            q = -tiny;
        }
        if q < T::zero() {
            count += 1;
        }
    }
    count
}

/// `(P_n(x), P_n'(x))`.
fn legendre<T: Real>(n: usize, x: T) -> (T, T) {
    let mut p0 = T::one();
    let mut p1 = x;
    for k in 2..=n {
        let kf = T::lit(k as f64);
        let p2 = ((T::lit(2.0) * kf - T::one()) * x * p1 - (kf - T::one()) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (T::one(), T::zero());
    }
    let d = T::lit(n as f64) * (x * p1 - p0) / (x * x - T::one());
    (p1, d)
}

/// Adaptive bisection with a 15-point Gauss–Legendre panel, stopping when the
/// panel and its two halves agree to `tol` (absolute, split between halves).
pub fn adaptive_integrate(
    f: &mut impl FnMut(f64) -> f64,
    a: f64,
    b: f64,
    tol: f64,
) -> Result<f64, QuadratureError> {
    let rule = QuadratureRule::<f64>::gauss_legendre(15)?;
    let whole = panel(&rule, f, a, b)?;
    refine(&rule, f, a, b, whole, tol, 0)
}

fn panel(
    rule: &QuadratureRule<f64>,
    f: &mut impl FnMut(f64) -> f64,
    a: f64,
    b: f64,
) -> Result<f64, QuadratureError> {
    let half = (b - a) / 2.0;
    let mid = (a + b) / 2.0;
    let mut acc = 0.0;
    for (&u, &w) in rule.nodes().iter().zip(rule.weights()) {
        let t = mid + half * u;
        let v = f(t);
        if !v.is_finite() {
            return Err(QuadratureError::NonFinite(t));
        }
        acc += w * v;
    }
    Ok(acc * half)
}

fn refine(
    rule: &QuadratureRule<f64>,
    f: &mut impl FnMut(f64) -> f64,
    a: f64,
    b: f64,
    whole: f64,
    tol: f64,
    depth: usize,
) -> Result<f64, QuadratureError> {
    let m = (a + b) / 2.0;
    let left = panel(rule, f, a, m)?;
    let right = panel(rule, f, m, b)?;
    if (left + right - whole).abs() <= tol || depth >= 40 {
        return Ok(left + right);
    }
    Ok(refine(rule, f, a, m, left, tol / 2.0, depth + 1)?
        + refine(rule, f, m, b, right, tol / 2.0, depth + 1)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn double_factorial(k: usize) -> f64 {
        (1..=k).rev().step_by(2).map(|i| i as f64).product()
    }

    #[test]
    fn hermite_rule_moments() {
        for order in [1usize, 2, 5, 20, 64, 128] {
            let rule = QuadratureRule::<f64>::gauss_hermite(order).unwrap();
            assert_eq!(rule.order(), order);
            let sum: f64 = rule.weights().iter().sum();
            assert!((sum - 1.0).abs() < 1e-14);
            for k in 0..(2 * order).min(24) {
                let m = rule.apply(|x| x.powi(k as i32));
                let want = if k % 2 == 1 { 0.0 } else { double_factorial(k.saturating_sub(1)) };
                let scale = double_factorial(k + k % 2).max(1.0);
                assert!((m - want).abs() / scale < 1e-11, "order {order} k {k}: {m} vs {want}");
            }
        }
    }

    #[test]
    fn hermite_rule_known_nodes() {
        let r = QuadratureRule::<f64>::gauss_hermite(2).unwrap();
        assert!((r.nodes()[1] - 1.0).abs() < 1e-15);
        let r = QuadratureRule::<f64>::gauss_hermite(3).unwrap();
        assert!((r.nodes()[2] - 3f64.sqrt()).abs() < 1e-14);
        assert!((r.weights()[1] - 2.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn hermite_rule_f32() {
        let r = QuadratureRule::<f32>::gauss_hermite(16).unwrap();
        let m4 = r.apply(|x| x.powi(4));
        assert!((m4 - 3.0).abs() < 1e-4);
    }

    #[test]
    fn legendre_rule_polynomials() {
        let r = QuadratureRule::<f64>::gauss_legendre(7).unwrap();
        let sum: f64 = r.weights().iter().sum();
        assert!((sum - 2.0).abs() < 1e-14);
        for k in 0..14 {
            let got = r.integrate(0.0, 1.0, |x| x.powi(k));
            assert!((got - 1.0 / (k as f64 + 1.0)).abs() < 1e-14);
        }
    }

    #[test]
    fn adaptive_handles_peaks() {
        let got = adaptive_integrate(&mut |t| (-t).exp(), 0.0, 30.0, 1e-13).unwrap();
        assert!((got - (1.0 - (-30f64).exp())).abs() < 1e-12);
        let got = adaptive_integrate(&mut |t| 1.0 / (1e-4 + t * t), -1.0, 1.0, 1e-10).unwrap();
        let want = 2.0 * (1.0 / 1e-2) * (1.0f64 / 1e-2).atan();
        assert!((got - want).abs() / want < 1e-10);
        assert!(adaptive_integrate(&mut |_| f64::NAN, 0.0, 1.0, 1e-8).is_err());
    }

    #[test]
    fn zero_order_rejected() {
        assert_eq!(
            QuadratureRule::<f64>::gauss_hermite(0),
            Err(QuadratureError::EmptyRule)
        );
    }
}
