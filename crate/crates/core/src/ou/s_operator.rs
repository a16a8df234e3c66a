//! `S φ = (L - 2)^{-1} φ''` and the compositions `T_j`.

use crate::hermite::{HermiteRank, HermiteSeries};
use crate::quadrature::QuadratureRule;
use crate::scalar::{pow_usize, Real, Scalar};

use super::OuError;

/// Spectral `S`: `c_k(Sφ) = -(k+1) c_{k+2}(φ)`, truncation `N - 2`.
/// Series of truncation below 2 map to the zero constant.
pub fn s_operator<T: Scalar>(s: &HermiteSeries<T>) -> HermiteSeries<T> {
    let n = s.truncation();
    if n < 2 {
        return HermiteSeries::zero(0);
    }
    let coeffs = (0..=n - 2)
        .map(|k| -<T as Scalar>::from_usize(k + 1) * s.coeff(k + 2))
        .collect();
    HermiteSeries::new(coeffs)
}

/// Quadrature realization of `S` for bounded `f`:
///
/// `Sf(x) = f(x) - E f(N) - x ∫_0^{π/2} E[N f(x cos θ + N sin θ)] dθ`,
///
/// the Mehler time integral after `e^{-t} = cos θ`, which leaves a smooth
/// integrand on a finite interval.
pub fn s_operator_mehler<T: Real>(
    f: impl Fn(T) -> T,
    x: T,
    rule: &QuadratureRule<T>,
) -> Result<T, OuError> {
    let theta_rule = QuadratureRule::<T>::gauss_legendre(64)
        .map_err(|e| OuError::Integration(e.to_string()))?;
    let eval = |z: T| {
        let v = f(z);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(OuError::NonFinite(z.to_f64().unwrap_or(f64::NAN)))
        }
    };
    let mut mean = T::zero();
    for (&y, &w) in rule.nodes().iter().zip(rule.weights()) {
        mean = mean + w * eval(y)?;
    }
    let half_pi = T::FRAC_PI_2();
    let mut integral = T::zero();
    for (&u, &wu) in theta_rule.nodes().iter().zip(theta_rule.weights()) {
        let theta = half_pi * (u + T::one()) / T::lit(2.0);
        let (sin, cos) = theta.sin_cos();
        let mut inner = T::zero();
        for (&y, &w) in rule.nodes().iter().zip(rule.weights()) {
            inner = inner + w * y * eval(x * cos + y * sin)?;
        }
        integral = integral + wu * inner;
    }
    integral = integral * half_pi / T::lit(2.0);
    Ok(eval(x)? - mean - x * integral)
}

/// Coefficients `a_0..a_{2p-1}` of `P(X) = X(X+1)···(X+2p-2)`.
pub fn shifted_product<T: Scalar>(p: usize) -> Vec<T> {
    let mut a = vec![T::one()];
    for i in 0..=(2 * p - 2) {
        // multiply by (X + i)
        let mut next = vec![T::zero(); a.len() + 1];
        for (d, c) in a.iter().enumerate() {
            next[d + 1] = next[d + 1].clone() + c.clone();
            next[d] = next[d].clone() + c.clone() * <T as Scalar>::from_usize(i);
        }
        a = next;
    }
    a
}

fn horner<T: Scalar>(coeffs: &[T], x: &T) -> T {
    coeffs
        .iter()
        .rev()
        .fold(T::zero(), |acc, c| acc * x.clone() + c.clone())
}

fn check_t_args<T: Scalar>(s: &HermiteSeries<T>, p: usize, j: usize) -> Result<(), OuError> {
    if p < 2 {
        return Err(OuError::InvalidParameter(format!("p must be at least 2, got {p}")));
    }
    if j > 2 * p - 2 {
        return Err(OuError::InvalidParameter(format!(
            "j must lie in 0..={}, got {j}",
            2 * p - 2
        )));
    }
    match s.declared_rank() {
        HermiteRank::Finite(r) if r < 2 => Err(OuError::RankTooLow {
            rank: r.to_string(),
            required: 2,
        }),
        _ => Ok(()),
    }
}

/// `T_j φ = -P_j(p(L-2)) P(p(L-2))^{-1} φ''` with
/// `P_j(X) = Σ_{α=j+1}^{2p-1} a_α X^{α-j-1}`.
///
/// On index `k` the operator `p(L - 2)` is the scalar `-p(k+2)`.
pub fn t_operator<T: Scalar>(
    s: &HermiteSeries<T>,
    p: usize,
    j: usize,
) -> Result<HermiteSeries<T>, OuError> {
    check_t_args(s, p, j)?;
    let n = s.truncation();
    if n < 2 {
        return Ok(HermiteSeries::zero(0));
    }
    let a = shifted_product::<T>(p);
    let pj = &a[j + 1..];
    let mut coeffs = Vec::with_capacity(n - 1);
    for k in 0..=n - 2 {
        let lambda = -<T as Scalar>::from_usize(p * (k + 2));
        let denom = horner(&a, &lambda);
        if denom.is_zero() {
            return Err(OuError::ProductPole(k));
        }
        let second = <T as Scalar>::from_usize((k + 1) * (k + 2)) * s.coeff(k + 2);
        coeffs.push(-horner(pj, &lambda) / denom * second);
    }
    Ok(HermiteSeries::new(coeffs))
}

/// `T_j φ = -Q_j(L) S φ` with
/// `Q_j(X) = p^{-j-1}(X-2)^{-j} - Σ_{α=1}^{j} a_α p^{α-j-1}(X-2)^{α-j} / P(p(X-2))`.
pub fn t_operator_via_s<T: Scalar>(
    s: &HermiteSeries<T>,
    p: usize,
    j: usize,
) -> Result<HermiteSeries<T>, OuError> {
    check_t_args(s, p, j)?;
    let a = shifted_product::<T>(p);
    let pp = <T as Scalar>::from_usize(p);
    let sphi = s_operator(s);
    let mut coeffs = Vec::with_capacity(sphi.coeffs().len());
    for (k, c) in sphi.coeffs().iter().enumerate() {
        // X - 2 at X = -k
        let y = -<T as Scalar>::from_usize(k + 2);
        let big_p = horner(&a, &(pp.clone() * y.clone()));
        if big_p.is_zero() {
            return Err(OuError::ProductPole(k));
        }
        let mut q = T::one() / (pow_usize(&pp, j + 1) * pow_usize(&y, j));
        for (alpha, a_alpha) in a.iter().enumerate().take(j + 1).skip(1) {
            q = q - a_alpha.clone() / (pow_usize(&pp, j + 1 - alpha) * pow_usize(&y, j - alpha))
                / big_p.clone();
        }
        coeffs.push(-q * c.clone());
    }
    Ok(HermiteSeries::new(coeffs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hermite::hermite_eval_all;
    use crate::scalar::ratio;
    use num_rational::BigRational;
    use proptest::prelude::*;

    #[test]
    fn s_examples() {
        let s3 = s_operator(&HermiteSeries::<f64>::basis(3, 3));
        assert_eq!(s3.coeffs(), &[0.0, -2.0]);
        let s4 = s_operator(&HermiteSeries::<f64>::basis(4, 4));
        assert_eq!(s4.coeffs(), &[0.0, 0.0, -3.0]);
        assert!(s_operator(&HermiteSeries::new(vec![1.0, 2.0])).is_zero());
        assert!(s_operator(&HermiteSeries::new(vec![1.0, 2.0, 0.0])).is_zero());
    }

    #[test]
    fn s_matches_composition_oracle() {
        // (L - 2)^{-1} applied to φ'' coefficient by coefficient
        let s = HermiteSeries::new(vec![ratio(1, 2), ratio(3, 1), ratio(-1, 5), ratio(2, 3), ratio(7, 1), ratio(-4, 9)]);
        let second = s.derivative().derivative();
        let oracle: Vec<BigRational> = second
            .coeffs()
            .iter()
            .enumerate()
            .map(|(k, c)| c.clone() / ratio(-(k as i64) - 2, 1))
            .collect();
        assert_eq!(s_operator(&s).coeffs(), &oracle[..]);
    }

    #[test]
    fn s_mehler_examples() {
        let rule = QuadratureRule::<f64>::gauss_hermite(64).unwrap();
        assert!(s_operator_mehler(|_| 2.5, 1.3, &rule).unwrap().abs() < 1e-13);
        let h2 = |x: f64| x * x - 1.0;
        assert!((s_operator_mehler(h2, 0.0, &rule).unwrap() + 1.0).abs() < 1e-12);
        let h3 = |x: f64| x * x * x - 3.0 * x;
        assert!((s_operator_mehler(h3, 1.0, &rule).unwrap() + 2.0).abs() < 1e-12);
    }

    #[test]
    fn s_mehler_matches_spectral_up_to_degree_8() {
        let rule = QuadratureRule::<f64>::gauss_hermite(128).unwrap();
        let s = HermiteSeries::new(vec![0.3, -0.2, 0.5, 0.1, -0.05, 0.02, 0.01, -0.004, 0.001]);
        let spectral = s_operator(&s);
        for x in [-3.0, -1.0, 0.0, 0.4, 2.5] {
            let got = s_operator_mehler(|y| s.eval(y), x, &rule).unwrap();
            assert!((got - spectral.eval(x)).abs() < 1e-5, "x={x}");
        }
    }

    #[test]
    fn s_mehler_growth_bound() {
        let rule = QuadratureRule::<f64>::gauss_hermite(128).unwrap();
        for f in [|y: f64| y.tanh(), |y: f64| (3.0 * y).cos(), |y: f64| (-y * y).exp()] {
            for x in [-5.0, -1.0, 0.0, 2.0, 6.0] {
                let v = s_operator_mehler(f, x, &rule).unwrap();
                assert!(v.abs() <= (2.0 + f64::abs(x)) * 1.0 + 1e-8);
            }
        }
    }

    #[test]
    fn shifted_product_coefficients() {
        // X(X+1)(X+2) = X^3 + 3X^2 + 2X
        let exact: Vec<BigRational> = shifted_product(2);
        assert_eq!(exact[2], ratio(3, 1));
        let a: Vec<f64> = shifted_product(2);
        assert_eq!(a, vec![0.0, 2.0, 3.0, 1.0]);
        let a: Vec<f64> = shifted_product(3);
        // X(X+1)(X+2)(X+3)(X+4)
        assert_eq!(a, vec![0.0, 24.0, 50.0, 35.0, 10.0, 1.0]);
    }

    #[test]
    fn t_example_h4() {
        let h4 = HermiteSeries::basis(4, 4);
        let t: HermiteSeries<BigRational> = t_operator(&h4.clone(), 2, 0).unwrap();
        assert_eq!(t.coeffs(), &[ratio(0, 1), ratio(0, 1), ratio(3, 2)]);
        assert_eq!(t_operator_via_s(&h4, 2, 0).unwrap(), t);
    }

    #[test]
    fn t_errors_and_zero() {
        let r1 = HermiteSeries::<f64>::new(vec![0.0, 1.0, 1.0]);
        assert!(matches!(t_operator(&r1, 2, 0), Err(OuError::RankTooLow { .. })));
        assert!(t_operator(&HermiteSeries::<f64>::zero(5), 2, 0).unwrap().is_zero());
        let h3 = HermiteSeries::<f64>::basis(3, 3);
        assert!(t_operator(&h3, 1, 0).is_err());
        assert!(t_operator(&h3, 2, 3).is_err());
        assert!(t_operator(&h3, 2, 2).is_ok());
    }

    #[test]
    fn t_values_at_x() {
        // check the pointwise action on H_5 against the scalar eigen-divisions
        let h5 = HermiteSeries::<f64>::basis(5, 5);
        let t = t_operator(&h5, 3, 1).unwrap();
        let a: Vec<f64> = shifted_product(3);
        let lambda: f64 = -3.0 * 5.0;
        let p1: f64 = a[2..].iter().enumerate().map(|(d, c)| c * lambda.powi(d as i32)).sum();
        let pp: f64 = a.iter().enumerate().map(|(d, c)| c * lambda.powi(d as i32)).sum();
        let want = -p1 / pp * 20.0;
        let x = 0.7;
        assert!((t.eval(x) - want * hermite_eval_all(3, x)[3]).abs() < 1e-12);
    }

    fn rank2_series() -> impl Strategy<Value = HermiteSeries<BigRational>> {
        prop::collection::vec(-9i64..9, 1..8).prop_map(|v| {
            let mut c = vec![ratio(0, 1), ratio(0, 1)];
            c.extend(v.into_iter().map(|n| ratio(n, 3)));
            HermiteSeries::new(c)
        })
    }

    proptest! {
        #[test]
        fn s_spectral_law(c in prop::collection::vec(-50i64..50, 0..10)) {
            let s = HermiteSeries::new(c.iter().map(|&n| ratio(n, 11)).collect());
            let out = s_operator(&s);
            for k in 0..out.coeffs().len() {
                prop_assert_eq!(out.coeff(k), -ratio(k as i64 + 1, 1) * s.coeff(k + 2));
            }
        }

        #[test]
        fn t_two_routes_agree(s in rank2_series(), p in 2usize..5, j_seed in 0usize..100) {
            let j = j_seed % (2 * p - 1);
            let a = t_operator(&s, p, j).unwrap();
            let b = t_operator_via_s(&s, p, j).unwrap();
            prop_assert_eq!(&a, &b);
            if let Some(r) = s.declared_rank().finite() {
                prop_assert!(a.declared_rank() >= HermiteRank::Finite(r - 2));
            }
        }
    }
}
