//! Scalar abstraction shared by the spectral code.
//!
//! Coefficient maps (derivative, projection, resolvent, S, T_j) only need
//! field arithmetic, so they run over [`Scalar`], which includes exact
//! rationals. Anything involving `exp`, `sqrt` or quadrature needs [`Real`].

use std::fmt::Debug;
use std::ops::Neg;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Float, FloatConst, FromPrimitive, Num, Zero};

pub trait Scalar:
    Clone + Debug + PartialOrd + Num + Neg<Output = Self> + FromPrimitive + Send + Sync + 'static
{
    fn abs_value(&self) -> Self;

    /// False for NaN and infinities. Always true for exact types.
    fn is_finite_value(&self) -> bool;

    /// Tolerance used when a Hermite rank is declared on construction.
    fn default_rank_tol() -> Self;

    fn from_usize(n: usize) -> Self {
        <Self as FromPrimitive>::from_usize(n).expect("usize is representable")
    }

    fn from_i64(n: i64) -> Self {
        <Self as FromPrimitive>::from_i64(n).expect("i64 is representable")
    }
}

/// Floating point scalars (`f32`, `f64`).
pub trait Real: Scalar + Float + FloatConst {
    fn lit(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("f64 literal is representable")
    }
}

macro_rules! impl_float_scalar {
    ($t:ty) => {
        impl Scalar for $t {
            fn abs_value(&self) -> Self {
                Float::abs(*self)
            }
            fn is_finite_value(&self) -> bool {
                Float::is_finite(*self)
            }
            fn default_rank_tol() -> Self {
                1e-10
            }
        }
        impl Real for $t {}
    };
}

impl_float_scalar!(f32);
impl_float_scalar!(f64);

impl Scalar for BigRational {
    fn abs_value(&self) -> Self {
        if *self < Self::zero() {
            -self.clone()
        } else {
            self.clone()
        }
    }
    fn is_finite_value(&self) -> bool {
        true
    }
    fn default_rank_tol() -> Self {
        Self::zero()
    }
}

/// Exact rational from a numerator/denominator pair.
pub fn ratio(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// `k!` in the scalar type.
pub(crate) fn factorial<T: Scalar>(k: usize) -> T {
    (1..=k).fold(T::one(), |acc, i| acc * <T as Scalar>::from_usize(i))
}

pub(crate) fn pow_usize<T: Scalar>(base: &T, exp: usize) -> T {
    let mut out = T::one();
    for _ in 0..exp {
        out = out * base.clone();
    }
    out
}
