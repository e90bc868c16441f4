//! Scalar abstraction: exact rationals or tolerance-bearing floats.
//!
//! The engine is generic over [`Scalar`]. `Exact` is a big-integer rational
//! with tolerance zero, so equality checks are literal identities; `Approx`
//! is `f64` and every comparison goes through an explicit tolerance carried
//! by the caller. Keeping the tolerance out of the trait (and in the check
//! routines) lets the same comparison code serve both modes.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

/// Numeric requirements for every quantity the engine manipulates.
pub trait Scalar:
    Clone
    + PartialEq
    + PartialOrd
    + fmt::Debug
    + fmt::Display
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Zero
    + One
    + 'static
{
    /// True when arithmetic is exact and all comparisons use tolerance zero.
    const EXACT: bool;

    fn from_i64(v: i64) -> Self;

    /// The rational `num/den`. `den` must be nonzero.
    fn from_ratio(num: i64, den: i64) -> Self;

    /// Lossy conversion for rendering only, never for comparisons.
    fn to_f64_lossy(&self) -> f64;

    fn abs(&self) -> Self {
        if *self < Self::zero() {
            -self.clone()
        } else {
            self.clone()
        }
    }

    /// Nonnegative integer power.
    fn pow_u(&self, e: usize) -> Self {
        let mut acc = Self::one();
        for _ in 0..e {
            acc = acc * self.clone();
        }
        acc
    }
}

/// Arbitrary-precision rational scalar.
pub type Exact = BigRational;

/// Floating-point scalar.
pub type Approx = f64;

impl Scalar for BigRational {
    const EXACT: bool = true;

    fn from_i64(v: i64) -> Self {
        BigRational::from_integer(BigInt::from(v))
    }

    fn from_ratio(num: i64, den: i64) -> Self {
        assert!(den != 0, "zero denominator");
        BigRational::new(BigInt::from(num), BigInt::from(den))
    }

    fn to_f64_lossy(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn abs(&self) -> Self {
        Signed::abs(self)
    }
}

impl Scalar for f64 {
    const EXACT: bool = false;

    fn from_i64(v: i64) -> Self {
        v as f64
    }

    fn from_ratio(num: i64, den: i64) -> Self {
        assert!(den != 0, "zero denominator");
        num as f64 / den as f64
    }

    fn to_f64_lossy(&self) -> f64 {
        *self
    }

    fn abs(&self) -> Self {
        f64::abs(*self)
    }
}

/// `|a - b| <= tol`; with `tol = 0` this is exact equality.
pub fn close<S: Scalar>(a: &S, b: &S, tol: &S) -> bool {
    (a.clone() - b.clone()).abs() <= *tol
}

/// `a <= b + tol`.
pub fn le_tol<S: Scalar>(a: &S, b: &S, tol: &S) -> bool {
    a.clone() - b.clone() <= *tol
}

/// Sum of a sequence of scalars.
pub fn total<S: Scalar>(xs: impl IntoIterator<Item = S>) -> S {
    xs.into_iter().fold(S::zero(), |acc, x| acc + x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_ratio_roundtrip() {
        let x = Exact::from_ratio(3, 4);
        let y = Exact::from_ratio(1, 4);
        assert_eq!(x + y, Exact::one());
    }

    #[test]
    fn pow_and_abs() {
        let h = Exact::from_ratio(1, 2);
        assert_eq!(h.pow_u(3), Exact::from_ratio(1, 8));
        assert_eq!(Scalar::abs(&-h.clone()), h);
        assert_eq!(Exact::from_i64(5).pow_u(0), Exact::one());
    }

    #[test]
    fn close_is_exact_at_zero_tol() {
        let a = Exact::from_ratio(1, 3);
        let b = Exact::from_ratio(2, 6);
        assert!(close(&a, &b, &Exact::zero()));
        let c = Exact::from_ratio(1, 3000000);
        assert!(!close(&a, &(b + c), &Exact::zero()));
    }
}
