use std::fmt;

use num::{BigRational, FromPrimitive, Signed, ToPrimitive, Zero};

/// Arithmetic required by the simplex engine.
///
/// The floating backend compares against small tolerances; the exact backend
/// sets every tolerance to zero so that all sign tests are exact.
pub trait LpScalar: Clone + PartialOrd + fmt::Debug + fmt::Display + Send + Sync {
    fn zero() -> Self;
    fn one() -> Self;
    fn from_f64(value: f64) -> Option<Self>;
    fn to_f64(&self) -> f64;

    fn add(&self, other: &Self) -> Self;
    fn sub(&self, other: &Self) -> Self;
    fn mul(&self, other: &Self) -> Self;
    fn div(&self, other: &Self) -> Self;
    fn neg(&self) -> Self;
    fn abs(&self) -> Self;

    /// `self -= factor * value`.
    fn sub_mul_assign(&mut self, factor: &Self, value: &Self);

    fn is_exact_zero(&self) -> bool;

    /// Values with magnitude below this are treated as zero pivots.
    fn pivot_tol() -> Self;
    /// Primal feasibility tolerance.
    fn feas_tol() -> Self;
    /// Reduced-cost optimality tolerance.
    fn opt_tol() -> Self;
    /// Fill-in below this magnitude is flushed to exact zero after a pivot.
    fn drop_tol() -> Self;
}

impl LpScalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn from_f64(value: f64) -> Option<Self> {
        value.is_finite().then_some(value)
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn add(&self, other: &Self) -> Self {
        self + other
    }
    fn sub(&self, other: &Self) -> Self {
        self - other
    }
    fn mul(&self, other: &Self) -> Self {
        self * other
    }
    fn div(&self, other: &Self) -> Self {
        self / other
    }
    fn neg(&self) -> Self {
        -self
    }
    fn abs(&self) -> Self {
        f64::abs(*self)
    }
    #[inline]
    fn sub_mul_assign(&mut self, factor: &Self, value: &Self) {
        *self -= factor * value;
    }
    fn is_exact_zero(&self) -> bool {
        *self == 0.0
    }
    fn pivot_tol() -> Self {
        1e-11
    }
    fn feas_tol() -> Self {
        1e-9
    }
    fn opt_tol() -> Self {
        1e-9
    }
    fn drop_tol() -> Self {
        1e-14
    }
}

impl LpScalar for BigRational {
    fn zero() -> Self {
        Zero::zero()
    }
    fn one() -> Self {
        num::One::one()
    }
    fn from_f64(value: f64) -> Option<Self> {
        <BigRational as FromPrimitive>::from_f64(value)
    }
    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
    fn add(&self, other: &Self) -> Self {
        self + other
    }
    fn sub(&self, other: &Self) -> Self {
        self - other
    }
    fn mul(&self, other: &Self) -> Self {
        self * other
    }
    fn div(&self, other: &Self) -> Self {
        self / other
    }
    fn neg(&self) -> Self {
        -self
    }
    fn abs(&self) -> Self {
        Signed::abs(self)
    }
    fn sub_mul_assign(&mut self, factor: &Self, value: &Self) {
        *self -= factor * value;
    }
    fn is_exact_zero(&self) -> bool {
        Zero::is_zero(self)
    }
    fn pivot_tol() -> Self {
        Zero::zero()
    }
    fn feas_tol() -> Self {
        Zero::zero()
    }
    fn opt_tol() -> Self {
        Zero::zero()
    }
    fn drop_tol() -> Self {
        Zero::zero()
    }
}
