// SPDX-License-Identifier: MIT OR Apache-2.0

//! Floating-point scalar abstraction shared by every numeric routine.

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

/// Floating-point scalar: `f32` or `f64`.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` constant into this scalar.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 constant representable")
    }

    #[inline]
    fn from_usize_lossy(x: usize) -> Self {
        Self::from_usize(x).expect("usize representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar convertible to f64")
    }

    /// Default absolute convergence tolerance: `1e-8`, widened for
    /// low-precision types.
    #[inline]
    fn default_tol() -> Self {
        Self::lit(1e-8).max(Self::epsilon() * Self::lit(100.0))
    }

    /// `log(1 + exp(x))` without overflow.
    #[inline]
    fn softplus(self) -> Self {
        if self > Self::zero() {
            self + (-self).exp().ln_1p()
        } else {
            self.exp().ln_1p()
        }
    }

    /// Logistic function `1 / (1 + exp(-x))` without overflow.
    #[inline]
    fn sigmoid(self) -> Self {
        if self >= Self::zero() {
            Self::one() / (Self::one() + (-self).exp())
        } else {
            let e = self.exp();
            e / (Self::one() + e)
        }
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// `log(sum(exp(xs)))`, returning `-inf` for an empty or all `-inf` input.
pub fn log_sum_exp<T: Real>(xs: impl IntoIterator<Item = T> + Clone) -> T {
    let m = xs
        .clone()
        .into_iter()
        .fold(T::neg_infinity(), |a, b| a.max(b));
    if m == T::neg_infinity() {
        return m;
    }
    let s: T = xs.into_iter().map(|x| (x - m).exp()).sum();
    m + s.ln()
}

/// `log(exp(a) + exp(b))`.
#[inline]
pub fn log_add_exp<T: Real>(a: T, b: T) -> T {
    let m = a.max(b);
    if m == T::neg_infinity() {
        return m;
    }
    m + ((a - m).exp() + (b - m).exp()).ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softplus_is_stable() {
        assert_eq!(500.0f64.softplus(), 500.0);
        assert!((0.0f64.softplus() - 2f64.ln()).abs() < 1e-15);
        assert!((-800.0f64).softplus() >= 0.0);
        assert!(1000.0f32.softplus().is_finite());
    }

    #[test]
    fn sigmoid_saturates() {
        assert_eq!(800.0f64.sigmoid(), 1.0);
        assert_eq!((-800.0f64).sigmoid(), 0.0);
        assert_eq!(0.0f64.sigmoid(), 0.5);
    }

    #[test]
    fn log_sum_exp_matches_direct() {
        let xs = [0.1f64, -2.0, 3.5];
        let direct = xs.iter().map(|x| x.exp()).sum::<f64>().ln();
        assert!((log_sum_exp(xs) - direct).abs() < 1e-14);
        assert_eq!(log_sum_exp([f64::NEG_INFINITY; 3]), f64::NEG_INFINITY);
        assert!((log_add_exp(1.0f64, 2.0) - (1f64.exp() + 2f64.exp()).ln()).abs() < 1e-14);
    }

    #[test]
    fn default_tolerance_widens_for_f32() {
        assert_eq!(f64::default_tol(), 1e-8);
        assert!(f32::default_tol() > 1e-6);
    }
}
