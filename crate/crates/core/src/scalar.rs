//! Scalar abstraction and log-domain arithmetic.
//!
//! Everything in this crate is generic over [`Scalar`], implemented for `f32`
//! and `f64`. Schmidt weights of the analytic families reach `e^{-10^10}`, so
//! sums and differences of weights are carried out on logarithms.

use std::fmt::{Debug, Display, LowerExp};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use serde::Serialize;

/// Floating-point type the numerics run on.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Display
    + LowerExp
    + Default
    + Serialize
    + Send
    + Sync
    + 'static
{
    /// Absolute tolerance on `|sum of weights - 1|`.
    fn normalization_tolerance() -> Self;

    /// Converts an `f64` constant into this scalar type.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    #[inline]
    fn from_index(n: usize) -> Self {
        Self::from_usize(n).expect("index representable in scalar type")
    }
}

impl Scalar for f64 {
    fn normalization_tolerance() -> f64 {
        1e-9
    }
}

impl Scalar for f32 {
    fn normalization_tolerance() -> f32 {
        1e-5
    }
}

/// `ln(e^a + e^b)`.
#[inline]
pub fn log_add_exp<T: Scalar>(a: T, b: T) -> T {
    if a == T::neg_infinity() {
        return b;
    }
    if b == T::neg_infinity() {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// `ln(e^a - e^b)` for `a >= b`. Returns `-inf` when `a == b`.
#[inline]
pub fn log_sub_exp<T: Scalar>(a: T, b: T) -> T {
    debug_assert!(a >= b, "log_sub_exp requires a >= b");
    if b == T::neg_infinity() {
        return a;
    }
    a + (-(b - a).exp_m1()).ln()
}

/// `ln(sum_i e^{x_i})`, two-pass with max shift. Empty input gives `-inf`.
pub fn log_sum_exp<T: Scalar>(xs: &[T]) -> T {
    let m = xs.iter().copied().fold(T::neg_infinity(), T::max);
    if !m.is_finite() {
        return m;
    }
    let s = xs.iter().fold(T::zero(), |acc, &x| acc + (x - m).exp());
    m + s.ln()
}
