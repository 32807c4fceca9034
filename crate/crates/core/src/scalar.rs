//! Scalar traits the numerical code is generic over.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::str::FromStr;

use num_traits::{Float, FromPrimitive, Num, Signed, ToPrimitive};

/// An ordered field. Enough for table corrections and ratio estimators.
///
/// Implemented for `f32`, `f64` and [`crate::Rational`].
pub trait Scalar:
    Num + Signed + Clone + PartialOrd + FromPrimitive + ToPrimitive + Debug + Send + Sync + 'static
{
}

impl<T> Scalar for T where
    T: Num
        + Signed
        + Clone
        + PartialOrd
        + FromPrimitive
        + ToPrimitive
        + Debug
        + Send
        + Sync
        + 'static
{
}

/// Floating-point scalars used by the iterative fitters.
pub trait Real: Scalar + Float + Sum + Copy + Display + FromStr {}

impl<T> Real for T where T: Scalar + Float + Sum + Copy + Display + FromStr {}

/// Converts an `f64` literal into `F`.
///
/// Panics only if `F` cannot represent finite doubles, which none of the
/// supported scalar types do.
#[inline]
pub fn lit<F: FromPrimitive>(v: f64) -> F {
    F::from_f64(v).expect("scalar type cannot represent an f64 literal")
}

/// Converts `F` into `f64`, mapping unrepresentable values to NaN.
#[inline]
pub fn to_f64<F: ToPrimitive>(v: &F) -> f64 {
    v.to_f64().unwrap_or(f64::NAN)
}

/// Logistic function with the linear predictor clipped to `[-30, 30]`.
#[inline]
pub fn expit<F: Real>(eta: F) -> F {
    let bound = lit::<F>(30.0);
    let eta = eta.max(-bound).min(bound);
    F::one() / (F::one() + (-eta).exp())
}

/// `log(expit(eta))` on the clipped predictor, computed without cancellation.
#[inline]
pub fn log_expit<F: Real>(eta: F) -> F {
    let bound = lit::<F>(30.0);
    let eta = eta.max(-bound).min(bound);
    if eta > F::zero() {
        -(-eta).exp().ln_1p()
    } else {
        eta - eta.exp().ln_1p()
    }
}

/// Log odds of a probability.
#[inline]
pub fn logit<F: Real>(p: F) -> F {
    (p / (F::one() - p)).ln()
}
