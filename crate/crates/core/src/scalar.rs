//! Scalar abstraction shared by every numeric routine in the crate.
//!
//! The calibrators, metrics and federation engines are written once against
//! [`Scalar`] and instantiated for `f64` (the default used by the experiment
//! harness) and `f32`.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Converts an `f64` literal into this scalar type.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar convertible to f64")
    }

    /// Row-sum tolerance for probability vectors of length `c`.
    fn simplex_tolerance(c: usize) -> Self {
        let floor = Self::lit(1e-6);
        let scaled = Self::epsilon() * Self::from_usize_lossy(4 * c.max(1));
        if scaled > floor {
            scaled
        } else {
            floor
        }
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax<T: Scalar>(v: &[T]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Numerically stable softmax (max-subtraction).
pub fn softmax<T: Scalar>(logits: &[T]) -> Vec<T> {
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = logits.iter().map(|&z| (z - max).exp()).collect();
    let total: T = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// `ln softmax(logits)[index]`, stabilized by max-subtraction.
pub fn log_softmax_at<T: Scalar>(logits: &[T], index: usize) -> T {
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let lse = logits.iter().map(|&z| (z - max).exp()).sum::<T>().ln() + max;
    logits[index] - lse
}

pub fn l2_norm<T: Scalar>(v: &[T]) -> T {
    v.iter().map(|&x| x * x).sum::<T>().sqrt()
}

/// Normalizes `scores` to sum to one; returns `fallback` unchanged when the
/// total is not positive and finite.
pub fn normalize_or<T: Scalar>(scores: Vec<T>, fallback: &[T]) -> Vec<T> {
    let total: T = scores.iter().copied().sum();
    if total > T::zero() && total.is_finite() {
        scores.into_iter().map(|s| s / total).collect()
    } else {
        fallback.to_vec()
    }
}
