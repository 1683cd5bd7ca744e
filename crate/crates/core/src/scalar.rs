//! Scalar abstraction shared by the geometric routines.
//!
//! Trajectory math is written once over [`Scalar`] and instantiated for
//! `f32` and `f64`. Bundles store `f32`; the analysis pipelines run in `f64`.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating-point type usable by the curvature, lensing, landscape and toy
/// geometry routines.
pub trait Scalar:
    Float + FloatConst + FromPrimitive + ToPrimitive + Sum + Debug + Display + Send + Sync + 'static
{
    /// Lossless-enough conversion from an `f64` literal or statistic.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 is representable in every Scalar")
    }

    /// Widen to `f64` for reporting.
    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("Scalar converts to f64")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize fits in Scalar")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

#[inline]
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

#[inline]
pub fn norm<T: Scalar>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

/// `a - b` as a new vector.
#[inline]
pub fn sub<T: Scalar>(a: &[T], b: &[T]) -> Vec<T> {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(&x, &y)| x - y).collect()
}

/// Euclidean distance without materializing the difference.
#[inline]
pub fn distance<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .fold(T::zero(), |acc, (&x, &y)| {
            let d = x - y;
            acc + d * d
        })
        .sqrt()
}

/// Cosine of the angle between `a` and `b`, clamped to `[-1, 1]`.
/// `None` when either norm is below `eps`. Dividing by `√(‖a‖²‖b‖²)` makes
/// the cosine of a vector with itself exactly 1 and with its negation exactly -1.
#[inline]
pub fn clamped_cosine<T: Scalar>(a: &[T], b: &[T], eps: T) -> Option<T> {
    let (aa, bb) = (dot(a, a), dot(b, b));
    if aa.sqrt() < eps || bb.sqrt() < eps {
        return None;
    }
    let c = dot(a, b) / (aa * bb).sqrt();
    Some(c.max(-T::one()).min(T::one()))
}

/// Angle between `a` and `b` in `[0, π]`, `None` when either norm is below
/// `eps`. Uses `2 atan2(‖â - b̂‖, ‖â + b̂‖)`, which stays accurate near 0 and π
/// where `acos` of the cosine loses half the digits.
#[inline]
pub fn angle_between<T: Scalar>(a: &[T], b: &[T], eps: T) -> Option<T> {
    let na = norm(a);
    let nb = norm(b);
    if na < eps || nb < eps {
        return None;
    }
    let (mut diff, mut sum) = (T::zero(), T::zero());
    for (&x, &y) in a.iter().zip(b) {
        let (u, v) = (x / na, y / nb);
        diff = diff + (u - v) * (u - v);
        sum = sum + (u + v) * (u + v);
    }
    Some(T::lit(2.0) * diff.sqrt().atan2(sum.sqrt()))
}

#[cfg(test)]
mod tests {
    #[test]
    fn self_and_opposite_cosines_are_exact() {
        let a = [0.3_f64, -1.7, 2.9, 1e-3];
        let neg: Vec<f64> = a.iter().map(|x| -x).collect();
        assert_eq!(super::clamped_cosine(&a, &a, 1e-12), Some(1.0));
        assert_eq!(super::clamped_cosine(&a, &neg, 1e-12), Some(-1.0));
    }

    use super::*;

    #[test]
    fn cosine_is_clamped() {
        let a = [1.0f64, 1e-9];
        let c = clamped_cosine(&a, &a, 1e-12).unwrap();
        assert!(c <= 1.0);
        assert_eq!(clamped_cosine(&[0.0f64, 0.0], &a, 1e-12), None);
    }

    #[test]
    fn angles_near_the_ends() {
        let a = [1.0f64, 2.0, -3.0];
        assert_eq!(angle_between(&a, &a, 1e-12), Some(0.0));
        assert!(angle_between(&a, &a.map(|x| 2.5 * x), 1e-12).unwrap() < 1e-15);
        let flip = angle_between(&a, &a.map(|x| -x), 1e-12).unwrap();
        assert!((flip - std::f64::consts::PI).abs() < 1e-15);
        let right = angle_between(&[1.0f64, 0.0], &[0.0, 3.0], 1e-12).unwrap();
        assert!((right - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
        let tiny = angle_between(&[1.0f64, 0.0], &[1.0, 1e-10], 1e-12).unwrap();
        assert!((tiny - 1e-10).abs() < 1e-22);
        assert_eq!(angle_between(&[0.0f64, 0.0], &a[..2], 1e-12), None);
    }

    #[test]
    fn generic_over_f32() {
        let a = [3.0f32, 4.0];
        assert_eq!(norm(&a), 5.0);
        assert_eq!(distance(&a, &[0.0, 0.0]), 5.0);
    }
}
