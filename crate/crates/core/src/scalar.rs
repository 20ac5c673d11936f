//! Scalar abstraction shared by every numerical module.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;
use std::str::FromStr;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Real scalar: `f32` or `f64`.
pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Display
    + LowerExp
    + FromStr
    + Default
    + Sum
    + Send
    + Sync
    + serde::Serialize
    + serde::de::DeserializeOwned
    + 'static
{
    /// Tolerance under which a vector is treated as zero-length
    /// (coincident hips, collinear joints, zero-length links).
    fn degeneracy_tol() -> Self;

    /// Significant decimal digits needed for an exact text round trip.
    const ROUND_TRIP_DIGITS: usize;

    /// Type name recorded in model files.
    const NAME: &'static str;

    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable")
    }

    #[inline]
    fn from_usize_lossy(v: usize) -> Self {
        Self::from_usize(v).expect("usize representable")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().expect("finite scalar")
    }
}

impl Real for f64 {
    const ROUND_TRIP_DIGITS: usize = 17;
    const NAME: &'static str = "f64";
    fn degeneracy_tol() -> Self {
        1e-12
    }
}

impl Real for f32 {
    const ROUND_TRIP_DIGITS: usize = 9;
    const NAME: &'static str = "f32";
    fn degeneracy_tol() -> Self {
        1e-6
    }
}

/// Formats a scalar with enough significant digits to parse back bit-exactly.
pub fn fmt_exact<T: Real>(v: T) -> String {
    format!("{:.*e}", T::ROUND_TRIP_DIGITS - 1, v)
}

#[inline]
pub(crate) fn sq_dist<T: Real>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| {
        let d = x - y;
        acc + d * d
    })
}

#[inline]
pub(crate) fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

#[inline]
pub(crate) fn norm<T: Real>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

/// Uniform draw from `[0, 1)`, kept below one after narrowing to `T`.
pub(crate) fn uniform_unit<T: Real, R: rand::Rng + ?Sized>(rng: &mut R) -> T {
    let v = T::lit(rng.random::<f64>());
    if v < T::one() {
        v
    } else {
        T::one() - T::epsilon()
    }
}
