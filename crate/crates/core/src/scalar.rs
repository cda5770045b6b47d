//! Scalar abstraction shared by every numerical module.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// Floating point scalar the solvers are generic over (`f32` or `f64`).
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + NumAssign + Sum + Debug + Display + Send + Sync + 'static
{
    /// Converts an `f64` literal into the scalar type.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal representable in scalar type")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable in scalar type")
    }

    #[inline]
    fn f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    #[inline]
    fn two_pi() -> Self {
        Self::TAU()
    }

    /// Wraps an angle into `[0, 2π)`.
    #[inline]
    fn wrap_angle(self) -> Self {
        let tau = Self::TAU();
        let mut r = self % tau;
        if r < Self::zero() {
            r += tau;
        }
        if r >= tau {
            r -= tau;
        }
        r
    }

    /// Signed angular difference `self - other` mapped into `[-π, π)`.
    #[inline]
    fn angle_diff(self, other: Self) -> Self {
        let pi = Self::PI();
        (self - other + pi).wrap_angle() - pi
    }
}

impl Real for f32 {}
impl Real for f64 {}
