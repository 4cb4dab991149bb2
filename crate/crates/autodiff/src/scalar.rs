use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, MulAssign, SubAssign};

use num_traits::Float;

/// Floating-point element type of a [`crate::Tensor`].
///
/// Training runs in `f32`; gradient checks run in `f64`.
pub trait Scalar:
    Float + AddAssign + SubAssign + MulAssign + Default + Debug + Display + Sum + Send + Sync + 'static
{
    fn from_f(v: f64) -> Self;
    fn to_f(self) -> f64;
}

impl Scalar for f32 {
    #[inline]
    fn from_f(v: f64) -> Self {
        v as f32
    }
    #[inline]
    fn to_f(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    #[inline]
    fn from_f(v: f64) -> Self {
        v
    }
    #[inline]
    fn to_f(self) -> f64 {
        self
    }
}
