//! Element-type abstraction for the tensor engine.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, NumAssignOps};

/// Floating-point element type usable by [`crate::tensor::Graph`].
///
/// The bound collects what the kernels actually need: IEEE float arithmetic,
/// compound assignment, summation, and printable debug output. The conversion
/// helpers are explicit (rather than `NumCast` calls at every use site) so
/// kernel code reads as arithmetic.
pub trait Scalar:
    Float + NumAssignOps + Sum + Debug + Display + Send + Sync + 'static
{
    fn from_f64(v: f64) -> Self;
    fn from_usize(n: usize) -> Self;
    fn as_f64(self) -> f64;
}

impl Scalar for f32 {
    #[inline]
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    #[inline]
    fn from_usize(n: usize) -> Self {
        n as f32
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    #[inline]
    fn from_f64(v: f64) -> Self {
        v
    }
    #[inline]
    fn from_usize(n: usize) -> Self {
        n as f64
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self
    }
}
