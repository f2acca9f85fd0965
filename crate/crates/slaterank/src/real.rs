//! Floating-point abstraction used throughout the crate.
//!
//! Everything numeric is generic over [`Real`] so the same code can run in
//! `f32` (fast training) and `f64` (gradient checking, determinism tests).

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Scalar type the tensors and the tape are generic over.
///
/// Implemented for `f32` and `f64`. The supertraits cover what the math in
/// this crate needs: IEEE semantics via [`Float`], conversions from literal
/// `f64` constants, and the usual assign operators.
pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Precision name as it appears on the CLI (`--precision`).
    const NAME: &'static str;
}

impl Real for f32 {
    const NAME: &'static str = "f32";
}

impl Real for f64 {
    const NAME: &'static str = "f64";
}

/// Shorthand for converting an `f64` constant into the working precision.
///
/// ```
/// let x: f32 = slaterank::cast(0.5);
/// assert_eq!(x, 0.5f32);
/// ```
#[inline]
pub fn cast<F: Real>(x: f64) -> F {
    F::from_f64(x).expect("f64 constant must convert into the working precision")
}
