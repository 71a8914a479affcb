// SPDX-License-Identifier: MIT OR Apache-2.0

//! Numeric traits the crate is generic over.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive, Num, ToPrimitive};

/// Anything that can hold a probability: floats and exact rationals.
///
/// The enumeration oracles only need ring arithmetic, so they accept this
/// bound and can be checked with `num_rational::Ratio`.
pub trait Prob: Num + Copy + PartialOrd + FromPrimitive + Debug {}

impl<T> Prob for T where T: Num + Copy + PartialOrd + FromPrimitive + Debug {}

/// Floating point scalar used by losses, the network and the detectors.
pub trait Scalar:
    Prob
    + Float
    + ToPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    fn from_f64_lossy(v: f64) -> Self {
        <Self as FromPrimitive>::from_f64(v).expect("finite f64 converts to every Scalar")
    }

    fn from_usize_lossy(v: usize) -> Self {
        <Self as FromPrimitive>::from_usize(v).expect("usize converts to every Scalar")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Converts an index into any [`Prob`] scalar.
pub(crate) fn index<T: Prob>(i: usize) -> T {
    T::from_usize(i).expect("index representable in scalar type")
}
