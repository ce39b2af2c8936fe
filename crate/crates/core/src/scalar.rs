//! Scalar abstractions.
//!
//! Group arithmetic only needs a commutative ring, so it runs exactly on
//! rationals. Everything that takes roots, exponentials or sums over a grid
//! needs [`Real`].

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::Neg;

use num_traits::{Float, FloatConst, FromPrimitive, Num, NumAssign, ToPrimitive};

/// Ring scalar for the exact group law (integers, rationals, floats).
pub trait GroupScalar: Clone + Debug + Num + Neg<Output = Self> {}

impl<T> GroupScalar for T where T: Clone + Debug + Num + Neg<Output = T> {}

/// Floating point scalar used by the grid, the functionals and the solvers.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar convertible to f64")
    }

    #[inline]
    fn from_usize_lossy(v: usize) -> Self {
        Self::from_usize(v).expect("index representable in scalar type")
    }
}

impl Real for f32 {}
impl Real for f64 {}
