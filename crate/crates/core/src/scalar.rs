//! Generic scalar abstraction for the numeric core.
//!
//! Everything downstream (sets, oracles, mixing, algorithm rounds, metrics)
//! is written against [`Real`] so the same code runs in `f32` or `f64`.

use std::fmt::{Debug, Display, LowerExp};

use ndarray::{LinalgScalar, ScalarOperand};
use num_traits::{Float, FromPrimitive};

/// Floating-point scalar usable throughout the crate, implemented for
/// `f32` and `f64`.
pub trait Real:
    Float
    + FromPrimitive
    + LinalgScalar
    + ScalarOperand
    + Display
    + LowerExp
    + Debug
    + Send
    + Sync
    + 'static
{
    /// Converts a literal constant. Panics on values the type cannot hold,
    /// which for f32/f64 and finite inputs never happens.
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("finite constant representable in scalar type")
    }

    /// Converts a size or round index.
    fn of_usize(v: usize) -> Self {
        Self::from_usize(v).expect("size representable in scalar type")
    }
}

impl<S> Real for S where
    S: Float
        + FromPrimitive
        + LinalgScalar
        + ScalarOperand
        + Display
        + LowerExp
        + Debug
        + Send
        + Sync
        + 'static
{
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conversions_round_trip() {
        assert_eq!(<f64 as Real>::of(0.25), 0.25);
        assert_eq!(<f32 as Real>::of(0.25), 0.25f32);
        assert_eq!(<f64 as Real>::of_usize(16), 16.0);
    }
}
