use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Floating-point scalar the numeric core is generic over.
///
/// Implemented by `f64` and `f32` through the blanket impl; the crate-root
/// aliases fix `f64`, which is what the CLI and the simulation lab use.
pub trait Scalar:
    Float + NumAssign + FromPrimitive + ToPrimitive + Sum<Self> + Send + Sync + Debug + Display + 'static
{
    /// Converts an `f64` constant (tolerances, literals) into `Self`.
    fn from_real(v: f64) -> Self {
        Self::from_f64(v).expect("finite f64 constant converts to any Scalar")
    }

    /// Converts a count into `Self` for averaging.
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("sample sizes fit in any Scalar")
    }
}

impl<T> Scalar for T where
    T: Float
        + NumAssign
        + FromPrimitive
        + ToPrimitive
        + Sum<T>
        + Send
        + Sync
        + Debug
        + Display
        + 'static
{
}
