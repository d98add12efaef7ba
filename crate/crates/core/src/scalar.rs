use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Floating-point element type of tensors, parameters and gradients.
///
/// Checkpoints always store values as IEEE-754 binary64, so every
/// implementor must convert to and from `f64` without loss.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + NumAssign + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts a literal or `f64` intermediate into `Self`.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 converts to every Scalar")
    }

    #[inline]
    fn to_f64_lossless(self) -> f64 {
        self.to_f64().expect("Scalar widens to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
