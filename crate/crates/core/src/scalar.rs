//! Scalar abstraction for the linear-algebra layer.
//!
//! The lattice assembly and the eigensolvers are written once over [`Real`]
//! and instantiated for `f32` and `f64`. Statistics downstream of the
//! eigensolver work in `f64`.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Floating point scalar usable by the eigensolvers: `f32` or `f64`.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + NumAssign + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossy conversion from `f64` (constants, sampled disorder).
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 is representable")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite scalar")
    }
}

impl Real for f32 {}
impl Real for f64 {}

#[cfg(test)]
mod tests {
    use super::*;

    fn half<T: Real>() -> T {
        T::of(0.5)
    }

    #[test]
    fn round_trip_through_f64() {
        assert_eq!(half::<f32>().as_f64(), 0.5);
        assert_eq!(half::<f64>().as_f64(), 0.5);
    }
}
