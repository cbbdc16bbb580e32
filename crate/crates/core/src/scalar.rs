//! Floating-point scalar abstraction.
//!
//! Everything numeric in this crate is generic over [`Scalar`] so the same
//! pipeline runs in `f32` or `f64`; the exact-rational oracle lives apart in
//! [`crate::lattice::hnf`]. Concrete aliases for the common instantiations
//! are exported at the crate root.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign};

/// Floating-point scalar the lattice and codec machinery operates on.
pub trait Scalar:
    Float + FromPrimitive + NumAssign + Sum<Self> + Debug + Display + Send + Sync + 'static
{
    /// Nearest integer with ties rounded to the even neighbour.
    fn round_half_even(self) -> Self {
        let half = Self::from_f64(0.5).unwrap();
        let floor = self.floor();
        let frac = self - floor;
        if frac == half {
            // tie: pick the even one of floor / floor + 1
            if (floor * half).fract() == Self::zero() {
                floor
            } else {
                floor + Self::one()
            }
        } else {
            self.round()
        }
    }

    /// Threshold for ‖TᵀT − I‖_max when validating a realized transform
    /// matrix. About 1e-12 for f64, scaled by machine epsilon for other
    /// widths.
    fn orthonormality_tol() -> Self {
        Self::epsilon() * Self::from_f64(4.5e3).unwrap()
    }
}

impl<T> Scalar for T where
    T: Float + FromPrimitive + NumAssign + Sum<T> + Debug + Display + Send + Sync + 'static
{
}

/// Shorthand for converting an `f64` constant into the working scalar type.
pub(crate) fn cast<T: Scalar>(x: f64) -> T {
    T::from_f64(x).expect("constant not representable in scalar type")
}
