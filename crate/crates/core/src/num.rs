//! Scalar abstraction.
//!
//! Everything in this crate is generic over [`Real`] so the same code runs in
//! `f32` (fitting, rendering) and `f64` (gradient verification). Concrete
//! aliases for the common instantiations live at the crate root.

use std::fmt::{Debug, Display};
use std::iter::Sum;

/// Floating-point scalar used throughout the crate.
///
/// Implemented for `f32` and `f64`. The supertraits cover the arithmetic the
/// volume math needs plus conversions to and from `f64`, which is the type of
/// all literals and tolerances in this crate.
pub trait Real:
    num_traits::Float
    + num_traits::FromPrimitive
    + num_traits::ToPrimitive
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` constant into `Self`, rounding as needed.
    #[inline]
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("finite f64 converts to any Real")
    }

    /// Converts a `usize` (loop counters, grid sizes) into `Self`.
    #[inline]
    fn of_usize(n: usize) -> Self {
        Self::from_usize(n).expect("usize converts to any Real")
    }

    /// Widens `self` to `f64` for reporting and tolerance checks.
    #[inline]
    fn f64(self) -> f64 {
        self.to_f64().expect("every Real widens to f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn f64_round_trip_is_exact_for_f64() {
        let x = 0.123456789012345678_f64;
        assert_eq!(f64::of(x), x);
        assert_eq!(x.f64(), x);
    }

    #[test]
    fn f32_conversion_rounds() {
        let x = f32::of(1.0 / 3.0);
        assert!((x.f64() - 1.0 / 3.0).abs() < 1e-7);
        assert_eq!(f32::of_usize(7), 7.0_f32);
    }
}
