//! Scalar abstraction shared by images, matching costs and energies.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Real-valued sample type used for luminance and matching costs.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Default + Debug + Display + Sum + Send + Sync + 'static
{
    /// Converts an `f64` constant, rounding to the nearest representable value.
    fn of(v: f64) -> Self;

    /// Widens to `f64` for reporting and integer conversion.
    fn as_f64(self) -> f64;
}

macro_rules! impl_scalar {
    ($t:ty) => {
        impl Scalar for $t {
            #[inline]
            fn of(v: f64) -> Self {
                v as $t
            }

            #[inline]
            fn as_f64(self) -> f64 {
                self as f64
            }
        }
    };
}

impl_scalar!(f32);
impl_scalar!(f64);

/// Rounds to the nearest integer, ties away from zero.
#[inline]
pub fn round_half_away(v: f64) -> i64 {
    v.round() as i64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ties_round_away_from_zero() {
        assert_eq!(round_half_away(2.5), 3);
        assert_eq!(round_half_away(-2.5), -3);
        assert_eq!(round_half_away(1.25), 1);
        assert_eq!(round_half_away(-0.75), -1);
    }

    #[test]
    fn constants_survive_both_widths() {
        assert_eq!(f32::of(1e9), 1e9_f32);
        assert_eq!(f64::of(0.25).as_f64(), 0.25);
    }
}
