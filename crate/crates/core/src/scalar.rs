//! Scalar abstraction for scores, weights and thresholds.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating point type used for similarity scores, idf weights and
/// generalization thresholds: `f32` or `f64`.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossless-enough conversion from a count.
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable as float")
    }

    /// Conversion from an `f64` literal or configuration value.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 representable as scalar")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// A ratio that may have been computed over an empty population.
///
/// `zero_denominator` is set when the denominator was zero, in which case
/// `value` is reported as `0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ratio<T> {
    pub value: T,
    pub zero_denominator: bool,
}

impl<T: Real> Ratio<T> {
    pub fn of(numerator: usize, denominator: usize) -> Self {
        if denominator == 0 {
            Ratio {
                value: T::zero(),
                zero_denominator: true,
            }
        } else {
            Ratio {
                value: T::from_count(numerator) / T::from_count(denominator),
                zero_denominator: false,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ratio_flags_zero_denominator() {
        let r = Ratio::<f64>::of(0, 0);
        assert_eq!(r.value, 0.0);
        assert!(r.zero_denominator);
        let r = Ratio::<f32>::of(2, 3);
        assert!((r.value - 2.0 / 3.0).abs() < 1e-6);
        assert!(!r.zero_denominator);
    }
}
