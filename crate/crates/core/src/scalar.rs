//! Scalar abstraction for metric values.
//!
//! Every segmentation metric here is a ratio of pixel or instance counts,
//! so any type that can be built from an exact integer ratio works: the
//! floating point types for everyday use and [`crate::Rational`] when a
//! value has to be compared exactly against a hand count.

use std::fmt::Debug;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Num, ToPrimitive};

pub trait Scalar: Num + Clone + Debug + PartialOrd + Send + Sync + 'static {
    /// `num / den`. `den` must be nonzero.
    fn from_ratio(num: u64, den: u64) -> Self;

    fn to_f64(&self) -> f64;

    fn from_count(n: u64) -> Self {
        Self::from_ratio(n, 1)
    }
}

impl Scalar for f64 {
    fn from_ratio(num: u64, den: u64) -> Self {
        debug_assert!(den != 0);
        num as f64 / den as f64
    }

    fn to_f64(&self) -> f64 {
        *self
    }
}

impl Scalar for f32 {
    fn from_ratio(num: u64, den: u64) -> Self {
        debug_assert!(den != 0);
        // round once from the f64 quotient rather than dividing two rounded f32s
        (num as f64 / den as f64) as f32
    }

    fn to_f64(&self) -> f64 {
        *self as f64
    }
}

impl Scalar for BigRational {
    fn from_ratio(num: u64, den: u64) -> Self {
        BigRational::new(BigInt::from(num), BigInt::from(den))
    }

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
}

/// Arithmetic mean of `values`; `None` when empty.
pub fn mean<T: Scalar>(values: impl IntoIterator<Item = T>) -> Option<T> {
    let mut sum = T::zero();
    let mut n = 0u64;
    for v in values {
        sum = sum + v;
        n += 1;
    }
    (n > 0).then(|| sum / T::from_count(n))
}
