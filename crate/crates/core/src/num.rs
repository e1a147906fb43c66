//! Scalar bound for real-valued estimates and statistics.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Floating point type used for estimates: `f32` or `f64`.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + NumAssign + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossy conversion from a counter value.
    fn from_count(c: u64) -> Self {
        Self::from_u64(c).expect("float conversion from u64 never fails")
    }

    /// Lossy conversion from a probability or other `f64` parameter.
    fn from_param(x: f64) -> Self {
        Self::from_f64(x).expect("float conversion from f64 never fails")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Arithmetic mean; zero for an empty slice.
pub fn mean<T: Scalar>(xs: &[T]) -> T {
    if xs.is_empty() {
        return T::zero();
    }
    xs.iter().copied().sum::<T>() / T::from_count(xs.len() as u64)
}

/// Unbiased sample variance (divisor `n - 1`); zero when fewer than two samples.
pub fn sample_variance<T: Scalar>(xs: &[T]) -> T {
    if xs.len() < 2 {
        return T::zero();
    }
    let mu = mean(xs);
    let ss: T = xs.iter().map(|&x| (x - mu) * (x - mu)).sum();
    ss / T::from_count(xs.len() as u64 - 1)
}

/// Sample standard deviation.
pub fn sample_std<T: Scalar>(xs: &[T]) -> T {
    sample_variance(xs).sqrt()
}
