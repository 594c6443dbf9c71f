//! Scalar abstraction for the real-valued kernels.
//!
//! Least-squares fitting, power-curve evaluation, and order statistics are
//! written against [`Real`] so they work for `f32` and `f64` alike. The
//! domain layer fixes the scalar to [`crate::Scalar`].

use num_traits::{Float, FromPrimitive, ToPrimitive};
use std::fmt::{Debug, Display};
use std::iter::Sum;

/// Floating-point scalar: `f32` or `f64`.
pub trait Real: Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + 'static {
    /// Lossless-enough conversion from `usize` for dimension factors.
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Arithmetic mean. Zero for an empty slice.
pub fn mean<S: Real>(xs: &[S]) -> S {
    if xs.is_empty() {
        return S::zero();
    }
    xs.iter().copied().sum::<S>() / S::from_count(xs.len())
}

/// Nearest-rank percentile: the smallest value with at least `p` of the mass
/// at or below it. `p` is in `(0, 1]`; the slice must be nonempty.
pub fn percentile_nearest_rank<S: Real>(sorted: &[S], p: f64) -> S {
    debug_assert!(!sorted.is_empty());
    debug_assert!(sorted.windows(2).all(|w| w[0] <= w[1]));
    let n = sorted.len();
    let rank = (p * n as f64).ceil() as usize;
    sorted[rank.clamp(1, n) - 1]
}
