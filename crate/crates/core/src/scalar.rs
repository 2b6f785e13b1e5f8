//! Floating-point scalar abstraction shared by every numeric routine.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, NumCast};

/// Real scalar the analysis runs over: `f32` or `f64`.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + NumCast
    + NumAssign
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from a literal. Never fails for `f32`/`f64`.
    #[inline]
    fn lit(x: f64) -> Self {
        <Self as NumCast>::from(x).expect("f64 literal representable")
    }

    #[inline]
    fn from_usize_lossy(x: usize) -> Self {
        <Self as NumCast>::from(x).expect("usize representable")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// `base`, widened to a few ulps of this type so `f32` runs are not held
    /// to `f64` tolerances.
    #[inline]
    fn tolerance(base: f64) -> f64 {
        base.max(64.0 * Self::epsilon().to_f64_lossy())
    }

    /// `x ln x`, continuously extended with `0 ln 0 = 0`.
    #[inline]
    fn xlogx(self) -> Self {
        if self <= Self::zero() {
            Self::zero()
        } else {
            self * self.ln()
        }
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Sum with Neumaier compensation; order is the iteration order, so results are reproducible.
pub fn compensated_sum<S: Scalar, I: IntoIterator<Item = S>>(items: I) -> S {
    let mut sum = S::zero();
    let mut comp = S::zero();
    for x in items {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn xlogx_extends_continuously() {
        assert_eq!(0.0f64.xlogx(), 0.0);
        assert!((2.0f64.xlogx() - 2.0 * 2.0f64.ln()).abs() < 1e-15);
        assert_eq!(0.0f32.xlogx(), 0.0);
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let xs = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(compensated_sum::<f64, _>(xs), 2.0);
    }
}
