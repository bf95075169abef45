//! Floating-point scalar abstraction.
//!
//! Every statistic in the crate is generic over [`Real`], so the same code runs
//! in `f32` for quick sweeps and `f64` for the published tolerances.

use std::fmt::{Debug, Display};

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// Floating point: `f32` or `f64`.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from `f64`.
    #[inline]
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 is representable in every Real")
    }

    /// Lossy conversion from a count.
    #[inline]
    fn of_u64(x: u64) -> Self {
        Self::from_u64(x).expect("u64 is representable in every Real")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// `e(x) = exp(2πix)`.
#[inline]
pub fn e<T: Real>(x: T) -> Complex<T> {
    let theta = T::TAU() * x;
    Complex::new(theta.cos(), theta.sin())
}

/// The `L` values `e(k/L)`, `k = 0..L`, built so that entry `L-k` is the exact
/// complex conjugate of entry `k`, and entries `0` and `L/2` are exactly `±1`.
pub fn roots_of_unity<T: Real>(order: u32) -> Vec<Complex<T>> {
    let l = order.max(1) as usize;
    let mut out = vec![Complex::new(T::one(), T::zero()); l];
    for k in 1..l {
        if 2 * k < l {
            out[k] = e(T::of(k as f64 / l as f64));
        } else if 2 * k == l {
            out[k] = Complex::new(-T::one(), T::zero());
        } else {
            out[k] = out[l - k].conj();
        }
    }
    // Quarter turns are exact too.
    if l.is_multiple_of(4) {
        out[l / 4] = Complex::new(T::zero(), T::one());
        out[3 * l / 4] = Complex::new(T::zero(), -T::one());
    }
    out
}
