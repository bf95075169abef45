//! Deterministic compensated summation.
//!
//! Long sums are cut into fixed blocks of [`BLOCK`] terms. Each block is summed
//! with Neumaier compensation, and the block partials are combined by a pairwise
//! tree whose shape depends only on the number of blocks. The result is therefore
//! bit-identical whatever the number of worker threads.

use std::ops::Range;

use num_complex::Complex;
use rayon::prelude::*;

use crate::scalar::Real;

/// Number of terms per compensated block.
pub const BLOCK: usize = 4096;

/// Neumaier (improved Kahan) accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct Compensated<T> {
    sum: T,
    comp: T,
}

impl<T: Real> Compensated<T> {
    pub fn new() -> Self {
        Self {
            sum: T::zero(),
            comp: T::zero(),
        }
    }

    #[inline]
    pub fn add(&mut self, x: T) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> T {
        self.sum + self.comp
    }
}

/// Compensated accumulator for complex terms.
#[derive(Debug, Clone, Copy, Default)]
pub struct ComplexCompensated<T> {
    re: Compensated<T>,
    im: Compensated<T>,
}

impl<T: Real> ComplexCompensated<T> {
    pub fn new() -> Self {
        Self {
            re: Compensated::new(),
            im: Compensated::new(),
        }
    }

    #[inline]
    pub fn add(&mut self, z: Complex<T>) {
        self.re.add(z.re);
        self.im.add(z.im);
    }

    #[inline]
    pub fn value(&self) -> Complex<T> {
        Complex::new(self.re.value(), self.im.value())
    }
}

/// Pairwise reduction with a fixed tree shape.
pub fn pairwise<T, F>(items: &[T], zero: T, add: &F) -> T
where
    T: Copy,
    F: Fn(T, T) -> T,
{
    match items.len() {
        0 => zero,
        1 => items[0],
        n => {
            let mid = n / 2;
            add(pairwise(&items[..mid], zero, add), pairwise(&items[mid..], zero, add))
        }
    }
}

/// Sum of `term(i)` for `i` in `range`, blocked and compensated.
pub fn sum_real<T, F>(range: Range<u64>, term: F) -> T
where
    T: Real,
    F: Fn(u64) -> T + Sync,
{
    let partials: Vec<T> = block_starts(&range)
        .into_par_iter()
        .map(|lo| {
            let hi = (lo + BLOCK as u64).min(range.end);
            let mut acc = Compensated::new();
            for i in lo..hi {
                acc.add(term(i));
            }
            acc.value()
        })
        .collect();
    pairwise(&partials, T::zero(), &|a, b| a + b)
}

/// Complex analogue of [`sum_real`].
pub fn sum_complex<T, F>(range: Range<u64>, term: F) -> Complex<T>
where
    T: Real,
    F: Fn(u64) -> Complex<T> + Sync,
{
    let partials: Vec<Complex<T>> = block_starts(&range)
        .into_par_iter()
        .map(|lo| {
            let hi = (lo + BLOCK as u64).min(range.end);
            let mut acc = ComplexCompensated::new();
            for i in lo..hi {
                acc.add(term(i));
            }
            acc.value()
        })
        .collect();
    pairwise(&partials, Complex::new(T::zero(), T::zero()), &|a, b| a + b)
}

/// Compensated sum of a slice of reals (sequential, fixed order).
pub fn sum_slice<T: Real>(xs: &[T]) -> T {
    let partials: Vec<T> = xs
        .chunks(BLOCK)
        .map(|c| {
            let mut acc = Compensated::new();
            c.iter().for_each(|&x| acc.add(x));
            acc.value()
        })
        .collect();
    pairwise(&partials, T::zero(), &|a, b| a + b)
}

/// Exact fixed-point accumulator for terms of modest size.
///
/// Each term is rounded once to a multiple of 2^-100 and added in `i128`, so the
/// total is independent of summation order and grows monotonically under
/// non-negative terms. Valid while `|Σ| < 2^27` and every `|term| < 2^27`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FixedSum(i128);

impl FixedSum {
    const SCALE: f64 = 1_267_650_600_228_229_401_496_703_205_376.0; // 2^100

    #[inline]
    pub fn add(&mut self, x: f64) {
        self.0 += (x * Self::SCALE) as i128;
    }

    #[inline]
    pub fn merge(self, other: FixedSum) -> FixedSum {
        FixedSum(self.0 + other.0)
    }

    pub fn value(&self) -> f64 {
        self.0 as f64 / Self::SCALE
    }
}

/// Fixed-point sum of `term(i)` over `range`; bitwise reproducible.
pub fn sum_fixed<F>(range: Range<u64>, term: F) -> f64
where
    F: Fn(u64) -> f64 + Sync,
{
    block_starts(&range)
        .into_par_iter()
        .map(|lo| {
            let hi = (lo + BLOCK as u64).min(range.end);
            let mut acc = FixedSum::default();
            for i in lo..hi {
                acc.add(term(i));
            }
            acc
        })
        .reduce(FixedSum::default, FixedSum::merge)
        .value()
}

fn block_starts(range: &Range<u64>) -> Vec<u64> {
    if range.end <= range.start {
        return Vec::new();
    }
    (range.start..range.end).step_by(BLOCK).collect()
}
