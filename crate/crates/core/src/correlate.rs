//! Correlation averages and the statistics built from them.
//!
//! For tables in exact root-of-unity form, `Σ_m ∏_j f_j(m+s_j)^{r_j}` is obtained
//! from the joint histogram of the exponent classes `(e_0, …, e_ℓ)`, counted in
//! integers. When every table has only a few classes the histogram is built by
//! popcounts over bit planes, 64 values of `m` at a time; otherwise by a direct
//! loop. Other tables use blocked compensated complex summation.

use std::sync::Arc;

use num_complex::Complex;
use num_integer::Integer;
use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::func::{EvaluatedTable, ZERO};
use crate::scalar::{e, roots_of_unity, Real};
use crate::shift::{LatticeBox, ShiftFamily};
use crate::sieve::factor;
use crate::sum::{pairwise, sum_complex, sum_slice, Compensated, ComplexCompensated, BLOCK};

/// Bit planes are used when every table has at most this many classes.
const PLANE_MAX_CLASSES: u32 = 16;
/// ... and the joint histogram has at most this many bins.
const PLANE_MAX_BINS: usize = 4096;
/// Largest joint histogram built by the direct loop.
const HIST_MAX_BINS: usize = 1 << 16;
/// Values of `m` per parallel work item in the plane path.
const PLANE_CHUNK: u64 = 1 << 16;
/// Values of `m` per parallel work item in the direct histogram path.
const HIST_CHUNK: u64 = 1 << 18;

/// Strictly increasing averaging lengths `M_1 < M_2 < …`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvaluationWindow {
    m_grid: Vec<u64>,
}

impl EvaluationWindow {
    pub fn new(m_grid: Vec<u64>) -> Result<Self> {
        if m_grid.is_empty() || m_grid[0] == 0 || m_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Validation(format!(
                "M grid {m_grid:?} must be non-empty, positive and strictly increasing"
            )));
        }
        Ok(Self { m_grid })
    }

    /// Parse `"1e5,1e6,1e7"` or `"1000,20000"`.
    pub fn parse(s: &str) -> Result<Self> {
        let grid = s.split(',').map(parse_count).collect::<Result<Vec<_>>>()?;
        Self::new(grid)
    }

    pub fn m_grid(&self) -> &[u64] {
        &self.m_grid
    }

    pub fn max(&self) -> u64 {
        *self.m_grid.last().expect("non-empty")
    }
}

/// A positive integer written plainly or as `<mantissa>e<exp>`.
pub fn parse_count(s: &str) -> Result<u64> {
    let t = s.trim();
    if let Ok(v) = t.parse::<u64>() {
        return Ok(v);
    }
    let bad = || Error::Parse(format!("{t:?} is not a non-negative integer"));
    let (mantissa, exp) = t.split_once(['e', 'E']).ok_or_else(bad)?;
    let mantissa: u64 = mantissa.parse().map_err(|_| bad())?;
    let exp: u32 = exp.parse().map_err(|_| bad())?;
    10u64.checked_pow(exp).and_then(|p| p.checked_mul(mantissa)).ok_or_else(bad)
}

/// Joint distribution of exponent classes over a range of `m`.
///
/// Slot `j` has digits `0..L_j` for `e(k/L_j)` and digit `L_j` for zero; bins
/// are indexed in mixed radix with the last slot varying fastest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JointHistogram {
    orders: Vec<u32>,
    counts: Vec<u64>,
}

impl JointHistogram {
    fn empty(orders: Vec<u32>) -> Self {
        let bins = bin_count(&orders);
        Self {
            orders,
            counts: vec![0; bins],
        }
    }

    pub fn orders(&self) -> &[u32] {
        &self.orders
    }

    /// Counts per bin.
    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Number of `m` whose classes are `digits` (`None` for a zero value).
    pub fn count(&self, digits: &[Option<u32>]) -> u64 {
        let mut idx = 0usize;
        for (d, &l) in digits.iter().zip(&self.orders) {
            idx = idx * (l as usize + 1) + d.unwrap_or(l) as usize;
        }
        self.counts[idx]
    }

    pub fn merge(&mut self, other: &JointHistogram) {
        debug_assert_eq!(self.orders, other.orders);
        self.counts.iter_mut().zip(&other.counts).for_each(|(a, b)| *a += b);
    }

    /// `Σ_m ∏_j f_j(m+s_j)^{r_j}`, with `f^0 ≡ 1`.
    pub fn power_sum<T: Real>(&self, powers: &[u32]) -> Complex<T> {
        let l = self
            .orders
            .iter()
            .zip(powers)
            .filter(|(_, &r)| r > 0)
            .fold(1u64, |acc, (&o, _)| acc.lcm(&(o as u64)));
        let mut classes = vec![0u64; l as usize];
        let radices: Vec<usize> = self.orders.iter().map(|&o| o as usize + 1).collect();
        'bins: for (idx, &c) in self.counts.iter().enumerate() {
            if c == 0 {
                continue;
            }
            let mut rest = idx;
            let mut k = 0u64;
            for j in (0..radices.len()).rev() {
                let d = (rest % radices[j]) as u64;
                rest /= radices[j];
                if powers[j] == 0 {
                    continue;
                }
                let o = self.orders[j] as u64;
                if d == o {
                    continue 'bins;
                }
                k = (k + d * powers[j] as u64 % o * (l / o)) % l;
            }
            classes[k as usize] += c;
        }
        class_sum(&classes)
    }
}

/// `Σ_k c_k e(k/L)` with `L = classes.len()`.
fn class_sum<T: Real>(classes: &[u64]) -> Complex<T> {
    match classes.len() {
        1 => Complex::new(T::of_u64(classes[0]), T::zero()),
        2 => Complex::new(signed_diff::<T>(classes[0], classes[1]), T::zero()),
        4 => Complex::new(
            signed_diff::<T>(classes[0], classes[2]),
            signed_diff::<T>(classes[1], classes[3]),
        ),
        l => {
            let roots = roots_of_unity::<T>(l as u32);
            let mut acc = ComplexCompensated::new();
            for (c, z) in classes.iter().zip(&roots) {
                if *c > 0 {
                    acc.add(*z * T::of_u64(*c));
                }
            }
            acc.value()
        }
    }
}

fn signed_diff<T: Real>(a: u64, b: u64) -> T {
    if a >= b {
        T::of_u64(a - b)
    } else {
        -T::of_u64(b - a)
    }
}

fn bin_count(orders: &[u32]) -> usize {
    orders
        .iter()
        .try_fold(1usize, |acc, &o| acc.checked_mul(o as usize + 1))
        .unwrap_or(usize::MAX)
}

/// How a sum is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Path {
    /// Joint histogram by popcounts over bit planes.
    Planes,
    /// Joint histogram by a direct loop over `m`.
    Histogram,
    /// Compensated complex summation.
    Complex,
}

struct Slot<'a, T> {
    table: &'a EvaluatedTable<T>,
    order: Option<u32>,
    /// `planes[k]`, bit `i`: the value at `lo + i` has class `k`.
    planes: Option<Arc<Vec<Vec<u64>>>>,
}

impl<'a, T: Real> Slot<'a, T> {
    fn new(table: &'a EvaluatedTable<T>) -> Self {
        let order = table.exact().map(|x| x.order());
        let planes = table.exact().and_then(|x| {
            let classes = x.order() + u32::from(x.has_zeros());
            (classes <= PLANE_MAX_CLASSES).then(|| Arc::new(build_planes(x.exponents(), x.order(), classes)))
        });
        Self { table, order, planes }
    }
}

fn build_planes(exps: &[u16], order: u32, classes: u32) -> Vec<Vec<u64>> {
    let words = exps.len().div_ceil(64) + 1;
    let mut planes = vec![vec![0u64; words]; classes as usize];
    for (i, &e) in exps.iter().enumerate() {
        let k = if e == ZERO { order } else { e as u32 };
        planes[k as usize][i / 64] |= 1 << (i % 64);
    }
    planes
}

/// The 64 bits of `plane` starting at bit `bit`.
#[inline]
fn word_at(plane: &[u64], bit: usize) -> u64 {
    let (q, r) = (bit / 64, bit % 64);
    if r == 0 {
        plane[q]
    } else {
        (plane[q] >> r) | (plane[q + 1] << (64 - r))
    }
}

/// Sums of products `f_0(m) ∏_j f_j(m + s_j)` over ranges of `m`.
pub struct Correlator<'a, T> {
    slots: Vec<Slot<'a, T>>,
    forced: Option<Path>,
}

impl<'a, T: Real> Correlator<'a, T> {
    /// `tables[0]` is `f_0`; `tables[j]` is shifted by `s_j`.
    pub fn new(tables: &[&'a EvaluatedTable<T>]) -> Self {
        Self {
            slots: tables.iter().map(|t| Slot::new(t)).collect(),
            forced: None,
        }
    }

    /// Use `path` whenever it applies (for cross-checking the paths).
    pub fn with_path(mut self, path: Path) -> Self {
        self.forced = Some(path);
        self
    }

    /// Number of functions `ℓ + 1`.
    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    fn offsets(&self, shifts: &[i64]) -> Result<Vec<i64>> {
        if shifts.len() + 1 != self.slots.len() {
            return Err(Error::Validation(format!(
                "{} functions need {} shifts, got {}",
                self.slots.len(),
                self.slots.len().saturating_sub(1),
                shifts.len()
            )));
        }
        Ok(std::iter::once(0).chain(shifts.iter().copied()).collect())
    }

    /// Check every table covers its arguments for `m ∈ [m_lo, m_hi]`.
    pub fn check_coverage(&self, shifts: &[i64], m_lo: u64, m_hi: u64) -> Result<()> {
        let offsets = self.offsets(shifts)?;
        if m_hi < m_lo {
            return Ok(());
        }
        for (slot, &s) in self.slots.iter().zip(&offsets) {
            let a = (m_lo as i64).checked_add(s);
            let b = (m_hi as i64).checked_add(s);
            match (a, b) {
                (Some(a), Some(b)) => slot.table.require(a, b)?,
                _ => {
                    return Err(Error::Overflow {
                        term: format!("m + {s}"),
                    })
                }
            }
        }
        Ok(())
    }

    /// The path a sum with these shifts would take.
    pub fn path(&self, shifts: &[i64], m_lo: u64) -> Path {
        let orders: Option<Vec<u32>> = self.slots.iter().map(|s| s.order).collect();
        let Some(orders) = orders else {
            return Path::Complex;
        };
        let bins = bin_count(&orders);
        let positive = self
            .slots
            .iter()
            .zip(std::iter::once(&0).chain(shifts))
            .all(|(slot, &s)| m_lo as i64 + s >= slot.table.lo() as i64);
        let planes_ok = positive && bins <= PLANE_MAX_BINS && self.slots.iter().all(|s| s.planes.is_some());
        let hist_ok = bins <= HIST_MAX_BINS;
        match self.forced {
            Some(Path::Complex) => Path::Complex,
            Some(Path::Histogram) if hist_ok => Path::Histogram,
            _ if planes_ok => Path::Planes,
            _ if hist_ok => Path::Histogram,
            _ => Path::Complex,
        }
    }

    /// Joint histogram over `m ∈ [m_lo, m_hi]`, or `None` if some table is not
    /// exact or the histogram would be too large.
    pub fn histogram(&self, shifts: &[i64], m_lo: u64, m_hi: u64) -> Result<Option<JointHistogram>> {
        self.check_coverage(shifts, m_lo, m_hi)?;
        let offsets = self.offsets(shifts)?;
        let orders = || self.slots.iter().map(|s| s.order.expect("exact")).collect::<Vec<_>>();
        Ok(match self.path(shifts, m_lo) {
            Path::Complex => None,
            _ if m_hi < m_lo => Some(JointHistogram::empty(orders())),
            Path::Planes => Some(self.planes_histogram(&offsets, m_lo, m_hi, orders())),
            Path::Histogram => Some(self.loop_histogram(&offsets, m_lo, m_hi, orders())),
        })
    }

    fn planes_histogram(&self, offsets: &[i64], m_lo: u64, m_hi: u64, orders: Vec<u32>) -> JointHistogram {
        let starts: Vec<u64> = (m_lo..=m_hi).step_by(PLANE_CHUNK as usize).collect();
        let planes: Vec<&Vec<Vec<u64>>> = self.slots.iter().map(|s| &**s.planes.as_ref().expect("planes")).collect();
        let strides = strides(&orders);
        let los: Vec<i64> = self.slots.iter().map(|s| s.table.lo() as i64).collect();
        let parts: Vec<Vec<u64>> = starts
            .into_par_iter()
            .map(|a| {
                let len = (m_hi - a + 1).min(PLANE_CHUNK) as usize;
                let words = len.div_ceil(64);
                let mut acc = vec![u64::MAX; words];
                if !len.is_multiple_of(64) {
                    acc[words - 1] = (1u64 << (len % 64)) - 1;
                }
                let bases: Vec<usize> = offsets
                    .iter()
                    .zip(&los)
                    .map(|(&s, &lo)| (a as i64 + s - lo) as usize)
                    .collect();
                let mut counts = vec![0u64; bin_count(&orders)];
                let mut scratch: Vec<Vec<u64>> = vec![vec![0; words]; planes.len() - 1];
                descend(&planes, &bases, &strides, 0, 0, &acc, &mut scratch, &mut counts);
                counts
            })
            .collect();
        let mut h = JointHistogram::empty(orders);
        for p in &parts {
            h.counts.iter_mut().zip(p).for_each(|(a, b)| *a += b);
        }
        h
    }

    fn loop_histogram(&self, offsets: &[i64], m_lo: u64, m_hi: u64, orders: Vec<u32>) -> JointHistogram {
        let strides = strides(&orders);
        let starts: Vec<u64> = (m_lo..=m_hi).step_by(HIST_CHUNK as usize).collect();
        let parts: Vec<Vec<u64>> = starts
            .into_par_iter()
            .map(|a| {
                let b = (a + HIST_CHUNK - 1).min(m_hi);
                let mut counts = vec![0u64; bin_count(&orders)];
                for m in a..=b {
                    let mut idx = 0usize;
                    for ((slot, &s), (&o, &st)) in self.slots.iter().zip(offsets).zip(orders.iter().zip(&strides)) {
                        let e = slot.table.exponent_at(m as i64 + s);
                        let d = if e == ZERO { o } else { e as u32 };
                        idx += d as usize * st;
                    }
                    counts[idx] += 1;
                }
                counts
            })
            .collect();
        let mut h = JointHistogram::empty(orders);
        for p in &parts {
            h.counts.iter_mut().zip(p).for_each(|(a, b)| *a += b);
        }
        h
    }

    /// `Σ_{m=m_lo}^{m_hi} ∏_j f_j(m+s_j)^{r_j}` (with `s_0 = 0`).
    pub fn power_sum(&self, shifts: &[i64], m_lo: u64, m_hi: u64, powers: &[u32]) -> Result<Complex<T>> {
        Ok(self.power_sums(shifts, m_lo, m_hi, std::slice::from_ref(&powers.to_vec()))?[0])
    }

    /// [`power_sum`](Self::power_sum) for several power vectors in one pass.
    pub fn power_sums(&self, shifts: &[i64], m_lo: u64, m_hi: u64, powers: &[Vec<u32>]) -> Result<Vec<Complex<T>>> {
        if let Some(bad) = powers.iter().find(|r| r.len() != self.slots.len()) {
            return Err(Error::Validation(format!(
                "power vector {bad:?} must have {} entries",
                self.slots.len()
            )));
        }
        if let Some(h) = self.histogram(shifts, m_lo, m_hi)? {
            return Ok(powers.iter().map(|r| h.power_sum(r)).collect());
        }
        let offsets = self.offsets(shifts)?;
        Ok(powers
            .iter()
            .map(|r| {
                sum_complex(m_lo..m_hi.saturating_add(1), |m| {
                    let mut z = Complex::new(T::one(), T::zero());
                    for ((slot, &s), &k) in self.slots.iter().zip(&offsets).zip(r) {
                        if k > 0 {
                            z *= slot.table.at(m as i64 + s).powu(k);
                        }
                    }
                    z
                })
            })
            .collect())
    }

    /// `(1/M) Σ_{m≤M} f_0(m) ∏_j f_j(m + s_j)`.
    pub fn correlation(&self, shifts: &[i64], m: u64) -> Result<Complex<T>> {
        if m == 0 {
            return Err(Error::Validation("averages need M >= 1".into()));
        }
        let ones = vec![1u32; self.slots.len()];
        Ok(self.power_sum(shifts, 1, m, &ones)? / T::of_u64(m))
    }

    /// `(1/M) Σ_{m≤M} ∏_j f_j(m+s_j)^{r_j}` for each power vector.
    pub fn power_correlations(&self, shifts: &[i64], m: u64, powers: &[Vec<u32>]) -> Result<Vec<Complex<T>>> {
        if m == 0 {
            return Err(Error::Validation("averages need M >= 1".into()));
        }
        let scale = T::of_u64(m);
        Ok(self.power_sums(shifts, 1, m, powers)?.into_iter().map(|z| z / scale).collect())
    }

    /// Averages for every `M` of a nested grid; each increment is summed once.
    pub fn nested(&self, shifts: &[i64], m_grid: &[u64]) -> Result<Vec<Complex<T>>> {
        let ones = vec![1u32; self.slots.len()];
        Ok(self
            .nested_power_correlations(shifts, m_grid, &[ones])?
            .into_iter()
            .map(|v| v[0])
            .collect())
    }

    /// `out[k][i]`: the average of power vector `powers[i]` at `M = m_grid[k]`.
    pub fn nested_power_correlations(
        &self,
        shifts: &[i64],
        m_grid: &[u64],
        powers: &[Vec<u32>],
    ) -> Result<Vec<Vec<Complex<T>>>> {
        if m_grid.first() == Some(&0) || m_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Validation(format!("M grid {m_grid:?} must be positive and increasing")));
        }
        let top = m_grid.last().copied().unwrap_or(0);
        self.check_coverage(shifts, 1, top)?;
        let mut out = Vec::with_capacity(m_grid.len());
        let mut prev = 0u64;
        match self.histogram(shifts, 1, 0)? {
            Some(mut h) => {
                for &m in m_grid {
                    h.merge(&self.histogram(shifts, prev + 1, m)?.expect("exact path"));
                    let scale = T::of_u64(m);
                    out.push(powers.iter().map(|r| h.power_sum::<T>(r) / scale).collect());
                    prev = m;
                }
            }
            None => {
                let mut totals = vec![ComplexCompensated::new(); powers.len()];
                for &m in m_grid {
                    let inc = self.power_sums(shifts, prev + 1, m, powers)?;
                    totals.iter_mut().zip(inc).for_each(|(t, z)| t.add(z));
                    let scale = T::of_u64(m);
                    out.push(totals.iter().map(|t| t.value() / scale).collect());
                    prev = m;
                }
            }
        }
        Ok(out)
    }
}

fn strides(orders: &[u32]) -> Vec<usize> {
    let mut st = vec![1usize; orders.len()];
    for j in (0..orders.len().saturating_sub(1)).rev() {
        st[j] = st[j + 1] * (orders[j + 1] as usize + 1);
    }
    st
}

/// Depth-first over the classes of each slot, AND-ing bit planes; the last
/// slot only counts.
#[allow(clippy::too_many_arguments)]
fn descend(
    planes: &[&Vec<Vec<u64>>],
    bases: &[usize],
    strides: &[usize],
    depth: usize,
    idx: usize,
    acc: &[u64],
    scratch: &mut [Vec<u64>],
    counts: &mut [u64],
) {
    let base = bases[depth];
    for (k, plane) in planes[depth].iter().enumerate() {
        let bin = idx + k * strides[depth];
        if depth + 1 == planes.len() {
            let mut c = 0u64;
            for (w, &a) in acc.iter().enumerate() {
                c += (a & word_at(plane, base + 64 * w)).count_ones() as u64;
            }
            counts[bin] += c;
            continue;
        }
        let (next, rest) = scratch.split_first_mut().expect("one buffer per level");
        let mut any = 0u64;
        for (w, &a) in acc.iter().enumerate() {
            let x = a & word_at(plane, base + 64 * w);
            next[w] = x;
            any |= x;
        }
        if any != 0 {
            descend(planes, bases, strides, depth + 1, bin, next, rest, counts);
        }
    }
}

/// `(1/M) Σ_{m≤M} f_0(m) ∏_j f_j(m + s_j)`.
pub fn correlation<T: Real>(tables: &[&EvaluatedTable<T>], shifts: &[i64], m: u64) -> Result<Complex<T>> {
    Correlator::new(tables).correlation(shifts, m)
}

/// Smallest and largest argument touched by `m ∈ [1, M]` and the given shifts.
pub fn required_range(shift_vectors: &[Vec<i64>], m: u64) -> (i64, i64) {
    let mut lo = 1i64;
    let mut hi = m as i64;
    for s in shift_vectors.iter().flatten() {
        lo = lo.min(1 + s);
        hi = hi.max(m as i64 + s);
    }
    (lo, hi)
}

/// `E_{n ∈ box} |a(n) - c|`.
pub fn ud_statistic<T: Real>(values: &[Complex<T>], c: Complex<T>) -> Result<T> {
    if values.is_empty() {
        return Err(Error::Validation("uniform-density statistic over an empty box".into()));
    }
    let dev: Vec<T> = values.iter().map(|a| (*a - c).norm()).collect();
    Ok(sum_slice(&dev) / T::of_u64(values.len() as u64))
}

/// Averages over a box of shifts and a nested grid of `M`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationSeries<T> {
    pub functions: Vec<String>,
    pub family: String,
    pub lattice: LatticeBox,
    pub m_grid: Vec<u64>,
    pub points: Vec<Vec<i64>>,
    pub shifts: Vec<Vec<i64>>,
    /// `values[k][i]`: the average at `M = m_grid[k]` for `points[i]`.
    pub values: Vec<Vec<Complex<T>>>,
    /// `E_n |c(M; n)|` per `M`.
    pub summary: Vec<T>,
    /// `summary[k+1] - summary[k]`.
    pub differences: Vec<T>,
}

/// Correlations for every lattice point of `lattice` and every `M` in `window`.
///
/// Families that need an override (dependent polynomials, integer exponents)
/// are refused unless `allow_override` is set.
pub fn correlation_scan<T: Real>(
    tables: &[&EvaluatedTable<T>],
    family: &ShiftFamily,
    lattice: &LatticeBox,
    window: &EvaluationWindow,
    allow_override: bool,
) -> Result<CorrelationSeries<T>> {
    if family.requires_override() && !allow_override {
        return Err(Error::DependentFamily);
    }
    if tables.len() != family.len() + 1 {
        return Err(Error::Validation(format!(
            "a family of {} shifts needs {} functions, got {}",
            family.len(),
            family.len() + 1,
            tables.len()
        )));
    }
    if lattice.arity() != family.arity() {
        return Err(Error::Validation(format!(
            "box has {} coordinates, family has {} variables",
            lattice.arity(),
            family.arity()
        )));
    }
    let points: Vec<Vec<i64>> = lattice.points().collect();
    let shifts = points.iter().map(|n| family.shifts(n)).collect::<Result<Vec<_>>>()?;
    let correlator = Correlator::new(tables);
    for s in &shifts {
        correlator.check_coverage(s, 1, window.max())?;
    }
    let per_point = shifts
        .par_iter()
        .map(|s| correlator.nested(s, window.m_grid()))
        .collect::<Result<Vec<_>>>()?;
    let values: Vec<Vec<Complex<T>>> = (0..window.m_grid().len())
        .map(|k| per_point.iter().map(|v| v[k]).collect())
        .collect();
    let zero = Complex::new(T::zero(), T::zero());
    let summary = values.iter().map(|v| ud_statistic(v, zero)).collect::<Result<Vec<_>>>()?;
    let differences = summary.windows(2).map(|w| w[1] - w[0]).collect();
    Ok(CorrelationSeries {
        functions: tables.iter().map(|t| t.label()).collect(),
        family: family.to_string(),
        lattice: lattice.clone(),
        m_grid: window.m_grid().to_vec(),
        points,
        shifts,
        values,
        summary,
        differences,
    })
}

/// `(1/M) Σ_{m≤M} |(1/N) Σ_{n≤N} f(m+n)|`.
pub fn short_interval_stat<T: Real>(table: &EvaluatedTable<T>, m: u64, n: u64) -> Result<T> {
    check_window(table, m, n)?;
    Ok(outer_mean(m, |a, b| window_norms(table, a, b, n)))
}

/// `(1/M) Σ_{m≤M} |(1/N) Σ_{n≤N} f(m+n) e(nt)|`.
pub fn twisted_short_interval_stat<T: Real>(table: &EvaluatedTable<T>, m: u64, n: u64, t: f64) -> Result<T> {
    if t.fract() == 0.0 {
        return short_interval_stat(table, m, n);
    }
    check_window(table, m, n)?;
    Ok(outer_mean(m, |a, b| twisted_norms(table, a, b, n, t)))
}

fn check_window<T: Real>(table: &EvaluatedTable<T>, m: u64, n: u64) -> Result<()> {
    if m == 0 || n == 0 {
        return Err(Error::Validation("short-interval statistics need M >= 1 and N >= 1".into()));
    }
    let top = m.checked_add(n).filter(|&x| x <= i64::MAX as u64).ok_or_else(|| Error::Overflow {
        term: format!("{m}+{n}"),
    })?;
    table.require(2, top as i64)
}

/// Mean over `m ∈ [1, M]` of per-`m` values produced block by block.
fn outer_mean<T: Real, F>(m: u64, block: F) -> T
where
    F: Fn(u64, u64) -> Vec<T> + Sync,
{
    let starts: Vec<u64> = (1..=m).step_by(BLOCK).collect();
    let partials: Vec<T> = starts
        .into_par_iter()
        .map(|a| {
            let b = (a + BLOCK as u64 - 1).min(m);
            let mut acc = Compensated::new();
            block(a, b).into_iter().for_each(|x| acc.add(x));
            acc.value()
        })
        .collect();
    pairwise(&partials, T::zero(), &|x, y| x + y) / T::of_u64(m)
}

/// `|(1/N) Σ_{n≤N} f(m+n)|` for `m ∈ [a, b]`.
fn window_norms<T: Real>(table: &EvaluatedTable<T>, a: u64, b: u64, n: u64) -> Vec<T> {
    let nf = T::of_u64(n);
    match table.exact().map(|x| x.order()) {
        Some(order @ (1 | 2 | 4)) => {
            // Integer window sums of the real and imaginary parts.
            let comp = |e: u16| -> (i64, i64) {
                match (e, order) {
                    (ZERO, _) => (0, 0),
                    (0, _) => (1, 0),
                    (1, 2) | (2, 4) => (-1, 0),
                    (1, 4) => (0, 1),
                    _ => (0, -1),
                }
            };
            let (mut re, mut im) = (0i64, 0i64);
            for k in a + 1..=a + n {
                let (x, y) = comp(table.exponent_at(k as i64));
                re += x;
                im += y;
            }
            let mut out = Vec::with_capacity((b - a + 1) as usize);
            for m in a..=b {
                if m > a {
                    let (x, y) = comp(table.exponent_at(m as i64));
                    let (u, v) = comp(table.exponent_at((m + n) as i64));
                    re += u - x;
                    im += v - y;
                }
                out.push(Complex::new(T::of(re as f64), T::of(im as f64)).norm() / nf);
            }
            out
        }
        _ => {
            let mut out = Vec::with_capacity((b - a + 1) as usize);
            let mut w = ComplexCompensated::new();
            for k in a + 1..=a + n {
                w.add(table.value(k));
            }
            for m in a..=b {
                if m > a {
                    w.add(-table.value(m));
                    w.add(table.value(m + n));
                }
                out.push(w.value().norm() / nf);
            }
            out
        }
    }
}

/// `|(1/N) Σ_{n≤N} f(m+n) e(nt)|` for `m ∈ [a, b]`.
fn twisted_norms<T: Real>(table: &EvaluatedTable<T>, a: u64, b: u64, n: u64, t: f64) -> Vec<T> {
    let nf = T::of_u64(n);
    let tt = T::of(t);
    let step = e::<T>(tt);
    let back = step.conj();
    let far = e::<T>(T::of(((n + 1) as f64 * t).fract()));
    let mut w = Complex::new(T::zero(), T::zero());
    for k in 1..=n {
        w += table.value(a + k) * e::<T>(T::of((k as f64 * t).fract()));
    }
    let mut out = Vec::with_capacity((b - a + 1) as usize);
    for m in a..=b {
        if m > a {
            w = back * (w - table.value(m) * step + table.value(m + n) * far);
        }
        out.push(w.norm() / nf);
    }
    out
}

/// Result of [`local_fourier_sup`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FourierSup<T> {
    /// Mean over `m` of the maximum over the grid.
    pub value: T,
    /// The true supremum exceeds the grid maximum by at most this much.
    pub gap: T,
    pub oversample: u64,
}

/// `(1/M) Σ_{m≤M} max_k |(1/N) Σ_{n≤N} f(m+n) e(nk/K)|` with `K = oversample·N`.
pub fn local_fourier_sup<T: Real + rustfft::FftNum>(table: &EvaluatedTable<T>, m: u64, n: u64, oversample: u64) -> Result<FourierSup<T>> {
    if oversample < 2 {
        return Err(Error::Validation("oversample must be >= 2".into()));
    }
    check_window(table, m, n)?;
    let k = n.checked_mul(oversample).filter(|&k| k <= 1 << 24).ok_or_else(|| Error::Overflow {
        term: format!("{oversample}*{n}"),
    })?;
    let value = outer_mean(m, |a, b| fourier_block(table, a, b, n, k as usize));
    Ok(FourierSup {
        value,
        gap: T::PI() / T::of_u64(oversample),
        oversample,
    })
}

fn fourier_block<T: Real + rustfft::FftNum>(table: &EvaluatedTable<T>, a: u64, b: u64, n: u64, k: usize) -> Vec<T> {
    let roots = roots_of_unity::<T>(k as u32);
    let nk = ((n + 1) % k as u64) as usize;
    // Window at m = a by FFT: X_j = Σ_{i=1}^{N} f(a+i) e(ij/K).
    let mut planner = FftPlanner::<T>::new();
    let fft = planner.plan_fft_inverse(k);
    let mut x = vec![Complex::new(T::zero(), T::zero()); k];
    for (i, slot) in x.iter_mut().enumerate().take(n as usize + 1).skip(1) {
        *slot = table.value(a + i as u64);
    }
    fft.process(&mut x);
    let exact = window_norms(table, a, b, n);
    let nf = T::of_u64(n);
    let mut out = Vec::with_capacity(exact.len());
    for (step, m) in (a..=b).enumerate() {
        if m > a {
            let leave = table.value(m);
            let enter = table.value(m + n);
            for (j, xj) in x.iter_mut().enumerate() {
                let w = roots[j];
                let w_far = roots[j * nk % k];
                *xj = (*xj - leave * w + enter * w_far) * w.conj();
            }
        }
        let best = x.iter().skip(1).fold(T::zero(), |acc, z| acc.max(z.norm_sqr()));
        out.push((best.sqrt() / nf).max(exact[step]));
    }
    out
}

/// `(1/N) Σ_{n≤N} |(1/M) Σ_{m≤M} f(m+n) conj f(m)|`.
pub fn mrt_stat<T: Real>(table: &EvaluatedTable<T>, m: u64, n: u64) -> Result<T> {
    if m == 0 || n == 0 {
        return Err(Error::Validation("mrt statistic needs M >= 1 and N >= 1".into()));
    }
    let conj = table.conjugate();
    let correlator = Correlator::new(&[&conj, table]);
    correlator.check_coverage(&[n as i64], 1, m)?;
    let values = (1..=n as i64)
        .map(|s| correlator.correlation(&[s], m).map(|z| z.norm()))
        .collect::<Result<Vec<T>>>()?;
    Ok(sum_slice(&values) / T::of_u64(n))
}

/// `(1/N) Σ_{n≤N} a(pn) conj a(qn)`.
pub fn katai_pair_stat<T: Real>(table: &EvaluatedTable<T>, p: u64, q: u64, n: u64) -> Result<Complex<T>> {
    for x in [p, q] {
        if x < 2 || factor(x)?.factors != [(x, 1)] {
            return Err(Error::Validation(format!("{x} is not a prime")));
        }
    }
    if p == q || n == 0 {
        return Err(Error::Validation("Kátai statistic needs distinct primes and N >= 1".into()));
    }
    let top = p.max(q).checked_mul(n).filter(|&x| x <= i64::MAX as u64).ok_or_else(|| Error::Overflow {
        term: format!("{}*{n}", p.max(q)),
    })?;
    table.require(p.min(q) as i64, top as i64)?;
    let s = sum_complex(1..n + 1, |k| table.value(p * k) * table.value(q * k).conj());
    Ok(s / T::of_u64(n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::func::{evaluate, ExactForm, FunctionSpec};
    use crate::pretense::aperiodicity_mean;
    use crate::sieve::{build_block, primes_for, SievedBlock};

    fn block(hi: u64) -> SievedBlock {
        build_block(1, hi, &primes_for(hi)).unwrap()
    }

    fn table(spec: &FunctionSpec, b: &SievedBlock) -> EvaluatedTable<f64> {
        evaluate(spec, b).unwrap()
    }

    fn chi(q: u64, idx: Vec<u32>) -> FunctionSpec {
        FunctionSpec::character(q, idx)
    }

    #[test]
    fn parse_counts_and_windows() {
        assert_eq!(parse_count("1e5").unwrap(), 100_000);
        assert_eq!(parse_count("25").unwrap(), 25);
        assert_eq!(parse_count("3e2").unwrap(), 300);
        assert!(parse_count("1.5").is_err());
        assert_eq!(EvaluationWindow::parse("1e2, 1e3").unwrap().m_grid(), &[100, 1000]);
        assert!(EvaluationWindow::parse("1e3,1e2").is_err());
        assert!(EvaluationWindow::parse("0").is_err());
    }

    #[test]
    fn correlation_examples() {
        let b = block(2_000_010);
        let one = table(&FunctionSpec::One, &b);
        let lam = table(&FunctionSpec::Liouville, &b);
        assert_eq!(correlation(&[&one, &one], &[17], 1000).unwrap(), Complex::new(1.0, 0.0));
        assert_eq!(correlation(&[&lam, &lam], &[1], 10).unwrap(), Complex::new(-0.4, 0.0));
        let c = correlation(&[&lam, &one], &[5], 1_000_000).unwrap();
        let mean = aperiodicity_mean(&lam, 1, 0, 1_000_000).unwrap();
        assert!((c - mean).norm() <= 5e-6 + 1e-15);
        assert!(matches!(
            correlation(&[&lam, &lam], &[20], 2_000_000),
            Err(Error::Coverage { .. })
        ));
        // ℓ = 0 is the plain mean.
        let f3 = table(&FunctionSpec::RootOfUnity(3), &b);
        let c = correlation(&[&f3], &[], 100_000).unwrap();
        assert!((c - aperiodicity_mean(&f3, 1, 0, 100_000).unwrap()).norm() < 1e-12);
    }

    #[test]
    fn paths_agree() {
        let b = block(50_000);
        let specs = [
            FunctionSpec::Liouville,
            FunctionSpec::Mobius,
            FunctionSpec::RootOfUnity(3),
            FunctionSpec::CompleteRootOfUnity(4),
            chi(5, vec![1]),
            chi(7, vec![1]).times(FunctionSpec::Mobius),
        ];
        let tables: Vec<_> = specs.iter().map(|s| table(s, &b)).collect();
        for (i, j, k) in [(0, 1, 2), (2, 3, 4), (5, 0, 3), (4, 4, 5)] {
            let ts = [&tables[i], &tables[j], &tables[k]];
            for shifts in [[3i64, 40], [-20, 7], [0, -5]] {
                let planes = Correlator::new(&ts).power_sum(&shifts, 30, 40_000, &[1, 2, 1]).unwrap();
                let hist = Correlator::new(&ts)
                    .with_path(Path::Histogram)
                    .power_sum(&shifts, 30, 40_000, &[1, 2, 1])
                    .unwrap();
                let cplx = Correlator::new(&ts)
                    .with_path(Path::Complex)
                    .power_sum(&shifts, 30, 40_000, &[1, 2, 1])
                    .unwrap();
                assert_eq!(planes, hist);
                assert!((planes - cplx).norm() < 1e-9, "{planes} vs {cplx}");
            }
        }
    }

    #[test]
    fn planes_handle_unaligned_ranges() {
        let b = block(10_000);
        let lam = table(&FunctionSpec::Liouville, &b);
        let mu = table(&FunctionSpec::Mobius, &b);
        let c = Correlator::new(&[&lam, &mu, &lam]);
        for (lo, hi) in [(1u64, 1), (1, 63), (5, 64), (63, 130), (1, 9000), (7, 7)] {
            assert_eq!(c.path(&[3, 11], lo), Path::Planes);
            let h = c.histogram(&[3, 11], lo, hi).unwrap().unwrap();
            let direct = (lo..=hi)
                .map(|m| lam.value(m) * mu.value(m + 3) * lam.value(m + 11))
                .fold(Complex::new(0.0, 0.0), |a, z| a + z);
            assert_eq!(h.total(), hi - lo + 1);
            assert_eq!(h.power_sum::<f64>(&[1, 1, 1]), direct);
        }
    }

    #[test]
    fn zero_and_negative_arguments_use_the_integer_extension() {
        let b = block(1000);
        let lam = table(&FunctionSpec::Liouville, &b);
        let c = correlation(&[&lam, &lam], &[-3], 10).unwrap();
        let direct: f64 = (1..=10i64).map(|m| lam.at(m).re * lam.at(m - 3).re).sum();
        assert_eq!(c.re, direct / 10.0);
    }

    #[test]
    fn conjugation_symmetry() {
        let b = block(20_000);
        let f = table(&FunctionSpec::RootOfUnity(5), &b);
        let g = table(&chi(7, vec![1]), &b);
        let c = correlation(&[&f, &g, &f], &[2, 9], 15_000).unwrap();
        let cc = correlation(&[&f.conjugate(), &g.conjugate(), &f.conjugate()], &[2, 9], 15_000).unwrap();
        assert!((c.conj() - cc).norm() < 1e-14);
        assert!(c.norm() <= 1.0);
    }

    #[test]
    fn non_exact_tables_use_complex_sums() {
        let b = block(10_000);
        let arch = table(&FunctionSpec::Archimedean(1.0), &b);
        let lam = table(&FunctionSpec::Liouville, &b);
        let c = Correlator::new(&[&arch, &lam]);
        assert_eq!(c.path(&[1], 1), Path::Complex);
        let v = c.correlation(&[1], 5000).unwrap();
        let direct: Complex<f64> = (1..=5000u64).map(|m| arch.value(m) * lam.value(m + 1)).sum::<Complex<f64>>() / 5000.0;
        assert!((v - direct).norm() < 1e-12);
    }

    #[test]
    fn ud_examples() {
        let c = Complex::new(0.3, -0.2);
        assert_eq!(ud_statistic(&[c, c, c], c).unwrap(), 0.0);
        let alt = [Complex::new(-1.0, 0.0), Complex::new(1.0, 0.0)];
        assert_eq!(ud_statistic(&alt, Complex::new(0.0, 0.0)).unwrap(), 1.0);
        let inv: Vec<Complex<f64>> = (1..=4).map(|n| Complex::new(1.0 / n as f64, 0.0)).collect();
        assert!((ud_statistic(&inv, Complex::new(0.0, 0.0)).unwrap() - 25.0 / 48.0).abs() < 1e-15);
        assert!(ud_statistic::<f64>(&[], Complex::new(0.0, 0.0)).is_err());
    }

    #[test]
    fn scan_examples() {
        let b = block(20_000);
        let one = table(&FunctionSpec::One, &b);
        let fam = ShiftFamily::parse("n").unwrap();
        let lattice = LatticeBox::parse("1:30").unwrap();
        let window = EvaluationWindow::parse("100,1000").unwrap();
        let s = correlation_scan(&[&one, &one], &fam, &lattice, &window, false).unwrap();
        assert!(s.values.iter().flatten().all(|z| *z == Complex::new(1.0, 0.0)));
        assert_eq!(s.summary, vec![1.0, 1.0]);

        let c3 = table(&chi(3, vec![1]), &b);
        let lattice = LatticeBox::parse("1:300").unwrap();
        let window = EvaluationWindow::parse("9999").unwrap();
        let s = correlation_scan(&[&c3.conjugate(), &c3], &fam, &lattice, &window, false).unwrap();
        assert!((s.summary[0] - 4.0 / 9.0).abs() < 1e-3, "{}", s.summary[0]);

        let dep = ShiftFamily::parse("n,2*n").unwrap();
        let ts = [&one, &one, &one];
        let lattice = LatticeBox::parse("1:5").unwrap();
        assert!(matches!(
            correlation_scan(&ts, &dep, &lattice, &window, false),
            Err(Error::DependentFamily)
        ));
        assert!(correlation_scan(&ts, &dep, &lattice, &window, true).is_ok());
    }

    #[test]
    fn nested_matches_direct() {
        let b = block(200_000);
        let lam = table(&FunctionSpec::Liouville, &b);
        let f3 = table(&FunctionSpec::RootOfUnity(3), &b);
        let arch = table(&FunctionSpec::Archimedean(0.3), &b);
        for ts in [[&lam, &f3], [&arch, &lam]] {
            let c = Correlator::new(&ts);
            let grid = [1000u64, 50_000, 150_000];
            let nested = c.nested(&[7], &grid).unwrap();
            for (&m, v) in grid.iter().zip(&nested) {
                let direct = c.correlation(&[7], m).unwrap();
                assert!((direct - v).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn short_interval_examples() {
        let b = block(300_000);
        let one = table(&FunctionSpec::One, &b);
        assert_eq!(short_interval_stat(&one, 1000, 50).unwrap(), 1.0);
        let c4 = table(&chi(4, vec![1]), &b);
        for k in [1u64, 5, 25] {
            let v = short_interval_stat(&c4, 100_000, 4 * k).unwrap();
            assert!(v <= 3.0 / (4 * k) as f64, "N = {}: {v}", 4 * k);
        }
        let lam = table(&FunctionSpec::Liouville, &b);
        let s = short_interval_stat(&lam, 100_000, 100).unwrap();
        assert_eq!(twisted_short_interval_stat(&lam, 100_000, 100, 0.0).unwrap(), s);
        assert!(twisted_short_interval_stat(&one, 5_000, 100, 0.5).unwrap() <= 1.0 / 100.0);
        let golden = (5f64.sqrt() - 1.0) / 2.0;
        assert!(twisted_short_interval_stat(&lam, 100_000, 100, golden).unwrap() <= s + 0.05);
        // Sliding update against direct evaluation.
        let f5 = table(&FunctionSpec::RootOfUnity(5), &b);
        let v = short_interval_stat(&f5, 5000, 37).unwrap();
        let direct: f64 = (1..=5000u64)
            .map(|m| ((1..=37u64).map(|n| f5.value(m + n)).sum::<Complex<f64>>() / 37.0).norm())
            .sum::<f64>()
            / 5000.0;
        assert!((v - direct).abs() < 1e-12);
        let t = 0.123;
        let v = twisted_short_interval_stat(&f5, 5000, 37, t).unwrap();
        let direct: f64 = (1..=5000u64)
            .map(|m| {
                ((1..=37u64).map(|n| f5.value(m + n) * e(n as f64 * t)).sum::<Complex<f64>>() / 37.0).norm()
            })
            .sum::<f64>()
            / 5000.0;
        assert!((v - direct).abs() < 1e-12);
        assert!(matches!(short_interval_stat(&lam, 300_000, 10), Err(Error::Coverage { .. })));
    }

    #[test]
    fn fourier_sup_examples() {
        let b = block(30_000);
        let one = table(&FunctionSpec::One, &b);
        let r = local_fourier_sup(&one, 1000, 20, 4).unwrap();
        assert!((r.value - 1.0).abs() < 1e-12);
        assert!((r.gap - std::f64::consts::PI / 4.0).abs() < 1e-15);
        let lam = table(&FunctionSpec::Liouville, &b);
        let m = 20_000;
        let sup = local_fourier_sup(&lam, m, 30, 4).unwrap().value;
        assert!(sup >= short_interval_stat(&lam, m, 30).unwrap());
        for k in [1u64, 7, 60, 119] {
            let t = k as f64 / 120.0;
            assert!(sup + 1e-12 >= twisted_short_interval_stat(&lam, m, 30, t).unwrap());
        }
        // Direct evaluation of the grid maximum.
        let direct: f64 = (1..=500u64)
            .map(|mm| {
                (0..120)
                    .map(|k| {
                        (1..=30u64)
                            .map(|n| lam.value(mm + n) * e(n as f64 * k as f64 / 120.0))
                            .sum::<Complex<f64>>()
                            .norm()
                            / 30.0
                    })
                    .fold(0.0, f64::max)
            })
            .sum::<f64>()
            / 500.0;
        let v = local_fourier_sup(&lam, 500, 30, 4).unwrap().value;
        assert!((v - direct).abs() < 1e-12, "{v} vs {direct}");
        assert!(local_fourier_sup(&lam, 500, 30, 1).is_err());
    }

    #[test]
    fn mrt_examples() {
        let b = block(200_000);
        let one = table(&FunctionSpec::One, &b);
        assert_eq!(mrt_stat(&one, 1000, 10).unwrap(), 1.0);
        let c3 = table(&chi(3, vec![1]), &b);
        let v = mrt_stat(&c3, 100_000, 99).unwrap();
        assert!((v - 4.0 / 9.0).abs() < 1e-4, "{v}");
    }

    #[test]
    fn katai_examples() {
        let b = block(10_000);
        let one = table(&FunctionSpec::One, &b);
        assert_eq!(katai_pair_stat(&one, 2, 3, 1000).unwrap(), Complex::new(1.0, 0.0));
        let lam = table(&FunctionSpec::Liouville, &b);
        assert_eq!(katai_pair_stat(&lam, 2, 3, 3000).unwrap(), Complex::new(1.0, 0.0));
        assert!(katai_pair_stat(&lam, 2, 4, 100).is_err());
        assert!(katai_pair_stat(&lam, 3, 3, 100).is_err());
        assert!(matches!(katai_pair_stat(&lam, 2, 3, 5000), Err(Error::Coverage { .. })));
        let alpha = 2f64.sqrt() - 1.0;
        let n = 3000u64;
        let seq: Vec<Complex<f64>> = (1..=3 * n).map(|k| e((k as f64 * alpha).fract())).collect();
        let a = EvaluatedTable::from_sequence(1, seq);
        let v = katai_pair_stat(&a, 2, 3, n).unwrap();
        // a(2n) conj a(3n) = e(-nα), a geometric series.
        let pi = std::f64::consts::PI;
        let closed = (pi * n as f64 * alpha).sin().abs() / (n as f64 * (pi * alpha).sin());
        assert!((v.norm() - closed).abs() < 1e-12);
        assert!(v.norm() <= 1.0 / (n as f64 * (pi * alpha).sin()));
    }

    #[test]
    fn joint_histogram_counts() {
        let b = block(1000);
        let lam = table(&FunctionSpec::Liouville, &b);
        let mu = table(&FunctionSpec::Mobius, &b);
        let h = Correlator::new(&[&lam, &mu]).histogram(&[1], 1, 500).unwrap().unwrap();
        assert_eq!(h.orders(), &[2, 2]);
        let zeros = (1..=500u64).filter(|&m| b.mu(m + 1) == 0).count() as u64;
        assert_eq!(h.count(&[Some(0), None]) + h.count(&[Some(1), None]), zeros);
        assert_eq!(h.total(), 500);
        let seq = EvaluatedTable::<f64>::from_exact(1, ExactForm::new(3, vec![0, 1, 2, ZERO, 1, 1]));
        let h = Correlator::new(&[&seq]).histogram(&[], 1, 6).unwrap().unwrap();
        assert_eq!(h.counts(), &[1, 3, 1, 1]);
        assert_eq!(h.power_sum::<f64>(&[0]), Complex::new(6.0, 0.0));
    }
}
