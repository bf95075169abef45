//! Pretentious distance and strong-aperiodicity diagnostics.
//!
//! `𝔻(f,g;N)² = Σ_{p≤N} (1 - Re f(p) conj g(p)) / p` and
//! `M(f;N) = min_{|t|≤N} 𝔻(f, n^{it}; N)²`.
//!
//! Each summand is written as `(1 - r) + 2 r sin²(φ/2)` with `r e^{iφ} =
//! f(p) conj g(p)`, which stays accurate when `f(p)` is close to `g(p)`. Prime
//! sums go through [`FixedSum`](crate::sum::FixedSum), so they are exact up to
//! the rounding of individual terms and monotone in `N`.

use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::func::{character_group, Compiled, EvaluatedTable, FunctionSpec};
use crate::scalar::Real;
use crate::sieve::PrimeList;
use crate::sum::{sum_complex, sum_fixed};

/// What `f` is compared against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Twist {
    Function(FunctionSpec),
    /// `n^{it}`.
    Archimedean(f64),
}

/// `𝔻²(f, twist; N)` over a grid of cutoffs.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceProfile<T> {
    pub f: FunctionSpec,
    pub twist: Twist,
    pub cutoffs: Vec<u64>,
    pub values: Vec<T>,
}

/// Per-prime data `(1/p, log p, r, φ)` where `r e^{iφ} = f(p) conj g(p)`.
#[derive(Debug, Clone)]
struct PrimeTerms<T> {
    inv_p: Vec<T>,
    log_p: Vec<T>,
    modulus: Vec<T>,
    angle: Vec<T>,
}

impl<T: Real> PrimeTerms<T> {
    fn new(f: &Compiled, g: Option<&Compiled>, primes: &[u64]) -> Self {
        let mut out = Self {
            inv_p: Vec::with_capacity(primes.len()),
            log_p: Vec::with_capacity(primes.len()),
            modulus: Vec::with_capacity(primes.len()),
            angle: Vec::with_capacity(primes.len()),
        };
        for &p in primes {
            let mut w: Complex<T> = f.prime_power(p, 1);
            if let Some(g) = g {
                w *= g.prime_power::<T>(p, 1).conj();
            }
            let pf = T::of_u64(p);
            out.inv_p.push(pf.recip());
            out.log_p.push(pf.ln());
            out.modulus.push(w.norm().min(T::one()));
            out.angle.push(w.arg());
        }
        out
    }

    fn len(&self) -> usize {
        self.inv_p.len()
    }

    #[inline]
    fn term(&self, i: usize, t: T) -> T {
        let two = T::one() + T::one();
        let r = self.modulus[i];
        let half = (self.angle[i] - t * self.log_p[i]) / two;
        let s = half.sin();
        ((T::one() - r) + two * r * s * s) * self.inv_p[i]
    }

    /// `Σ_{i<count} term(i, t)`.
    fn sum(&self, count: usize, t: T) -> T {
        T::of(sum_fixed(0..count as u64, |i| self.term(i as usize, t).to_f64_lossy()))
    }
}

fn primes_to(primes: &PrimeList, n: u64) -> Result<&[u64]> {
    if primes.limit() < n {
        return Err(Error::InsufficientPrimes {
            required: n,
            available: primes.limit(),
        });
    }
    Ok(primes.up_to_prefix(n))
}

/// `𝔻(f,g;N)²`.
pub fn distance_sq<T: Real>(f: &FunctionSpec, g: &FunctionSpec, n: u64, primes: &PrimeList) -> Result<T> {
    let ps = primes_to(primes, n)?;
    let terms = PrimeTerms::<T>::new(&f.compile()?, Some(&g.compile()?), ps);
    Ok(terms.sum(terms.len(), T::zero()))
}

/// `𝔻(f, n^{it}; N)² = Σ_{p≤N} (1 - Re f(p) p^{-it}) / p`.
pub fn distance_to_archimedean<T: Real>(f: &FunctionSpec, t: T, n: u64, primes: &PrimeList) -> Result<T> {
    let ps = primes_to(primes, n)?;
    let terms = PrimeTerms::<T>::new(&f.compile()?, None, ps);
    Ok(terms.sum(terms.len(), t))
}

/// `𝔻²(f, twist; N)` for every cutoff (ascending).
pub fn distance_profile<T: Real>(
    f: &FunctionSpec,
    twist: &Twist,
    cutoffs: &[u64],
    primes: &PrimeList,
) -> Result<DistanceProfile<T>> {
    if cutoffs.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Validation("cutoffs must be ascending".into()));
    }
    let top = cutoffs.last().copied().unwrap_or(2);
    let ps = primes_to(primes, top)?;
    let fc = f.compile()?;
    let (terms, t) = match twist {
        Twist::Function(g) => (PrimeTerms::<T>::new(&fc, Some(&g.compile()?), ps), T::zero()),
        Twist::Archimedean(t) => (PrimeTerms::<T>::new(&fc, None, ps), T::of(*t)),
    };
    let values = cutoffs
        .iter()
        .map(|&n| terms.sum(ps.partition_point(|&p| p <= n), t))
        .collect();
    Ok(DistanceProfile {
        f: f.clone(),
        twist: twist.clone(),
        cutoffs: cutoffs.to_vec(),
        values,
    })
}

/// Search grid for `M(f;N)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    /// Uniform step on `|t| <= 1`; `None` means `1 / (4 (log N)²)`.
    pub coarse_step: Option<f64>,
    /// Ratio step `δ` of the grid `±exp(kδ)` on `1 <= |t| <= t_max`.
    pub log_step: f64,
    /// Golden-section refinement stops at this bracket width.
    pub refine_width: f64,
    /// Number of best grid points refined.
    pub refine_brackets: usize,
    /// Search `|t| <= t_max`; `None` means `N`.
    pub t_max: Option<f64>,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            coarse_step: None,
            log_step: 0.05,
            refine_width: 1e-6,
            refine_brackets: 3,
            t_max: None,
        }
    }
}

impl SearchConfig {
    /// The same search on a grid twice as fine (contains every old grid point).
    pub fn refined(&self, n: u64) -> Self {
        Self {
            coarse_step: Some(self.coarse_step_for(n) / 2.0),
            log_step: self.log_step / 2.0,
            ..self.clone()
        }
    }

    fn coarse_step_for(&self, n: u64) -> f64 {
        self.coarse_step.unwrap_or_else(|| {
            let l = (n.max(3) as f64).ln();
            1.0 / (4.0 * l * l)
        })
    }

    /// Ascending grid of `t` values, containing 0 and `±1`.
    pub fn grid(&self, n: u64) -> Vec<f64> {
        let t_max = self.t_max.unwrap_or(n as f64).max(0.0);
        let h = self.coarse_step_for(n);
        let inner = t_max.min(1.0);
        let k_max = (inner / h).floor() as i64;
        let mut pts: Vec<f64> = (-k_max..=k_max).map(|k| k as f64 * h).collect();
        if t_max >= 1.0 {
            pts.push(1.0);
            pts.push(-1.0);
            let mut k = 1i64;
            loop {
                let t = (k as f64 * self.log_step).exp();
                if t >= t_max {
                    break;
                }
                pts.push(t);
                pts.push(-t);
                k += 1;
            }
            pts.push(t_max);
            pts.push(-t_max);
        }
        pts.sort_by(|a, b| a.partial_cmp(b).expect("finite grid"));
        pts.dedup();
        pts
    }
}

/// Result of the `M(f;N)` search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinDistance<T> {
    pub t_star: T,
    pub value: T,
    /// Best point of the grid before refinement.
    pub grid_t: T,
    pub grid_value: T,
}

/// `M(f;N)` by grid search over `|t| <= N` plus golden-section refinement.
pub fn min_distance<T: Real>(f: &FunctionSpec, n: u64, search: &SearchConfig, primes: &PrimeList) -> Result<MinDistance<T>> {
    let ps = primes_to(primes, n)?;
    let terms = PrimeTerms::<T>::new(&f.compile()?, None, ps);
    Ok(minimize(&terms, n, search))
}

fn minimize<T: Real>(terms: &PrimeTerms<T>, n: u64, search: &SearchConfig) -> MinDistance<T> {
    let count = terms.len();
    let grid = search.grid(n);
    let values: Vec<T> = grid.par_iter().map(|&t| terms.sum(count, T::of(t))).collect();

    let mut order: Vec<usize> = (0..grid.len()).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).expect("finite").then(a.cmp(&b)));
    let best = order[0];
    let mut result = MinDistance {
        t_star: T::of(grid[best]),
        value: values[best],
        grid_t: T::of(grid[best]),
        grid_value: values[best],
    };
    let golden = T::of(0.618_033_988_749_894_9);
    for &i in order.iter().take(search.refine_brackets.max(1)) {
        let mut a = T::of(grid[i.saturating_sub(1)]);
        let mut b = T::of(grid[(i + 1).min(grid.len() - 1)]);
        let width = T::of(search.refine_width);
        let mut c = b - golden * (b - a);
        let mut d = a + golden * (b - a);
        let mut fc = terms.sum(count, c);
        let mut fd = terms.sum(count, d);
        while b - a > width {
            if fc < fd {
                b = d;
                d = c;
                fd = fc;
                c = b - golden * (b - a);
                fc = terms.sum(count, c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + golden * (b - a);
                fd = terms.sum(count, d);
            }
            if b - a <= T::epsilon() * (a.abs() + b.abs()) {
                break;
            }
        }
        for (t, v) in [(c, fc), (d, fd)] {
            if v < result.value {
                result.t_star = t;
                result.value = v;
            }
        }
    }
    result
}

/// Finite-cutoff verdict on strong aperiodicity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    EvidenceStrongAperiodic,
    EvidenceNot,
    Inconclusive,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::EvidenceStrongAperiodic => "evidence-strong-aperiodic",
            Verdict::EvidenceNot => "evidence-not",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

/// Thresholds applied to the growth of `M(f·χ;N)` between the top two cutoffs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScanConfig {
    /// Every curve must grow at least this much for a positive verdict.
    pub growth_threshold: f64,
    /// Any curve growing less than this gives a negative verdict.
    pub stall_threshold: f64,
    pub search: SearchConfig,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            growth_threshold: 0.2,
            stall_threshold: 0.02,
            search: SearchConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanPoint<T> {
    pub n: u64,
    pub t_star: T,
    pub m_value: T,
}

/// `M(f·χ;N)` across the cutoffs for one character.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanCurve<T> {
    pub q: u64,
    /// Position of `χ` in [`character_group`]`(q)`.
    pub chi_index: usize,
    pub index: Vec<u32>,
    pub points: Vec<ScanPoint<T>>,
}

impl<T: Real> ScanCurve<T> {
    /// Growth between the top two cutoffs.
    pub fn top_growth(&self) -> Option<T> {
        let k = self.points.len();
        (k >= 2).then(|| self.points[k - 1].m_value - self.points[k - 2].m_value)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AperiodicityReport<T> {
    pub f: FunctionSpec,
    pub curves: Vec<ScanCurve<T>>,
    pub verdict: Verdict,
}

/// `M(f·χ;N)` for every character of every modulus `q <= q_max`.
pub fn strong_aperiodicity_scan<T: Real>(
    f: &FunctionSpec,
    q_max: u64,
    cutoffs: &[u64],
    config: &ScanConfig,
    primes: &PrimeList,
) -> Result<AperiodicityReport<T>> {
    if cutoffs.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Validation("cutoffs must be strictly ascending".into()));
    }
    if let Some(&top) = cutoffs.last() {
        primes_to(primes, top)?;
    }
    f.validate()?;
    let mut curves = Vec::new();
    for q in 1..=q_max {
        for (chi_index, chi) in character_group(q)?.into_iter().enumerate() {
            let twisted = f.clone().times(FunctionSpec::character(q, chi.index().to_vec())).compile()?;
            let mut points = Vec::with_capacity(cutoffs.len());
            for &n in cutoffs {
                let terms = PrimeTerms::<T>::new(&twisted, None, primes.up_to_prefix(n));
                let m = minimize(&terms, n, &config.search);
                points.push(ScanPoint {
                    n,
                    t_star: m.t_star,
                    m_value: m.value,
                });
            }
            curves.push(ScanCurve {
                q,
                chi_index,
                index: chi.index().to_vec(),
                points,
            });
        }
    }
    let verdict = verdict(&curves, config);
    Ok(AperiodicityReport {
        f: f.clone(),
        curves,
        verdict,
    })
}

fn verdict<T: Real>(curves: &[ScanCurve<T>], config: &ScanConfig) -> Verdict {
    let growth: Option<Vec<f64>> = curves.iter().map(|c| c.top_growth().map(Real::to_f64_lossy)).collect();
    match growth {
        None => Verdict::Inconclusive,
        Some(g) if g.is_empty() => Verdict::Inconclusive,
        Some(g) if g.iter().any(|&x| x <= 0.0 || x < config.stall_threshold) => Verdict::EvidenceNot,
        Some(g) if g.iter().all(|&x| x >= config.growth_threshold) => Verdict::EvidenceStrongAperiodic,
        Some(_) => Verdict::Inconclusive,
    }
}

/// `(1/N) Σ_{n≤N} f(an + b)`.
pub fn aperiodicity_mean<T: Real>(table: &EvaluatedTable<T>, a: u64, b: u64, n: u64) -> Result<Complex<T>> {
    if a == 0 || n == 0 {
        return Err(Error::Validation("aperiodicity mean needs a >= 1 and N >= 1".into()));
    }
    let top = a
        .checked_mul(n)
        .and_then(|x| x.checked_add(b))
        .filter(|&x| x <= i64::MAX as u64)
        .ok_or_else(|| Error::Overflow {
            term: format!("{a}*{n}+{b}"),
        })?;
    table.require((a + b) as i64, top as i64)?;
    let s = sum_complex(1..n + 1, |k| table.at((a * k + b) as i64));
    Ok(s / T::of_u64(n))
}
