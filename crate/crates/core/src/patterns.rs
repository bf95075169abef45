//! Densities of sign patterns and of residue patterns of `ω` / `Ω`.
//!
//! Each density is computed twice: by counting (integer histogram of the
//! pattern seen at each `m`) and through the multiplicative expansions
//!
//! - `1_{f=ε}(n) = (1 + ε f(n)) / 2` for `f` with values `±1`,
//! - `1_{[ω(n)]_b = a} = (1/b) Σ_{r<b} ζ^{-ar} f_b(n)^r` with `ζ = e(1/b)`,
//!   and the same with `Ω` and `f′_b`,
//!
//! whose products are evaluated as correlations.

use std::fmt;

use num_complex::Complex;
use num_integer::Integer;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::correlate::{Correlator, EvaluationWindow};
use crate::error::{Error, Result};
use crate::func::{evaluate, EvaluatedTable, FunctionSpec};
use crate::scalar::{roots_of_unity, Real};
use crate::shift::{LatticeBox, ShiftFamily};
use crate::sieve::SievedBlock;
use crate::sum::ComplexCompensated;

const COUNT_CHUNK: u64 = 1 << 16;
const MAX_PATTERNS: usize = 1 << 16;

/// Which prime-factor count a residue slot reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Counter {
    /// Distinct prime factors.
    Omega,
    /// Prime factors with multiplicity.
    BigOmega,
}

impl fmt::Display for Counter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Counter::Omega => "omega",
            Counter::BigOmega => "big_omega",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResidueSlot {
    pub modulus: u32,
    pub counter: Counter,
}

/// The slots `f_0, …, f_ℓ` of a pattern, without the pattern itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatternSpec {
    /// Functions with values `±1`.
    Sign(Vec<FunctionSpec>),
    Residue(Vec<ResidueSlot>),
}

impl PatternSpec {
    pub fn slots(&self) -> usize {
        match self {
            PatternSpec::Sign(f) => f.len(),
            PatternSpec::Residue(r) => r.len(),
        }
    }

    /// Number of values per slot.
    pub fn radices(&self) -> Vec<u32> {
        match self {
            PatternSpec::Sign(f) => vec![2; f.len()],
            PatternSpec::Residue(r) => r.iter().map(|s| s.modulus).collect(),
        }
    }

    /// `2^{-(ℓ+1)}` or `∏ 1/b_j`.
    pub fn target<T: Real>(&self) -> T {
        self.radices().iter().fold(T::one(), |acc, &b| acc / T::of(b as f64))
    }

    /// Every pattern, in counting order (slot 0 most significant).
    pub fn patterns(&self) -> Vec<Pattern> {
        let radices = self.radices();
        let total: usize = radices.iter().map(|&b| b as usize).product();
        (0..total).map(|i| self.pattern_at(i, &radices)).collect()
    }

    fn pattern_at(&self, mut i: usize, radices: &[u32]) -> Pattern {
        let mut digits = vec![0u32; radices.len()];
        for j in (0..radices.len()).rev() {
            digits[j] = (i % radices[j] as usize) as u32;
            i /= radices[j] as usize;
        }
        match self {
            PatternSpec::Sign(_) => Pattern::Sign(digits.iter().map(|&d| if d == 0 { 1 } else { -1 }).collect()),
            PatternSpec::Residue(_) => Pattern::Residue(digits),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.slots() == 0 {
            return Err(Error::Validation("a pattern needs at least one slot".into()));
        }
        if let PatternSpec::Residue(r) = self {
            if let Some(s) = r.iter().find(|s| s.modulus == 0 || s.modulus > 64) {
                return Err(Error::Validation(format!("modulus {} must be in 1..=64", s.modulus)));
            }
        }
        let total = self
            .radices()
            .iter()
            .try_fold(1usize, |acc, &b| acc.checked_mul(b as usize))
            .filter(|&n| n <= MAX_PATTERNS);
        if total.is_none() {
            return Err(Error::Validation("too many patterns".into()));
        }
        Ok(())
    }

    fn index_of(&self, pattern: &Pattern) -> Result<usize> {
        let radices = self.radices();
        let digits: Vec<u32> = match (self, pattern) {
            (PatternSpec::Sign(_), Pattern::Sign(eps)) => eps
                .iter()
                .map(|&e| match e {
                    1 => Ok(0),
                    -1 => Ok(1),
                    _ => Err(Error::Validation(format!("sign {e} must be +1 or -1"))),
                })
                .collect::<Result<_>>()?,
            (PatternSpec::Residue(_), Pattern::Residue(a)) => a.clone(),
            _ => return Err(Error::Validation("pattern kind does not match the slots".into())),
        };
        if digits.len() != radices.len() {
            return Err(Error::Validation(format!(
                "pattern {pattern} has {} entries, expected {}",
                digits.len(),
                radices.len()
            )));
        }
        let mut idx = 0usize;
        for (&d, &b) in digits.iter().zip(&radices) {
            if d >= b {
                return Err(Error::Validation(format!("residue {d} must be in 0..{b}")));
            }
            idx = idx * b as usize + d as usize;
        }
        Ok(idx)
    }
}

/// A sign vector `ε` or a residue vector `a`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pattern {
    Sign(Vec<i8>),
    Residue(Vec<u32>),
}

impl Pattern {
    /// Parse `"+-+"` as a sign pattern.
    pub fn parse_signs(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| match c {
                '+' => Ok(1),
                '-' => Ok(-1),
                _ => Err(Error::Parse(format!("sign pattern {s:?}: expected '+' or '-'"))),
            })
            .collect::<Result<Vec<_>>>()
            .and_then(|v| {
                if v.is_empty() {
                    Err(Error::Parse("empty sign pattern".into()))
                } else {
                    Ok(Pattern::Sign(v))
                }
            })
    }

    /// Parse `"1,0,2"` as a residue pattern.
    pub fn parse_residues(s: &str) -> Result<Self> {
        s.split(',')
            .map(|x| x.trim().parse::<u32>().map_err(|_| Error::Parse(format!("residue pattern {s:?}"))))
            .collect::<Result<Vec<_>>>()
            .map(Pattern::Residue)
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Pattern::Sign(e) => e.iter().try_for_each(|&x| f.write_str(if x > 0 { "+" } else { "-" })),
            Pattern::Residue(a) => {
                let parts: Vec<String> = a.iter().map(u32::to_string).collect();
                f.write_str(&parts.join(","))
            }
        }
    }
}

/// One pattern density with its cross-check.
#[derive(Debug, Clone, PartialEq)]
pub struct PatternDensityResult<T> {
    pub pattern: Pattern,
    pub shifts: Vec<i64>,
    pub m: u64,
    /// Number of `m ≤ M` realising the pattern.
    pub count: u64,
    pub density: T,
    /// Real part of the expansion.
    pub expansion_density: T,
    pub expansion_imag: T,
    pub target: T,
}

impl<T: Real> PatternDensityResult<T> {
    /// `|density - expansion| ≤ tol` and `|imag| ≤ tol`.
    pub fn agrees(&self, tol: T) -> bool {
        (self.density - self.expansion_density).abs() <= tol && self.expansion_imag.abs() <= tol
    }
}

/// A full query: slots, pattern, shifts and averaging length.
#[derive(Debug, Clone, PartialEq)]
pub struct PatternQuery {
    pub spec: PatternSpec,
    pub pattern: Pattern,
    pub family: ShiftFamily,
    pub point: Vec<i64>,
    pub m: u64,
}

/// Precomputed per-slot classes and expansion tables over one sieved block.
pub struct PatternEngine<'a, T> {
    spec: PatternSpec,
    block: &'a SievedBlock,
    radices: Vec<u32>,
    /// Class of `n` in slot `j` at `classes[j][n - lo]`; `u8::MAX` if `f_j(n) ∉ {±1}`.
    classes: Vec<Vec<u8>>,
    /// Sorted `n` with an invalid sign value, per slot.
    invalid: Vec<Vec<u64>>,
    tables: Vec<EvaluatedTable<T>>,
    powers: Vec<Vec<u32>>,
}

impl<'a, T: Real> PatternEngine<'a, T> {
    pub fn new(spec: PatternSpec, block: &'a SievedBlock) -> Result<Self> {
        spec.validate()?;
        let radices = spec.radices();
        let mut classes = Vec::new();
        let mut invalid = Vec::new();
        let mut tables = Vec::new();
        match &spec {
            PatternSpec::Sign(functions) => {
                for f in functions {
                    let t: EvaluatedTable<T> = evaluate(f, block)?;
                    let mut bad = Vec::new();
                    let cls: Vec<u8> = (block.lo()..block.hi())
                        .map(|n| match t.sign_at(n as i64) {
                            Some(1) => 0,
                            Some(_) => 1,
                            None => {
                                bad.push(n);
                                u8::MAX
                            }
                        })
                        .collect();
                    classes.push(cls);
                    invalid.push(bad);
                    tables.push(t);
                }
            }
            PatternSpec::Residue(slots) => {
                for s in slots {
                    let (counts, f) = match s.counter {
                        Counter::Omega => (block.omega_slice(), FunctionSpec::RootOfUnity(s.modulus)),
                        Counter::BigOmega => (block.big_omega_slice(), FunctionSpec::CompleteRootOfUnity(s.modulus)),
                    };
                    classes.push(counts.iter().map(|&c| (c as u32 % s.modulus) as u8).collect());
                    invalid.push(Vec::new());
                    tables.push(evaluate(&f, block)?);
                }
            }
        }
        let powers = all_vectors(&radices);
        Ok(Self {
            spec,
            block,
            radices,
            classes,
            invalid,
            tables,
            powers,
        })
    }

    pub fn spec(&self) -> &PatternSpec {
        &self.spec
    }

    fn offsets(&self, shifts: &[i64]) -> Result<Vec<i64>> {
        if shifts.len() + 1 != self.radices.len() {
            return Err(Error::Validation(format!(
                "{} slots need {} shifts, got {}",
                self.radices.len(),
                self.radices.len() - 1,
                shifts.len()
            )));
        }
        Ok(std::iter::once(0).chain(shifts.iter().copied()).collect())
    }

    /// Check coverage and sign validity for `m ∈ [m_lo, m_hi]`.
    fn check(&self, offsets: &[i64], m_lo: u64, m_hi: u64) -> Result<()> {
        for (j, &s) in offsets.iter().enumerate() {
            let a = m_lo as i64 + s;
            let b = m_hi as i64 + s;
            if a <= 0 && b >= 0 {
                return Err(Error::Validation(format!(
                    "slot {j}: argument 0 (m = {}) has no pattern value",
                    -s
                )));
            }
            self.tables[j].require(a, b)?;
            let (lo, hi) = if a > 0 { (a as u64, b as u64) } else { (b.unsigned_abs(), a.unsigned_abs()) };
            let bad = &self.invalid[j];
            let i = bad.partition_point(|&n| n < lo);
            if let Some(&n) = bad.get(i).filter(|&&n| n <= hi) {
                let spec = match &self.spec {
                    PatternSpec::Sign(f) => f[j].to_string(),
                    PatternSpec::Residue(_) => unreachable!("residue slots are always valid"),
                };
                return Err(Error::NotSignValued { spec, n: n as i64 });
            }
        }
        Ok(())
    }

    /// Number of `m ∈ [m_lo, m_hi]` realising each pattern, in [`PatternSpec::patterns`] order.
    pub fn counts(&self, shifts: &[i64], m_lo: u64, m_hi: u64) -> Result<Vec<u64>> {
        let offsets = self.offsets(shifts)?;
        let total: usize = self.radices.iter().map(|&b| b as usize).product();
        if m_hi < m_lo {
            return Ok(vec![0; total]);
        }
        self.check(&offsets, m_lo, m_hi)?;
        let mut strides = vec![1usize; self.radices.len()];
        for j in (0..strides.len() - 1).rev() {
            strides[j] = strides[j + 1] * self.radices[j + 1] as usize;
        }
        let lo = self.block.lo() as i64;
        let positive = offsets.iter().all(|&s| m_lo as i64 + s >= lo);
        let starts: Vec<u64> = (m_lo..=m_hi).step_by(COUNT_CHUNK as usize).collect();
        let parts: Vec<Vec<u64>> = starts
            .into_par_iter()
            .map(|a| {
                let b = (a + COUNT_CHUNK - 1).min(m_hi);
                let len = (b - a + 1) as usize;
                let mut idx = vec![0u32; len];
                for ((cls, &s), &st) in self.classes.iter().zip(&offsets).zip(&strides) {
                    if positive {
                        let start = (a as i64 + s - lo) as usize;
                        for (x, &c) in idx.iter_mut().zip(&cls[start..start + len]) {
                            *x += c as u32 * st as u32;
                        }
                    } else {
                        for (i, x) in idx.iter_mut().enumerate() {
                            let n = (a as i64 + i as i64 + s).unsigned_abs();
                            *x += cls[(n - lo as u64) as usize] as u32 * st as u32;
                        }
                    }
                }
                let mut h = vec![0u64; total];
                idx.iter().for_each(|&i| h[i as usize] += 1);
                h
            })
            .collect();
        let mut out = vec![0u64; total];
        for p in &parts {
            out.iter_mut().zip(p).for_each(|(a, b)| *a += b);
        }
        Ok(out)
    }

    /// Expansion of every pattern from the power correlations `E_r`.
    fn expand(&self, power_avgs: &[Complex<T>]) -> Vec<Complex<T>> {
        let l = self.radices.iter().fold(1u32, |acc, &b| acc.lcm(&b));
        let roots = roots_of_unity::<T>(l);
        let total = self.spec.target::<T>();
        let mut idx_patterns = Vec::with_capacity(power_avgs.len());
        for a in 0..self.powers.len() {
            let digits = self.digits(a);
            let mut acc = ComplexCompensated::new();
            for (r, &z) in self.powers.iter().zip(power_avgs) {
                // ∏_j ζ_j^{-a_j r_j}; for sign slots ζ = -1 and a_j = 1 for ε_j = -1.
                let mut k = 0u64;
                for ((&b, &d), &rj) in self.radices.iter().zip(&digits).zip(r) {
                    let e = (b - d * rj % b) % b;
                    k += e as u64 * (l / b) as u64;
                }
                acc.add(roots[(k % l as u64) as usize] * z);
            }
            idx_patterns.push(acc.value() * total);
        }
        idx_patterns
    }

    fn digits(&self, mut i: usize) -> Vec<u32> {
        let mut digits = vec![0u32; self.radices.len()];
        for j in (0..self.radices.len()).rev() {
            digits[j] = (i % self.radices[j] as usize) as u32;
            i /= self.radices[j] as usize;
        }
        digits
    }

    /// Densities of all patterns at every `M` of a nested grid.
    pub fn all_nested(&self, shifts: &[i64], m_grid: &[u64]) -> Result<Vec<Vec<PatternDensityResult<T>>>> {
        let offsets = self.offsets(shifts)?;
        if let Some(&top) = m_grid.last() {
            self.check(&offsets, 1, top)?;
        }
        let refs: Vec<&EvaluatedTable<T>> = self.tables.iter().collect();
        let correlator = Correlator::new(&refs);
        let power_avgs = correlator.nested_power_correlations(shifts, m_grid, &self.powers)?;
        let patterns = self.spec.patterns();
        let target = self.spec.target::<T>();
        let mut counts = vec![0u64; patterns.len()];
        let mut prev = 0u64;
        let mut out = Vec::with_capacity(m_grid.len());
        for (&m, avgs) in m_grid.iter().zip(&power_avgs) {
            let inc = self.counts(shifts, prev + 1, m)?;
            counts.iter_mut().zip(&inc).for_each(|(a, b)| *a += b);
            prev = m;
            let expansions = self.expand(avgs);
            out.push(
                patterns
                    .iter()
                    .zip(&counts)
                    .zip(expansions)
                    .map(|((p, &c), z)| PatternDensityResult {
                        pattern: p.clone(),
                        shifts: shifts.to_vec(),
                        m,
                        count: c,
                        density: T::of_u64(c) / T::of_u64(m),
                        expansion_density: z.re,
                        expansion_imag: z.im,
                        target,
                    })
                    .collect(),
            );
        }
        Ok(out)
    }

    /// Densities of all patterns at one `M`.
    pub fn all(&self, shifts: &[i64], m: u64) -> Result<Vec<PatternDensityResult<T>>> {
        if m == 0 {
            return Err(Error::Validation("densities need M >= 1".into()));
        }
        Ok(self.all_nested(shifts, &[m])?.remove(0))
    }

    /// Density of one pattern at one `M`.
    pub fn density(&self, pattern: &Pattern, shifts: &[i64], m: u64) -> Result<PatternDensityResult<T>> {
        let i = self.spec.index_of(pattern)?;
        Ok(self.all(shifts, m)?.swap_remove(i))
    }
}

fn all_vectors(radices: &[u32]) -> Vec<Vec<u32>> {
    let mut out = vec![Vec::new()];
    for &b in radices {
        out = out
            .into_iter()
            .flat_map(|v| {
                (0..b).map(move |d| {
                    let mut w = v.clone();
                    w.push(d);
                    w
                })
            })
            .collect();
    }
    out
}

fn run_query<T: Real>(query: &PatternQuery, block: &SievedBlock) -> Result<PatternDensityResult<T>> {
    if query.family.len() + 1 != query.spec.slots() {
        return Err(Error::Validation(format!(
            "a family of {} shifts needs {} slots",
            query.family.len(),
            query.family.len() + 1
        )));
    }
    let shifts = query.family.shifts(&query.point)?;
    PatternEngine::new(query.spec.clone(), block)?.density(&query.pattern, &shifts, query.m)
}

/// Density of `f_0(m) = ε_0, f_j(m + p_j(n)) = ε_j` for `m ≤ M`.
pub fn sign_pattern_density<T: Real>(query: &PatternQuery, block: &SievedBlock) -> Result<PatternDensityResult<T>> {
    if !matches!(query.spec, PatternSpec::Sign(_)) {
        return Err(Error::Validation("sign_pattern_density needs sign slots".into()));
    }
    run_query(query, block)
}

/// Density of `[counter_j(m + p_j(n))]_{b_j} = a_j` for `m ≤ M`.
pub fn residue_pattern_density<T: Real>(query: &PatternQuery, block: &SievedBlock) -> Result<PatternDensityResult<T>> {
    if !matches!(query.spec, PatternSpec::Residue(_)) {
        return Err(Error::Validation("residue_pattern_density needs residue slots".into()));
    }
    run_query(query, block)
}

/// Densities of one pattern over a box of shifts and a nested grid of `M`.
#[derive(Debug, Clone, PartialEq)]
pub struct PatternScan<T> {
    pub pattern: Pattern,
    pub m_grid: Vec<u64>,
    pub points: Vec<Vec<i64>>,
    /// `results[k][i]` at `M = m_grid[k]` for `points[i]`; `None` where the point failed.
    pub results: Vec<Vec<Option<PatternDensityResult<T>>>>,
    /// Points that failed, with the reason.
    pub errors: Vec<(Vec<i64>, String)>,
    /// `E_n |density(n) - target|` per `M` over the successful points.
    pub summary: Vec<Option<T>>,
}

pub fn pattern_scan<T: Real>(
    engine: &PatternEngine<'_, T>,
    pattern: &Pattern,
    family: &ShiftFamily,
    lattice: &LatticeBox,
    window: &EvaluationWindow,
    allow_override: bool,
) -> Result<PatternScan<T>> {
    if family.requires_override() && !allow_override {
        return Err(Error::DependentFamily);
    }
    if family.len() + 1 != engine.spec().slots() || lattice.arity() != family.arity() {
        return Err(Error::Validation("family, box and pattern slots do not match".into()));
    }
    let idx = engine.spec().index_of(pattern)?;
    let points: Vec<Vec<i64>> = lattice.points().collect();
    let per_point: Vec<Result<Vec<PatternDensityResult<T>>>> = points
        .par_iter()
        .map(|n| {
            let shifts = family.shifts(n)?;
            Ok(engine
                .all_nested(&shifts, window.m_grid())?
                .into_iter()
                .map(|mut v| v.swap_remove(idx))
                .collect())
        })
        .collect();
    let mut errors = Vec::new();
    let k = window.m_grid().len();
    let mut results: Vec<Vec<Option<PatternDensityResult<T>>>> = vec![Vec::with_capacity(points.len()); k];
    for (n, r) in points.iter().zip(per_point) {
        match r {
            Ok(v) => v.into_iter().enumerate().for_each(|(i, x)| results[i].push(Some(x))),
            Err(e) => {
                errors.push((n.clone(), e.to_string()));
                results.iter_mut().for_each(|row| row.push(None));
            }
        }
    }
    let summary = results
        .iter()
        .map(|row| {
            let dev: Vec<T> = row.iter().flatten().map(|r| (r.density - r.target).abs()).collect();
            (!dev.is_empty()).then(|| crate::sum::sum_slice(&dev) / T::of_u64(dev.len() as u64))
        })
        .collect();
    Ok(PatternScan {
        pattern: pattern.clone(),
        m_grid: window.m_grid().to_vec(),
        points,
        results,
        errors,
        summary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sieve::{build_block, primes_for};

    fn block(hi: u64) -> SievedBlock {
        build_block(1, hi, &primes_for(hi)).unwrap()
    }

    fn sign_query(functions: Vec<FunctionSpec>, eps: &str, family: &str, point: i64, m: u64) -> PatternQuery {
        PatternQuery {
            spec: PatternSpec::Sign(functions),
            pattern: Pattern::parse_signs(eps).unwrap(),
            family: ShiftFamily::parse(family).unwrap(),
            point: vec![point],
            m,
        }
    }

    #[test]
    fn single_slot_examples() {
        let b = block(1_000_100);
        let lam = PatternEngine::<f64>::new(PatternSpec::Sign(vec![FunctionSpec::Liouville]), &b).unwrap();
        let r = lam.density(&Pattern::Sign(vec![1]), &[], 1_000_000).unwrap();
        assert!((r.density - 0.5).abs() <= 0.01);
        assert!(r.agrees(1e-9));
        let one = PatternEngine::<f64>::new(PatternSpec::Sign(vec![FunctionSpec::One]), &b).unwrap();
        assert_eq!(one.density(&Pattern::Sign(vec![1]), &[], 1000).unwrap().density, 1.0);
        assert_eq!(one.density(&Pattern::Sign(vec![-1]), &[], 1000).unwrap().density, 0.0);

        let trivial = PatternSpec::Residue(vec![ResidueSlot {
            modulus: 1,
            counter: Counter::Omega,
        }]);
        let e = PatternEngine::<f64>::new(trivial, &b).unwrap();
        assert_eq!(e.density(&Pattern::Residue(vec![0]), &[], 5000).unwrap().density, 1.0);

        let parity = PatternSpec::Residue(vec![ResidueSlot {
            modulus: 2,
            counter: Counter::BigOmega,
        }]);
        let e = PatternEngine::<f64>::new(parity, &b).unwrap();
        let r2 = e.density(&Pattern::Residue(vec![0]), &[], 1_000_000).unwrap();
        assert_eq!(r2.count, r.count);
        assert!(r2.agrees(1e-9));
    }

    #[test]
    fn mobius_is_rejected_for_sign_mode() {
        let b = block(1000);
        let q = sign_query(vec![FunctionSpec::Liouville, FunctionSpec::Mobius], "++", "n", 1, 100);
        match sign_pattern_density::<f64>(&q, &b) {
            Err(Error::NotSignValued { n, .. }) => assert_eq!(n, 4),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn partition_and_agreement_with_shifts() {
        let b = block(200_000);
        let e = PatternEngine::<f64>::new(
            PatternSpec::Sign(vec![FunctionSpec::Liouville, FunctionSpec::Liouville, FunctionSpec::character(4, vec![1]).times(FunctionSpec::Liouville)]),
            &b,
        );
        // χ_4 λ vanishes at even n.
        let e = e.unwrap();
        assert!(e.all(&[3, 10], 1000).is_err());

        let e = PatternEngine::<f64>::new(PatternSpec::Sign(vec![FunctionSpec::Liouville; 3]), &b).unwrap();
        let all = e.all(&[10, 100], 100_000).unwrap();
        assert_eq!(all.iter().map(|r| r.count).sum::<u64>(), 100_000);
        assert!(all.iter().all(|r| r.agrees(1e-9)));
        assert_eq!(all.len(), 8);

        let spec = PatternSpec::Residue(vec![
            ResidueSlot { modulus: 2, counter: Counter::Omega },
            ResidueSlot { modulus: 3, counter: Counter::BigOmega },
            ResidueSlot { modulus: 4, counter: Counter::Omega },
        ]);
        let e = PatternEngine::<f64>::new(spec, &b).unwrap();
        let all = e.all(&[7, 4], 50_000).unwrap();
        assert_eq!(all.len(), 24);
        assert_eq!(all.iter().map(|r| r.count).sum::<u64>(), 50_000);
        for r in &all {
            assert!(r.agrees(1e-9), "{r:?}");
        }
        let far = e.all(&[7, -100_000], 50_000).unwrap();
        assert!(far.iter().all(|r| r.agrees(1e-9)));
        let a = Pattern::Residue(vec![1, 2, 0]);
        // m = 3 reaches the argument 0.
        assert!(e.density(&a, &[7, -3], 50_000).is_err());
        assert_eq!(e.all(&[7, -3], 2).unwrap().iter().map(|r| r.count).sum::<u64>(), 2);
        let e2 = e.all(&[7, 4], 50_000).unwrap();
        let want2 = (1..=50_000u64)
            .filter(|&m| b.omega(m) % 2 == 1 && b.big_omega(m + 7) % 3 == 2 && b.omega(m + 4).is_multiple_of(4))
            .count() as u64;
        assert_eq!(e2[e.spec().index_of(&a).unwrap()].count, want2);
    }

    #[test]
    fn nested_matches_single() {
        let b = block(100_000);
        let e = PatternEngine::<f64>::new(PatternSpec::Sign(vec![FunctionSpec::Liouville; 2]), &b).unwrap();
        let nested = e.all_nested(&[5], &[100, 10_000, 90_000]).unwrap();
        let single = e.all(&[5], 10_000).unwrap();
        for (x, y) in nested[1].iter().zip(&single) {
            assert_eq!(x.count, y.count);
            assert!((x.expansion_density - y.expansion_density).abs() < 1e-12);
        }
    }

    #[test]
    fn scan_examples() {
        let b = block(50_000);
        let e = PatternEngine::<f64>::new(PatternSpec::Sign(vec![FunctionSpec::One; 3]), &b).unwrap();
        let fam = ShiftFamily::parse("n,n^2").unwrap();
        let lattice = LatticeBox::parse("1:20").unwrap();
        let window = EvaluationWindow::parse("100,1000").unwrap();
        let s = pattern_scan(&e, &Pattern::parse_signs("+++").unwrap(), &fam, &lattice, &window, false).unwrap();
        assert!(s.results.iter().flatten().all(|r| r.as_ref().unwrap().density == 1.0));
        assert_eq!(s.summary, vec![Some(0.875), Some(0.875)]);

        let e = PatternEngine::<f64>::new(PatternSpec::Sign(vec![FunctionSpec::Liouville; 3]), &b).unwrap();
        let p = Pattern::parse_signs("+-+").unwrap();
        let s = pattern_scan(&e, &p, &fam, &LatticeBox::parse("4:4").unwrap(), &window, false).unwrap();
        let single = e.density(&p, &[4, 16], 1000).unwrap();
        assert_eq!(s.results[1][0].as_ref().unwrap(), &single);

        // Points whose shifts leave the block are reported, not fatal.
        let s = pattern_scan(&e, &p, &fam, &LatticeBox::parse("200:240").unwrap(), &window, false).unwrap();
        assert!(!s.errors.is_empty());
        assert!(s.summary[0].is_some());
    }

    #[test]
    fn pattern_parsing() {
        assert_eq!(Pattern::parse_signs("+-").unwrap(), Pattern::Sign(vec![1, -1]));
        assert!(Pattern::parse_signs("+x").is_err());
        assert_eq!(Pattern::parse_residues("1, 0,2").unwrap().to_string(), "1,0,2");
        let spec = PatternSpec::Residue(vec![ResidueSlot { modulus: 3, counter: Counter::Omega }]);
        assert!(spec.index_of(&Pattern::Residue(vec![3])).is_err());
        assert!(spec.index_of(&Pattern::Sign(vec![1])).is_err());
    }
}
