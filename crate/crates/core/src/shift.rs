//! Shift families: integer polynomials in several variables and integer parts
//! of fractional powers, plus the lattice boxes they are averaged over.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use astro_float::{BigFloat, Consts, RoundingMode};
use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A polynomial `ℕ^r → ℤ` with integer coefficients.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct IntPolynomial {
    arity: usize,
    terms: BTreeMap<Vec<u32>, i64>,
}

impl IntPolynomial {
    pub fn zero(arity: usize) -> Self {
        Self {
            arity,
            terms: BTreeMap::new(),
        }
    }

    /// Build from `(exponents, coefficient)` pairs; like monomials are merged.
    pub fn from_terms(arity: usize, terms: impl IntoIterator<Item = (Vec<u32>, i64)>) -> Result<Self> {
        let mut p = Self::zero(arity);
        for (exps, c) in terms {
            p.add_term(exps, c)?;
        }
        Ok(p)
    }

    /// `n_{var+1}^k` in `arity` variables.
    pub fn variable_power(arity: usize, var: usize, k: u32) -> Self {
        let mut exps = vec![0; arity];
        exps[var] = k;
        Self::from_terms(arity, [(exps, 1)]).expect("valid monomial")
    }

    pub fn add_term(&mut self, exps: Vec<u32>, coefficient: i64) -> Result<()> {
        if exps.len() != self.arity {
            return Err(Error::InvalidFamily(format!(
                "monomial {exps:?} has {} exponents, polynomial arity is {}",
                exps.len(),
                self.arity
            )));
        }
        let entry = self.terms.entry(exps.clone()).or_insert(0);
        *entry = entry.checked_add(coefficient).ok_or_else(|| Error::Overflow {
            term: format!("coefficient of {}", Monomial(&exps, 1)),
        })?;
        if *entry == 0 {
            self.terms.remove(&exps);
        }
        Ok(())
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    /// Non-zero terms, keyed by exponent vector.
    pub fn terms(&self) -> &BTreeMap<Vec<u32>, i64> {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Same polynomial in more variables.
    pub fn with_arity(&self, arity: usize) -> Result<Self> {
        if arity < self.arity
            && self.terms.keys().any(|e| e[arity..].iter().any(|&k| k > 0)) {
                return Err(Error::InvalidFamily(format!("{self} uses more than {arity} variables")));
            }
        let terms = self
            .terms
            .iter()
            .map(|(e, &c)| {
                let mut e = e.clone();
                e.resize(arity, 0);
                (e, c)
            })
            .collect();
        Ok(Self { arity, terms })
    }

    /// Multiply by an integer.
    pub fn scaled(&self, k: i64) -> Result<Self> {
        let mut out = Self::zero(self.arity);
        for (e, &c) in &self.terms {
            let c = c.checked_mul(k).ok_or_else(|| Error::Overflow {
                term: Monomial(e, c).to_string(),
            })?;
            out.add_term(e.clone(), c)?;
        }
        Ok(out)
    }

    /// Exact value at `n`.
    pub fn eval(&self, n: &[i64]) -> Result<i64> {
        if n.len() != self.arity {
            return Err(Error::InvalidFamily(format!(
                "point of length {} for a polynomial of arity {}",
                n.len(),
                self.arity
            )));
        }
        let mut total: i128 = 0;
        for (exps, &c) in &self.terms {
            let overflow = || Error::Overflow {
                term: Monomial(exps, c).to_string(),
            };
            let mut v = c as i128;
            for (&x, &k) in n.iter().zip(exps) {
                v = v.checked_mul((x as i128).checked_pow(k).ok_or_else(overflow)?).ok_or_else(overflow)?;
            }
            if i64::try_from(v).is_err() {
                return Err(overflow());
            }
            total += v;
        }
        i64::try_from(total).map_err(|_| Error::Overflow { term: self.to_string() })
    }

    /// Exact value at `n` with unbounded integers.
    pub fn eval_big(&self, n: &[i64]) -> BigInt {
        self.terms
            .iter()
            .map(|(exps, &c)| {
                n.iter()
                    .zip(exps)
                    .fold(BigInt::from(c), |acc, (&x, &k)| acc * BigInt::from(x).pow(k))
            })
            .sum()
    }

    /// Parse `"3*n1^2*n2 - n2 + 7"`. `n` stands for `n1`. The arity is the
    /// largest variable index used, at least `min_arity`.
    pub fn parse(s: &str, min_arity: usize) -> Result<Self> {
        let raw = parse_terms(s)?;
        let arity = raw
            .iter()
            .flat_map(|(e, _)| e.keys().copied())
            .max()
            .unwrap_or(0)
            .max(min_arity)
            .max(1);
        let mut p = Self::zero(arity);
        for (vars, c) in raw {
            let mut exps = vec![0u32; arity];
            for (v, k) in vars {
                exps[v - 1] += k;
            }
            p.add_term(exps, c)?;
        }
        Ok(p)
    }
}

type RawTerm = (BTreeMap<usize, u32>, i64);

fn parse_terms(s: &str) -> Result<Vec<RawTerm>> {
    let bad = |msg: &str| Error::Parse(format!("polynomial {s:?}: {msg}"));
    let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    if compact.is_empty() {
        return Err(bad("empty"));
    }
    let mut pieces = Vec::new();
    let mut start = 0;
    for (i, ch) in compact.char_indices() {
        if (ch == '+' || ch == '-') && i > 0 && !compact[..i].ends_with('^') {
            pieces.push(&compact[start..i]);
            start = i;
        }
    }
    pieces.push(&compact[start..]);
    let mut out = Vec::new();
    for piece in pieces {
        let (sign, body) = match piece.as_bytes()[0] {
            b'-' => (-1i64, &piece[1..]),
            b'+' => (1, &piece[1..]),
            _ => (1, piece),
        };
        if body.is_empty() {
            return Err(bad("dangling sign"));
        }
        let mut coefficient = sign;
        let mut vars = BTreeMap::new();
        for factor in body.split('*') {
            if factor.is_empty() {
                return Err(bad("empty factor"));
            }
            if let Some(rest) = factor.strip_prefix('n') {
                let (idx, exp) = match rest.split_once('^') {
                    Some((i, e)) => (i, e.parse::<u32>().map_err(|_| bad("bad exponent"))?),
                    None => (rest, 1),
                };
                let idx = if idx.is_empty() {
                    1
                } else {
                    idx.parse::<usize>().map_err(|_| bad("bad variable index"))?
                };
                if idx == 0 {
                    return Err(bad("variables are numbered from n1"));
                }
                *vars.entry(idx).or_insert(0) += exp;
            } else {
                let (base, exp) = match factor.split_once('^') {
                    Some((b, e)) => (b, e.parse::<u32>().map_err(|_| bad("bad exponent"))?),
                    None => (factor, 1),
                };
                let c: i64 = base.parse().map_err(|_| bad(&format!("unexpected factor {factor:?}")))?;
                let c = c.checked_pow(exp).ok_or_else(|| bad("coefficient overflow"))?;
                coefficient = coefficient.checked_mul(c).ok_or_else(|| bad("coefficient overflow"))?;
            }
        }
        out.push((vars, coefficient));
    }
    Ok(out)
}

struct Monomial<'a>(&'a [u32], i64);

impl fmt::Display for Monomial<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let Monomial(exps, c) = *self;
        let vars: Vec<String> = exps
            .iter()
            .enumerate()
            .filter(|(_, &k)| k > 0)
            .map(|(i, &k)| if k == 1 { format!("n{}", i + 1) } else { format!("n{}^{k}", i + 1) })
            .collect();
        match (c, vars.is_empty()) {
            (_, true) => write!(f, "{c}"),
            (1, false) => write!(f, "{}", vars.join("*")),
            (-1, false) => write!(f, "-{}", vars.join("*")),
            _ => write!(f, "{c}*{}", vars.join("*")),
        }
    }
}

impl fmt::Display for IntPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        // Highest total degree first.
        let mut terms: Vec<_> = self.terms.iter().collect();
        terms.sort_by_key(|(e, _)| std::cmp::Reverse(e.iter().sum::<u32>()));
        for (i, (e, &c)) in terms.into_iter().enumerate() {
            let s = Monomial(e, c).to_string();
            match (i, s.strip_prefix('-')) {
                (0, _) => f.write_str(&s)?,
                (_, Some(rest)) => write!(f, " - {rest}")?,
                (_, None) => write!(f, " + {s}")?,
            }
        }
        Ok(())
    }
}

impl FromStr for IntPolynomial {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::parse(s, 1)
    }
}

/// Outcome of the independence test for `{1, p_1, …, p_ℓ}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Independence {
    Certified,
    /// `w_0·1 + Σ w_j p_j = 0`, with coprime entries and the first non-zero
    /// entry positive.
    Dependent(Vec<BigInt>),
    NotApplicable,
}

impl Independence {
    pub fn is_certified(&self) -> bool {
        matches!(self, Independence::Certified)
    }

    pub fn label(&self) -> &'static str {
        match self {
            Independence::Certified => "certified",
            Independence::Dependent(_) => "dependent",
            Independence::NotApplicable => "not-applicable",
        }
    }
}

/// Decide linear independence of `{1, p_1, …, p_ℓ}` over ℚ exactly.
///
/// Rows are the coefficient vectors in the monomial basis, augmented with an
/// identity block. Fraction-free elimination (each row divided by its content)
/// turns a dependent row into zero on the left; its right half is the witness.
pub fn check_independence(polys: &[IntPolynomial]) -> Result<Independence> {
    let arity = polys.first().map_or(1, |p| p.arity());
    if polys.iter().any(|p| p.arity() != arity) {
        return Err(Error::InvalidFamily("polynomials must share one arity".into()));
    }
    let one = IntPolynomial::from_terms(arity, [(vec![0; arity], 1)])?;
    let rows_src: Vec<&IntPolynomial> = std::iter::once(&one).chain(polys).collect();
    let mut basis: Vec<&Vec<u32>> = rows_src.iter().flat_map(|p| p.terms.keys()).collect();
    basis.sort();
    basis.dedup();
    let width = basis.len();
    let k = rows_src.len();
    let mut rows: Vec<Vec<BigInt>> = rows_src
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let mut r = vec![BigInt::zero(); width + k];
            for (e, &c) in &p.terms {
                let col = basis.binary_search(&e).expect("monomial in basis");
                r[col] = BigInt::from(c);
            }
            r[width + i] = BigInt::one();
            r
        })
        .collect();

    let mut pivot_row = 0;
    for col in 0..width {
        let Some(found) = (pivot_row..k).find(|&r| !rows[r][col].is_zero()) else {
            continue;
        };
        rows.swap(pivot_row, found);
        let pivot = rows[pivot_row].clone();
        for row in rows[pivot_row + 1..k].iter_mut() {
            if row[col].is_zero() {
                continue;
            }
            let a = row[col].clone();
            for j in 0..row.len() {
                row[j] = &pivot[col] * &row[j] - &a * &pivot[j];
            }
            remove_content(row);
        }
        pivot_row += 1;
    }
    // Rows past the last pivot are zero on the left.
    if pivot_row == k {
        return Ok(Independence::Certified);
    }
    let mut w: Vec<BigInt> = rows[pivot_row][width..].to_vec();
    remove_content(&mut w);
    if w.iter().find(|x| !x.is_zero()).is_some_and(|x| x.is_negative()) {
        w.iter_mut().for_each(|x| *x = -x.clone());
    }
    Ok(Independence::Dependent(w))
}

fn remove_content(row: &mut [BigInt]) {
    let g = row.iter().fold(BigInt::zero(), |g, x| g.gcd(x));
    if !g.is_zero() && !g.is_one() {
        row.iter_mut().for_each(|x| *x = &*x / &g);
    }
}

/// `⌊n^c⌋`, exact.
///
/// The double-precision value is trusted unless it lies within `1e-9` (or a few
/// ulps) of an integer. In that case an exact rational test decides whether
/// `n^c` is an integer, and otherwise the power is recomputed with 256-bit
/// floats.
pub fn fractional_shift(c: f64, n: u64) -> Result<u64> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::InvalidFamily(format!("fractional exponent {c} must be positive")));
    }
    if n == 0 {
        return Err(Error::InvalidFamily("fractional shifts need n >= 1".into()));
    }
    let x = (n as f64).powf(c);
    if !x.is_finite() || x >= 1.8e19 {
        return Err(Error::Overflow {
            term: format!("{n}^{c}"),
        });
    }
    let nearest = x.round();
    let guard = 1e-9f64.max(8.0 * f64::EPSILON * x);
    if (x - nearest).abs() > guard {
        return Ok(x.floor() as u64);
    }
    if let Some(v) = exact_integer_power(c, n) {
        return v.to_u64().ok_or_else(|| Error::Overflow {
            term: format!("{n}^{c}"),
        });
    }
    Ok(extended_floor(c, n, nearest))
}

/// `n^c` when it is an integer and `c` has a small dyadic denominator.
fn exact_integer_power(c: f64, n: u64) -> Option<BigUint> {
    let (num, den) = dyadic(c)?;
    if den > 64 || num > 4096 {
        return None;
    }
    let root = BigUint::from(n).nth_root(den as u32);
    (root.pow(den as u32) == BigUint::from(n)).then(|| root.pow(num as u32))
}

/// `c = num / den` with `den` a power of two, in lowest terms.
fn dyadic(c: f64) -> Option<(u64, u64)> {
    let mut den = 1u64;
    let mut x = c;
    while x.fract() != 0.0 {
        if den >= 1 << 20 {
            return None;
        }
        x *= 2.0;
        den *= 2;
    }
    Some((x as u64, den))
}

fn extended_floor(c: f64, n: u64, estimate: f64) -> u64 {
    const P: usize = 256;
    let rm = RoundingMode::ToEven;
    let mut cc = Consts::new().expect("constant cache");
    let value = BigFloat::from_u64(n, P).pow(&BigFloat::from_f64(c, P), P, rm, &mut cc);
    let mut k = (estimate as u64).saturating_sub(2);
    while BigFloat::from_u64(k + 1, P) <= value {
        k += 1;
    }
    while k > 0 && BigFloat::from_u64(k, P) > value {
        k -= 1;
    }
    k
}

/// Which shifts accompany `f_1, …, f_ℓ`.
#[derive(Debug, Clone, PartialEq)]
pub enum FamilyKind {
    Polynomial(Vec<IntPolynomial>),
    /// `⌊n^{c_j}⌋`, one variable.
    Fractional(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShiftFamily {
    kind: FamilyKind,
    independence: Independence,
    exploratory: bool,
}

impl ShiftFamily {
    /// Polynomials are padded to a common arity and certified. An empty list
    /// is the `ℓ = 0` family (no shifts, arity 1).
    pub fn polynomial(polys: Vec<IntPolynomial>) -> Result<Self> {
        if polys.is_empty() {
            return Ok(Self {
                kind: FamilyKind::Polynomial(Vec::new()),
                independence: Independence::Certified,
                exploratory: false,
            });
        }
        let arity = polys.iter().map(IntPolynomial::arity).max().unwrap_or(1);
        let polys = polys.iter().map(|p| p.with_arity(arity)).collect::<Result<Vec<_>>>()?;
        let independence = check_independence(&polys)?;
        Ok(Self {
            kind: FamilyKind::Polynomial(polys),
            independence,
            exploratory: false,
        })
    }

    /// Exponents must be positive, pairwise distinct and not integers.
    pub fn fractional(exponents: Vec<f64>) -> Result<Self> {
        Self::fractional_checked(exponents, false)
    }

    /// Like [`fractional`](Self::fractional) but integer exponents are accepted
    /// and mark the family as exploratory.
    pub fn fractional_exploratory(exponents: Vec<f64>) -> Result<Self> {
        Self::fractional_checked(exponents, true)
    }

    fn fractional_checked(exponents: Vec<f64>, allow_integer: bool) -> Result<Self> {
        if exponents.is_empty() {
            return Err(Error::InvalidFamily("a family needs at least one shift".into()));
        }
        for (i, &c) in exponents.iter().enumerate() {
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::InvalidFamily(format!("exponent {c} must be positive")));
            }
            if exponents[..i].contains(&c) {
                return Err(Error::InvalidFamily(format!("exponent {c} repeated")));
            }
            if c.fract() == 0.0 && !allow_integer {
                return Err(Error::InvalidFamily(format!(
                    "exponent {c} is an integer; integer exponents are exploratory only"
                )));
            }
        }
        let exploratory = exponents.iter().any(|c| c.fract() == 0.0);
        Ok(Self {
            kind: FamilyKind::Fractional(exponents),
            independence: Independence::NotApplicable,
            exploratory,
        })
    }

    /// Parse `"n,n^2"` (polynomials, comma separated) or `{"frac":[1.5,2.5]}`.
    pub fn parse(s: &str) -> Result<Self> {
        let t = s.trim();
        if t.starts_with('{') {
            #[derive(Deserialize)]
            #[serde(deny_unknown_fields)]
            struct Frac {
                frac: Vec<f64>,
                #[serde(default)]
                exploratory: bool,
            }
            let f: Frac = serde_json::from_str(t).map_err(|e| Error::Parse(format!("family {t:?}: {e}")))?;
            return if f.exploratory {
                Self::fractional_exploratory(f.frac)
            } else {
                Self::fractional(f.frac)
            };
        }
        if t.is_empty() {
            return Self::polynomial(Vec::new());
        }
        let polys = t.split(',').map(|p| IntPolynomial::parse(p, 1)).collect::<Result<Vec<_>>>()?;
        Self::polynomial(polys)
    }

    pub fn kind(&self) -> &FamilyKind {
        &self.kind
    }

    pub fn independence(&self) -> &Independence {
        &self.independence
    }

    /// True for dependent polynomial families and integer-exponent families.
    pub fn requires_override(&self) -> bool {
        self.exploratory || matches!(self.independence, Independence::Dependent(_))
    }

    /// Number of shifts `ℓ`.
    pub fn len(&self) -> usize {
        match &self.kind {
            FamilyKind::Polynomial(p) => p.len(),
            FamilyKind::Fractional(c) => c.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of variables `r`.
    pub fn arity(&self) -> usize {
        match &self.kind {
            FamilyKind::Polynomial(p) => p.first().map_or(1, IntPolynomial::arity),
            FamilyKind::Fractional(_) => 1,
        }
    }

    /// The shift vector `(s_1, …, s_ℓ)` at a lattice point.
    pub fn shifts(&self, n: &[i64]) -> Result<Vec<i64>> {
        match &self.kind {
            FamilyKind::Polynomial(p) => p.iter().map(|q| q.eval(n)).collect(),
            FamilyKind::Fractional(c) => {
                let [x] = n else {
                    return Err(Error::InvalidFamily("fractional families take one variable".into()));
                };
                let x = u64::try_from(*x)
                    .ok()
                    .filter(|&x| x >= 1)
                    .ok_or_else(|| Error::InvalidFamily("fractional shifts need n >= 1".into()))?;
                c.iter()
                    .map(|&c| {
                        let v = fractional_shift(c, x)?;
                        i64::try_from(v).map_err(|_| Error::Overflow {
                            term: format!("{x}^{c}"),
                        })
                    })
                    .collect()
            }
        }
    }
}

impl fmt::Display for ShiftFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            FamilyKind::Polynomial(p) => {
                let parts: Vec<String> = p.iter().map(|q| q.to_string().replace(' ', "")).collect();
                f.write_str(&parts.join(","))
            }
            FamilyKind::Fractional(c) => {
                if self.exploratory {
                    write!(f, "{}", serde_json::json!({ "frac": c, "exploratory": true }))
                } else {
                    write!(f, "{}", serde_json::json!({ "frac": c }))
                }
            }
        }
    }
}

/// A box `∏ [lo_i, hi_i]` in `ℕ^r`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticeBox {
    lo: Vec<i64>,
    hi: Vec<i64>,
}

impl LatticeBox {
    pub fn new(lo: Vec<i64>, hi: Vec<i64>) -> Result<Self> {
        if lo.is_empty() || lo.len() != hi.len() {
            return Err(Error::Validation("box needs matching, non-empty bounds".into()));
        }
        for (a, b) in lo.iter().zip(&hi) {
            if *a < 1 || b < a {
                return Err(Error::Validation(format!("box side [{a}, {b}] must satisfy 1 <= lo <= hi")));
            }
        }
        Ok(Self { lo, hi })
    }

    /// Parse `"1:200"` or `"1:10,1:20"`.
    pub fn parse(s: &str) -> Result<Self> {
        let mut lo = Vec::new();
        let mut hi = Vec::new();
        for side in s.split(',') {
            let (a, b) = side
                .trim()
                .split_once(':')
                .ok_or_else(|| Error::Parse(format!("box side {side:?} is not lo:hi")))?;
            let parse = |x: &str| x.trim().parse::<i64>().map_err(|_| Error::Parse(format!("box bound {x:?}")));
            lo.push(parse(a)?);
            hi.push(parse(b)?);
        }
        Self::new(lo, hi)
    }

    pub fn arity(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[i64] {
        &self.lo
    }

    pub fn hi(&self) -> &[i64] {
        &self.hi
    }

    pub fn len(&self) -> u64 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| (b - a + 1) as u64).product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Every lattice point once, last coordinate varying fastest.
    pub fn points(&self) -> BoxPoints<'_> {
        BoxPoints {
            bx: self,
            next: Some(self.lo.clone()),
        }
    }
}

impl fmt::Display for LatticeBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sides: Vec<String> = self.lo.iter().zip(&self.hi).map(|(a, b)| format!("{a}:{b}")).collect();
        f.write_str(&sides.join(","))
    }
}

/// Iterator returned by [`LatticeBox::points`].
pub struct BoxPoints<'a> {
    bx: &'a LatticeBox,
    next: Option<Vec<i64>>,
}

impl Iterator for BoxPoints<'_> {
    type Item = Vec<i64>;

    fn next(&mut self) -> Option<Vec<i64>> {
        let current = self.next.take()?;
        let mut succ = current.clone();
        for i in (0..succ.len()).rev() {
            if succ[i] < self.bx.hi[i] {
                succ[i] += 1;
                self.next = Some(succ);
                break;
            }
            succ[i] = self.bx.lo[i];
        }
        Some(current)
    }
}
