use num_complex::Complex;
use num_integer::Integer;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{Compiled, FunctionSpec, Node, ZERO};
use crate::error::{Error, Result};
use crate::scalar::{roots_of_unity, Real};
use crate::sieve::{isqrt, SievedBlock};

/// Root-of-unity values stored exactly: `f(n) = e(exps[i] / order)`, or 0
/// where `exps[i] == ZERO`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExactForm {
    order: u32,
    exps: Vec<u16>,
}

impl ExactForm {
    pub fn new(order: u32, exps: Vec<u16>) -> Self {
        debug_assert!(exps.iter().all(|&e| e == ZERO || (e as u32) < order.max(1)));
        Self { order: order.max(1), exps }
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn exponents(&self) -> &[u16] {
        &self.exps
    }

    pub fn has_zeros(&self) -> bool {
        self.exps.contains(&ZERO)
    }
}

#[derive(Debug, Clone)]
enum Data<T> {
    Exact(ExactForm),
    Complex(Vec<Complex<T>>),
}

/// Values of a function on `[lo, hi)`.
#[derive(Debug, Clone)]
pub struct EvaluatedTable<T> {
    spec: Option<FunctionSpec>,
    lo: u64,
    hi: u64,
    data: Data<T>,
    roots: Vec<Complex<T>>,
}

impl<T: Real> EvaluatedTable<T> {
    /// A table holding an arbitrary bounded sequence (no multiplicative spec).
    pub fn from_sequence(lo: u64, values: Vec<Complex<T>>) -> Self {
        let hi = lo + values.len() as u64;
        Self {
            spec: None,
            lo,
            hi,
            data: Data::Complex(values),
            roots: Vec::new(),
        }
    }

    /// A table holding an arbitrary sequence in exact root-of-unity form.
    pub fn from_exact(lo: u64, exact: ExactForm) -> Self {
        let hi = lo + exact.exps.len() as u64;
        let roots = roots_of_unity(exact.order);
        Self {
            spec: None,
            lo,
            hi,
            data: Data::Exact(exact),
            roots,
        }
    }

    pub fn spec(&self) -> Option<&FunctionSpec> {
        self.spec.as_ref()
    }

    /// Human-readable label for reports.
    pub fn label(&self) -> String {
        self.spec.as_ref().map_or_else(|| "sequence".to_string(), |s| s.to_string())
    }

    pub fn lo(&self) -> u64 {
        self.lo
    }

    pub fn hi(&self) -> u64 {
        self.hi
    }

    pub fn exact(&self) -> Option<&ExactForm> {
        match &self.data {
            Data::Exact(x) => Some(x),
            Data::Complex(_) => None,
        }
    }

    /// `e(k/order)` for `k < order` when the table is exact.
    pub fn roots(&self) -> &[Complex<T>] {
        &self.roots
    }

    /// Value at a positive `n` inside the table.
    #[inline]
    pub fn value(&self, n: u64) -> Complex<T> {
        debug_assert!(n >= self.lo && n < self.hi, "{n} outside [{}, {})", self.lo, self.hi);
        let i = (n - self.lo) as usize;
        match &self.data {
            Data::Exact(x) => match x.exps[i] {
                ZERO => Complex::new(T::zero(), T::zero()),
                k => self.roots[k as usize],
            },
            Data::Complex(v) => v[i],
        }
    }

    /// Value at any integer, via `f(-n) = f(n)` and `f(0) = 0`.
    #[inline]
    pub fn at(&self, n: i64) -> Complex<T> {
        if n == 0 {
            Complex::new(T::zero(), T::zero())
        } else {
            self.value(n.unsigned_abs())
        }
    }

    /// Exponent at any integer (exact tables only), [`ZERO`] at 0.
    #[inline]
    pub fn exponent_at(&self, n: i64) -> u16 {
        match &self.data {
            Data::Exact(x) if n != 0 => x.exps[(n.unsigned_abs() - self.lo) as usize],
            Data::Exact(_) => ZERO,
            Data::Complex(_) => panic!("exponent_at on a non-exact table"),
        }
    }

    /// Ensure `|n|` lies in the table for every `n` in `[need_lo, need_hi]`
    /// other than 0.
    pub fn require(&self, need_lo: i64, need_hi: i64) -> Result<()> {
        let (lo_abs, hi_abs) = abs_range(need_lo, need_hi);
        match (lo_abs, hi_abs) {
            (_, 0) => Ok(()),
            (a, b) if a >= self.lo && b < self.hi => Ok(()),
            (a, b) => Err(Error::Coverage {
                need_lo: a,
                need_hi: b,
                lo: self.lo,
                hi: self.hi,
            }),
        }
    }

    /// All values as complex numbers.
    pub fn values(&self) -> Vec<Complex<T>> {
        match &self.data {
            Data::Complex(v) => v.clone(),
            Data::Exact(_) => (self.lo..self.hi).map(|n| self.value(n)).collect(),
        }
    }

    /// Whether `f(n) ∈ {-1, +1}`; exact for both storage kinds.
    #[inline]
    pub fn sign_at(&self, n: i64) -> Option<i8> {
        match &self.data {
            Data::Exact(x) => {
                let k = self.exponent_at(n);
                if k == ZERO {
                    None
                } else if k == 0 {
                    Some(1)
                } else if 2 * k as u32 == x.order {
                    Some(-1)
                } else {
                    None
                }
            }
            Data::Complex(_) => {
                let z = self.at(n);
                if z.im != T::zero() {
                    None
                } else if z.re == T::one() {
                    Some(1)
                } else if z.re == -T::one() {
                    Some(-1)
                } else {
                    None
                }
            }
        }
    }

    /// Pointwise conjugate.
    pub fn conjugate(&self) -> Self {
        let spec = self.spec.clone().map(FunctionSpec::conjugate);
        let data = match &self.data {
            Data::Exact(x) => Data::Exact(ExactForm {
                order: x.order,
                exps: x
                    .exps
                    .iter()
                    .map(|&e| if e == ZERO { ZERO } else { ((x.order - e as u32) % x.order) as u16 })
                    .collect(),
            }),
            Data::Complex(v) => Data::Complex(v.iter().map(|z| z.conj()).collect()),
        };
        Self {
            spec,
            lo: self.lo,
            hi: self.hi,
            data,
            roots: self.roots.clone(),
        }
    }
}

/// `(min |n|, max |n|)` over the nonzero integers of `[a, b]`; `(0, 0)` if none.
pub(crate) fn abs_range(a: i64, b: i64) -> (u64, u64) {
    if a > b || (a == 0 && b == 0) {
        return (0, 0);
    }
    let hi = a.unsigned_abs().max(b.unsigned_abs());
    let lo = if a <= 0 && b >= 0 {
        1
    } else {
        a.unsigned_abs().min(b.unsigned_abs())
    };
    (lo, hi)
}

/// Evaluate `spec` on every integer of the block.
pub fn evaluate<T: Real>(spec: &FunctionSpec, block: &SievedBlock) -> Result<EvaluatedTable<T>> {
    let compiled = spec.compile()?;
    evaluate_compiled(&compiled, block)
}

pub(crate) fn evaluate_compiled<T: Real>(compiled: &Compiled, block: &SievedBlock) -> Result<EvaluatedTable<T>> {
    let (data, roots) = match compiled.exact_order() {
        Some(l) => (
            Data::Exact(ExactForm::new(l, eval_exact(compiled.node(), block, l))),
            roots_of_unity(l),
        ),
        None => (Data::Complex(eval_complex(compiled.node(), block)?), Vec::new()),
    };
    Ok(EvaluatedTable {
        spec: Some(compiled.spec().clone()),
        lo: block.lo(),
        hi: block.hi(),
        data,
        roots,
    })
}

fn eval_exact(node: &Node, block: &SievedBlock, l: u32) -> Vec<u16> {
    let half = (l / 2) as u16;
    match node {
        Node::One => vec![0; block.len()],
        Node::Liouville => block.lambda_slice().par_iter().map(|&x| if x == 1 { 0 } else { half }).collect(),
        Node::Mobius => block
            .mu_slice()
            .par_iter()
            .map(|&x| match x {
                0 => ZERO,
                1 => 0,
                _ => half,
            })
            .collect(),
        Node::Character(c) => {
            let scale = (l / c.order()) as u16;
            let lo = block.lo();
            (0..block.len())
                .into_par_iter()
                .map(|i| match c.exponent(lo + i as u64) {
                    ZERO => ZERO,
                    e => e * scale,
                })
                .collect()
        }
        Node::RootOfUnity(b) => {
            let (b, scale) = (*b as u16, (l / b) as u16);
            block.omega_slice().par_iter().map(|&w| (w as u16 % b) * scale).collect()
        }
        Node::CompleteRootOfUnity(b) => {
            let (b, scale) = (*b as u16, (l / b) as u16);
            block.big_omega_slice().par_iter().map(|&w| (w as u16 % b) * scale).collect()
        }
        Node::Product(items) => {
            let mut acc = vec![0u16; block.len()];
            for item in items {
                let sub = eval_exact(item, block, l);
                acc.par_iter_mut().zip(sub.par_iter()).for_each(|(a, &s)| {
                    *a = if *a == ZERO || s == ZERO {
                        ZERO
                    } else {
                        ((*a as u32 + s as u32) % l) as u16
                    };
                });
            }
            acc
        }
        Node::Power(inner, r) => {
            let r = *r as u64;
            eval_exact(inner, block, l)
                .into_par_iter()
                .map(|e| if e == ZERO { ZERO } else { ((e as u64 * r) % l as u64) as u16 })
                .collect()
        }
        Node::Conjugate(inner) => eval_exact(inner, block, l)
            .into_par_iter()
            .map(|e| if e == ZERO { ZERO } else { ((l - e as u32) % l) as u16 })
            .collect(),
        Node::Archimedean(_) | Node::Table(_) => unreachable!("non-exact node in exact evaluation"),
    }
}

fn eval_complex<T: Real>(node: &Node, block: &SievedBlock) -> Result<Vec<Complex<T>>> {
    if let Some(l) = super::exact_order(node) {
        let roots = roots_of_unity::<T>(l);
        return Ok(eval_exact(node, block, l)
            .into_par_iter()
            .map(|e| if e == ZERO { Complex::new(T::zero(), T::zero()) } else { roots[e as usize] })
            .collect());
    }
    Ok(match node {
        Node::Archimedean(t) => {
            let t = *t;
            let lo = block.lo();
            (0..block.len())
                .into_par_iter()
                .map(|i| {
                    let theta = t * ((lo + i as u64) as f64).ln();
                    Complex::new(T::of(theta.cos()), T::of(theta.sin()))
                })
                .collect()
        }
        Node::Table(_) => prime_power_pass(node, block)?,
        Node::Product(items) => {
            let mut acc = vec![Complex::new(T::one(), T::zero()); block.len()];
            for item in items {
                let sub = eval_complex::<T>(item, block)?;
                acc.par_iter_mut().zip(sub.par_iter()).for_each(|(a, s)| *a *= s);
            }
            acc
        }
        Node::Power(inner, r) => eval_complex::<T>(inner, block)?
            .into_par_iter()
            .map(|z| z.powu(*r))
            .collect(),
        Node::Conjugate(inner) => eval_complex::<T>(inner, block)?
            .into_par_iter()
            .map(|z| z.conj())
            .collect(),
        _ => unreachable!("exact nodes handled above"),
    })
}

/// `f(n) = ∏_{p^k ∥ n} f(p^k)` by striking multiples of each prime.
fn prime_power_pass<T: Real>(node: &Node, block: &SievedBlock) -> Result<Vec<Complex<T>>> {
    let (lo, hi) = (block.lo(), block.hi());
    let required = isqrt(hi - 1);
    if block.primes().limit() < required {
        return Err(Error::InsufficientPrimes {
            required,
            available: block.primes().limit(),
        });
    }
    let len = block.len();
    let mut values = vec![Complex::new(T::one(), T::zero()); len];
    let mut found = vec![1u64; len];
    for &p in block.primes().up_to_prefix(required) {
        let start = (lo.div_ceil(p) * p - lo) as usize;
        for i in (start..len).step_by(p as usize) {
            let mut m = lo + i as u64;
            let mut k = 0u32;
            let mut pk = 1u64;
            while m.is_multiple_of(p) {
                m /= p;
                k += 1;
                pk *= p;
            }
            let z = super::node_pp_complex(node, p, k);
            values[i] *= Complex::new(T::of(z.re), T::of(z.im));
            found[i] *= pk;
        }
    }
    for (i, v) in values.iter_mut().enumerate() {
        let n = lo + i as u64;
        if found[i] != n {
            let z = super::node_pp_complex(node, n / found[i], 1);
            *v *= Complex::new(T::of(z.re), T::of(z.im));
        }
    }
    Ok(values)
}

/// Outcome of a sampled multiplicativity check.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiplicativityReport {
    pub checked: usize,
    /// `(m, n)` pairs where `f(mn) != f(m) f(n)`.
    pub failures: Vec<(u64, u64)>,
}

impl MultiplicativityReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Check `f(mn) = f(m) f(n)` on random coprime pairs with `mn < hi`.
///
/// Exact tables are compared exactly; others within `1e-12` (or 64 ulp for
/// `f32`).
pub fn verify_multiplicative<T: Real>(table: &EvaluatedTable<T>, samples: usize, seed: u64) -> MultiplicativityReport {
    let tol = T::of(1e-12).max(T::epsilon() * T::of(64.0));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = MultiplicativityReport {
        checked: 0,
        failures: Vec::new(),
    };
    let top = table.hi.saturating_sub(1);
    if table.lo != 1 || top < 2 {
        return report;
    }
    let mut attempts = 0usize;
    while report.checked < samples && attempts < samples.saturating_mul(50) {
        attempts += 1;
        let m = rng.gen_range(1..=isqrt(top).max(1));
        let n = rng.gen_range(1..=top / m);
        if m.gcd(&n) != 1 {
            continue;
        }
        let (m, n) = if rng.gen_bool(0.5) { (m, n) } else { (n, m) };
        report.checked += 1;
        let ok = match table.exact() {
            Some(x) => {
                let (a, b, ab) = (
                    table.exponent_at(m as i64),
                    table.exponent_at(n as i64),
                    table.exponent_at((m * n) as i64),
                );
                if a == ZERO || b == ZERO {
                    ab == ZERO
                } else {
                    ab as u32 == (a as u32 + b as u32) % x.order()
                }
            }
            None => (table.value(m * n) - table.value(m) * table.value(n)).norm() <= tol,
        };
        if !ok {
            report.failures.push((m, n));
        }
    }
    report
}
