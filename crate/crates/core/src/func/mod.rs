//! Bounded multiplicative functions.
//!
//! A [`FunctionSpec`] is a small expression tree (built-ins, characters,
//! root-of-unity functions, `n^{it}`, and combinators). It serializes as JSON,
//! e.g. `{"power":[{"root_of_unity":3},2]}`. Specs are compiled once
//! ([`Compiled`]) and then evaluated over a sieved block into an
//! [`EvaluatedTable`].
//!
//! Functions are extended to ℤ by `f(-n) = f(n)` and `f(0) = 0`.

mod character;
mod table;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex;
use num_integer::Integer;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{roots_of_unity, Real};

pub use character::{character_group, primitive_root, primitive_root_prime_power, Character, UnitGroup, ZERO};
pub use table::{evaluate, verify_multiplicative, EvaluatedTable, ExactForm, MultiplicativityReport};

/// Largest order kept in exact root-of-unity form.
pub const MAX_EXACT_ORDER: u32 = 1 << 15;

/// Tolerance on `|f(p^k)| <= 1` for user-supplied values.
const UNIT_SLACK: f64 = 1e-12;

/// Symbolic definition of a function in the class ℳ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum FunctionSpec {
    Liouville,
    Mobius,
    One,
    /// Dirichlet character, exponent vector on the generators of (ℤ/qℤ)*.
    Character { modulus: u64, index: Vec<u32> },
    /// `f_b(p^j) = e(1/b)` for every prime power; encodes `ω mod b`.
    RootOfUnity(u32),
    /// `f'_b(p^j) = e(j/b)`; encodes `Ω mod b`.
    CompleteRootOfUnity(u32),
    /// `n ↦ n^{it}`.
    Archimedean(f64),
    Product(Vec<FunctionSpec>),
    Power(Box<FunctionSpec>, u32),
    Conjugate(Box<FunctionSpec>),
    /// Values prescribed at prime powers.
    Table(PrimePowerTable),
}

/// User-supplied prime-power values: `f(p^k)` is entry `min(k, len) - 1` of the
/// list for `p` (or of `default` when `p` is not listed). Entries are `[re, im]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrimePowerTable {
    pub default: Vec<[f64; 2]>,
    #[serde(default)]
    pub primes: BTreeMap<u64, Vec<[f64; 2]>>,
}

impl FunctionSpec {
    pub fn character(modulus: u64, index: Vec<u32>) -> Self {
        Self::Character { modulus, index }
    }

    pub fn product(specs: impl IntoIterator<Item = FunctionSpec>) -> Self {
        Self::Product(specs.into_iter().collect())
    }

    pub fn power(self, r: u32) -> Self {
        Self::Power(Box::new(self), r)
    }

    pub fn conjugate(self) -> Self {
        Self::Conjugate(Box::new(self))
    }

    pub fn times(self, other: FunctionSpec) -> Self {
        Self::Product(vec![self, other])
    }

    /// Check well-formedness and build lookup structures.
    pub fn compile(&self) -> Result<Compiled> {
        Ok(Compiled {
            node: Arc::new(compile_node(self)?),
            spec: self.clone(),
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.compile().map(|_| ())
    }

    /// Compact JSON form.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("spec serializes")
    }
}

impl fmt::Display for FunctionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FunctionSpec::Liouville => f.write_str("liouville"),
            FunctionSpec::Mobius => f.write_str("mobius"),
            FunctionSpec::One => f.write_str("one"),
            other => f.write_str(&other.to_json()),
        }
    }
}

impl FromStr for FunctionSpec {
    type Err = Error;

    /// Accepts a bare built-in name or a JSON expression.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "liouville" | "lambda" => return Ok(Self::Liouville),
            "mobius" | "mu" => return Ok(Self::Mobius),
            "one" | "1" => return Ok(Self::One),
            _ => {}
        }
        serde_json::from_str(s).map_err(|e| Error::Parse(format!("function spec `{s}`: {e}")))
    }
}

#[derive(Debug)]
pub(crate) enum Node {
    Liouville,
    Mobius,
    One,
    Character(Character),
    RootOfUnity(u32),
    CompleteRootOfUnity(u32),
    Archimedean(f64),
    Product(Vec<Node>),
    Power(Box<Node>, u32),
    Conjugate(Box<Node>),
    Table(PrimePowerTable),
}

fn compile_node(spec: &FunctionSpec) -> Result<Node> {
    Ok(match spec {
        FunctionSpec::Liouville => Node::Liouville,
        FunctionSpec::Mobius => Node::Mobius,
        FunctionSpec::One => Node::One,
        FunctionSpec::Character { modulus, index } => Node::Character(UnitGroup::new(*modulus)?.character(index)?),
        FunctionSpec::RootOfUnity(b) | FunctionSpec::CompleteRootOfUnity(b) => {
            if *b == 0 || *b > MAX_EXACT_ORDER {
                return Err(Error::InvalidSpec(format!(
                    "root-of-unity order must be in 1..={MAX_EXACT_ORDER}, got {b}"
                )));
            }
            if matches!(spec, FunctionSpec::RootOfUnity(_)) {
                Node::RootOfUnity(*b)
            } else {
                Node::CompleteRootOfUnity(*b)
            }
        }
        FunctionSpec::Archimedean(t) => {
            if !t.is_finite() {
                return Err(Error::InvalidSpec(format!("archimedean parameter must be finite, got {t}")));
            }
            Node::Archimedean(*t)
        }
        FunctionSpec::Product(items) => Node::Product(items.iter().map(compile_node).collect::<Result<_>>()?),
        FunctionSpec::Power(inner, r) => {
            if *r == 0 {
                return Err(Error::InvalidSpec("power exponent must be >= 1".into()));
            }
            Node::Power(Box::new(compile_node(inner)?), *r)
        }
        FunctionSpec::Conjugate(inner) => Node::Conjugate(Box::new(compile_node(inner)?)),
        FunctionSpec::Table(t) => {
            if t.default.is_empty() {
                return Err(Error::InvalidSpec("table spec needs at least one default value".into()));
            }
            for (p, vals) in &t.primes {
                if vals.is_empty() {
                    return Err(Error::InvalidSpec(format!("table spec: empty value list for prime {p}")));
                }
                if crate::sieve::factor(*p)?.factors != vec![(*p, 1)] {
                    return Err(Error::InvalidSpec(format!("table spec: key {p} is not prime")));
                }
            }
            for v in t.default.iter().chain(t.primes.values().flatten()) {
                let modulus = v[0].hypot(v[1]);
                if modulus.is_nan() || modulus > 1.0 + UNIT_SLACK {
                    return Err(Error::InvalidSpec(format!(
                        "table spec: prime-power value [{}, {}] exceeds unit modulus",
                        v[0], v[1]
                    )));
                }
            }
            Node::Table(t.clone())
        }
    })
}

/// A value `e(k/L)` or zero, with `L` fixed by context.
pub type ExactValue = Option<u32>;

/// A validated spec with characters and tables built.
#[derive(Debug, Clone)]
pub struct Compiled {
    spec: FunctionSpec,
    node: Arc<Node>,
}

impl Compiled {
    pub fn spec(&self) -> &FunctionSpec {
        &self.spec
    }

    /// `L` such that every value is zero or an `L`-th root of unity, if the
    /// value group is finite and small enough to track exactly.
    pub fn exact_order(&self) -> Option<u32> {
        exact_order(&self.node)
    }

    /// `f(p^k)` as an exponent modulo [`exact_order`](Self::exact_order).
    pub fn prime_power_exact(&self, p: u64, k: u32) -> Option<ExactValue> {
        let l = self.exact_order()?;
        Some(node_pp_exact(&self.node, p, k, l))
    }

    /// `f(p^k)`.
    pub fn prime_power<T: Real>(&self, p: u64, k: u32) -> Complex<T> {
        if let Some(l) = self.exact_order() {
            return match node_pp_exact(&self.node, p, k, l) {
                None => Complex::new(T::zero(), T::zero()),
                Some(e) => exact_root::<T>(e, l),
            };
        }
        let z = node_pp_complex(&self.node, p, k);
        Complex::new(T::of(z.re), T::of(z.im))
    }

    pub(crate) fn node(&self) -> &Node {
        &self.node
    }
}

fn exact_root<T: Real>(e: u32, l: u32) -> Complex<T> {
    // Reduce e/l to lowest terms so that ±1 and ±i come out exact.
    let g = e.gcd(&l).max(1);
    let (e, l) = (e / g, l / g);
    roots_of_unity::<T>(l)[e as usize]
}

fn exact_order(node: &Node) -> Option<u32> {
    match node {
        Node::One => Some(1),
        Node::Liouville | Node::Mobius => Some(2),
        Node::Character(c) => Some(c.order()),
        Node::RootOfUnity(b) | Node::CompleteRootOfUnity(b) => Some(*b),
        Node::Archimedean(_) | Node::Table(_) => None,
        Node::Product(items) => items.iter().try_fold(1u32, |acc, n| {
            let l = acc.lcm(&exact_order(n)?);
            (l <= MAX_EXACT_ORDER).then_some(l)
        }),
        Node::Power(inner, _) | Node::Conjugate(inner) => exact_order(inner),
    }
}

/// `f(p^k)` as an exponent mod `l`, where `exact_order(node)` divides `l`.
fn node_pp_exact(node: &Node, p: u64, k: u32, l: u32) -> ExactValue {
    match node {
        Node::One => Some(0),
        Node::Liouville => Some((k % 2) * (l / 2)),
        Node::Mobius => (k == 1).then_some(l / 2),
        Node::Character(c) => {
            let pk = crate::func::character::pow_mod(p, k as u64, c.modulus());
            match c.exponent(pk) {
                ZERO => None,
                e => Some(e as u32 * (l / c.order())),
            }
        }
        Node::RootOfUnity(b) => Some((l / b) % l),
        Node::CompleteRootOfUnity(b) => Some(((k % b) * (l / b)) % l),
        Node::Product(items) => items
            .iter()
            .try_fold(0u32, |acc, n| node_pp_exact(n, p, k, l).map(|e| (acc + e) % l)),
        Node::Power(inner, r) => {
            node_pp_exact(inner, p, k, l).map(|e| ((e as u64 * *r as u64) % l as u64) as u32)
        }
        Node::Conjugate(inner) => node_pp_exact(inner, p, k, l).map(|e| (l - e) % l),
        Node::Archimedean(_) | Node::Table(_) => unreachable!("non-exact node in exact evaluation"),
    }
}

fn node_pp_complex(node: &Node, p: u64, k: u32) -> Complex<f64> {
    if let Some(l) = exact_order(node) {
        return match node_pp_exact(node, p, k, l) {
            None => Complex::new(0.0, 0.0),
            Some(e) => exact_root::<f64>(e, l),
        };
    }
    match node {
        Node::Archimedean(t) => {
            let theta = t * k as f64 * (p as f64).ln();
            Complex::new(theta.cos(), theta.sin())
        }
        Node::Table(t) => {
            let vals = t.primes.get(&p).unwrap_or(&t.default);
            let v = vals[(k as usize).min(vals.len()) - 1];
            Complex::new(v[0], v[1])
        }
        Node::Product(items) => items.iter().map(|n| node_pp_complex(n, p, k)).product(),
        Node::Power(inner, r) => node_pp_complex(inner, p, k).powu(*r),
        Node::Conjugate(inner) => node_pp_complex(inner, p, k).conj(),
        _ => unreachable!("exact nodes handled above"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_shapes() {
        let spec = FunctionSpec::RootOfUnity(3).power(2);
        assert_eq!(spec.to_json(), r#"{"power":[{"root_of_unity":3},2]}"#);
        assert_eq!(FunctionSpec::Liouville.to_json(), r#""liouville""#);
        assert_eq!(
            FunctionSpec::character(5, vec![1]).to_json(),
            r#"{"character":{"modulus":5,"index":[1]}}"#
        );
        let parsed: FunctionSpec = r#"{"power":[{"root_of_unity":3},2]}"#.parse().unwrap();
        assert_eq!(parsed, spec);
        assert_eq!("liouville".parse::<FunctionSpec>().unwrap(), FunctionSpec::Liouville);
        assert!("nonsense".parse::<FunctionSpec>().is_err());
    }

    #[test]
    fn json_round_trip_for_every_kind() {
        let mut primes = BTreeMap::new();
        primes.insert(2, vec![[-1.0, 0.0], [0.0, 1.0]]);
        let specs = vec![
            FunctionSpec::Mobius,
            FunctionSpec::One,
            FunctionSpec::CompleteRootOfUnity(4),
            FunctionSpec::Archimedean(0.1 + 0.2),
            FunctionSpec::product([FunctionSpec::Liouville, FunctionSpec::character(4, vec![1])]),
            FunctionSpec::Archimedean(-3.25).conjugate(),
            FunctionSpec::Table(PrimePowerTable {
                default: vec![[0.6, 0.8]],
                primes,
            }),
        ];
        for s in specs {
            let back: FunctionSpec = serde_json::from_str(&s.to_json()).unwrap();
            assert_eq!(back, s);
        }
    }

    #[test]
    fn validation_rejects_bad_specs() {
        assert!(FunctionSpec::RootOfUnity(0).validate().is_err());
        assert!(FunctionSpec::Liouville.power(0).validate().is_err());
        assert!(FunctionSpec::character(4, vec![2]).validate().is_err());
        assert!(FunctionSpec::Archimedean(f64::NAN).validate().is_err());
        let too_big = FunctionSpec::Table(PrimePowerTable {
            default: vec![[1.0, 0.5]],
            primes: BTreeMap::new(),
        });
        assert!(matches!(too_big.validate(), Err(Error::InvalidSpec(_))));
        let mut primes = BTreeMap::new();
        primes.insert(4, vec![[1.0, 0.0]]);
        let not_prime = FunctionSpec::Table(PrimePowerTable {
            default: vec![[1.0, 0.0]],
            primes,
        });
        assert!(not_prime.validate().is_err());
    }

    #[test]
    fn prime_power_values() {
        let f3 = FunctionSpec::RootOfUnity(3).compile().unwrap();
        assert_eq!(f3.exact_order(), Some(3));
        assert_eq!(f3.prime_power_exact(2, 5), Some(Some(1)));
        let g3 = FunctionSpec::CompleteRootOfUnity(3).compile().unwrap();
        assert_eq!(g3.prime_power_exact(2, 5), Some(Some(2)));
        let mu = FunctionSpec::Mobius.compile().unwrap();
        assert_eq!(mu.prime_power::<f64>(7, 2), Complex::new(0.0, 0.0));
        assert_eq!(mu.prime_power::<f64>(7, 1), Complex::new(-1.0, 0.0));
        let chi = FunctionSpec::character(4, vec![1]).compile().unwrap();
        assert_eq!(chi.prime_power::<f64>(3, 1), Complex::new(-1.0, 0.0));
        assert_eq!(chi.prime_power::<f64>(3, 2), Complex::new(1.0, 0.0));
        assert_eq!(chi.prime_power::<f64>(2, 1), Complex::new(0.0, 0.0));
        let arch = FunctionSpec::Archimedean(0.5).compile().unwrap();
        assert_eq!(arch.exact_order(), None);
        let z = arch.prime_power::<f64>(3, 2);
        assert!((z - Complex::new(0.0, 0.5 * 2.0 * 3f64.ln()).exp()).norm() < 1e-15);
        // Products of exact pieces stay exact in the lcm.
        let prod = FunctionSpec::product([FunctionSpec::RootOfUnity(3), FunctionSpec::Liouville])
            .compile()
            .unwrap();
        assert_eq!(prod.exact_order(), Some(6));
        assert_eq!(prod.prime_power_exact(5, 1), Some(Some(5)));
    }

    #[test]
    fn power_of_order_is_trivial() {
        let spec = FunctionSpec::RootOfUnity(3).power(3).compile().unwrap();
        for p in [2u64, 3, 5, 7] {
            for k in 1..5 {
                assert_eq!(spec.prime_power_exact(p, k), Some(Some(0)));
            }
        }
    }
}
