//! Dirichlet characters built from the generator decomposition of (ℤ/qℤ)*.
//!
//! `q = ∏ p^k`; each odd prime power contributes a cyclic factor generated by a
//! primitive root, `4` contributes `{-1}`, and `2^k` (k ≥ 3) contributes the two
//! generators `-1` and `5`. A character is an exponent vector on those
//! generators, so every value is an exact root of unity.

use std::sync::Arc;

use num_complex::Complex;
use num_integer::Integer;

use crate::error::{Error, Result};
use crate::scalar::{roots_of_unity, Real};
use crate::sieve::factor;

/// Marker for a zero value in an exponent array.
pub const ZERO: u16 = u16::MAX;

/// One cyclic factor of (ℤ/qℤ)*.
#[derive(Debug, Clone)]
struct Component {
    /// Modulus of the prime-power piece this generator lives in.
    modulus: u64,
    order: u32,
    /// Discrete log of each residue mod `modulus` (units only; others unused).
    dlog: Vec<u32>,
}

/// The generator decomposition of (ℤ/qℤ)*.
#[derive(Debug, Clone)]
pub struct UnitGroup {
    modulus: u64,
    components: Vec<Component>,
}

impl UnitGroup {
    pub fn new(q: u64) -> Result<Self> {
        if q == 0 {
            return Err(Error::InvalidSpec("character modulus must be >= 1".into()));
        }
        if q > 1 << 24 {
            return Err(Error::InvalidSpec(format!("character modulus {q} too large (max 2^24)")));
        }
        let mut components = Vec::new();
        for (p, k) in factor(q)?.factors {
            let pk = p.pow(k);
            if p == 2 {
                match k {
                    1 => {}
                    2 => components.push(cyclic(4, 3, 2)),
                    _ => {
                        let (minus_one, five) = two_power_components(pk);
                        components.push(minus_one);
                        components.push(five);
                    }
                }
            } else {
                let g = primitive_root_prime_power(p, k);
                components.push(cyclic(pk, g, (pk / p * (p - 1)) as u32));
            }
        }
        Ok(Self {
            modulus: q,
            components,
        })
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    /// Orders of the generators, in index-vector order.
    pub fn generator_orders(&self) -> Vec<u32> {
        self.components.iter().map(|c| c.order).collect()
    }

    /// φ(q).
    pub fn size(&self) -> u64 {
        self.components.iter().map(|c| c.order as u64).product()
    }

    /// Least common multiple of the generator orders.
    pub fn exponent(&self) -> u32 {
        self.components.iter().fold(1u32, |acc, c| acc.lcm(&c.order))
    }

    pub fn character(&self, index: &[u32]) -> Result<Character> {
        if index.len() != self.components.len() {
            return Err(Error::InvalidSpec(format!(
                "character mod {} needs an index vector of length {}, got {}",
                self.modulus,
                self.components.len(),
                index.len()
            )));
        }
        for (i, (&a, c)) in index.iter().zip(&self.components).enumerate() {
            if a >= c.order {
                return Err(Error::InvalidSpec(format!(
                    "character mod {}: index[{i}] = {a} must be < {}",
                    self.modulus, c.order
                )));
            }
        }
        let big_l = self.exponent();
        let q = self.modulus;
        let raw: Vec<u32> = (0..q)
            .map(|n| {
                if n.gcd(&q) != 1 {
                    return u32::MAX;
                }
                let mut acc = 0u64;
                for (&a, c) in index.iter().zip(&self.components) {
                    let d = c.dlog[(n % c.modulus) as usize] as u64;
                    acc += a as u64 * d * (big_l / c.order) as u64;
                }
                (acc % big_l as u64) as u32
            })
            .collect();
        // Reduce to the character's own order.
        let g = raw
            .iter()
            .filter(|&&x| x != u32::MAX)
            .fold(big_l, |acc, &x| acc.gcd(&x));
        let order = big_l / g;
        let values = raw
            .into_iter()
            .map(|x| if x == u32::MAX { ZERO } else { (x / g) as u16 })
            .collect::<Vec<_>>();
        Ok(Character {
            modulus: q,
            index: index.to_vec(),
            order,
            values: values.into(),
        })
    }

    /// All φ(q) characters, principal first, index vectors in lexicographic order.
    pub fn characters(&self) -> Vec<Character> {
        let orders = self.generator_orders();
        let mut out = Vec::with_capacity(self.size() as usize);
        let mut idx = vec![0u32; orders.len()];
        loop {
            out.push(self.character(&idx).expect("index within bounds"));
            // Odometer increment, last coordinate fastest.
            let mut pos = orders.len();
            loop {
                if pos == 0 {
                    return out;
                }
                pos -= 1;
                idx[pos] += 1;
                if idx[pos] < orders[pos] {
                    break;
                }
                idx[pos] = 0;
            }
        }
    }
}

fn cyclic(modulus: u64, generator: u64, order: u32) -> Component {
    let mut dlog = vec![0u32; modulus as usize];
    let mut x = 1u64;
    for j in 0..order {
        dlog[x as usize] = j;
        x = x * generator % modulus;
    }
    Component {
        modulus,
        order,
        dlog,
    }
}

fn two_power_components(pk: u64) -> (Component, Component) {
    let half = (pk / 4) as u32;
    let mut sign = vec![0u32; pk as usize];
    let mut five = vec![0u32; pk as usize];
    let mut x = 1u64;
    for j in 0..half {
        sign[x as usize] = 0;
        five[x as usize] = j;
        let neg = pk - x;
        sign[neg as usize] = 1;
        five[neg as usize] = j;
        x = x * 5 % pk;
    }
    (
        Component {
            modulus: pk,
            order: 2,
            dlog: sign,
        },
        Component {
            modulus: pk,
            order: half,
            dlog: five,
        },
    )
}

pub(crate) fn pow_mod(b: u64, mut e: u64, m: u64) -> u64 {
    let m = m as u128;
    let mut r = 1u128 % m;
    let mut b = b as u128 % m;
    while e > 0 {
        if e & 1 == 1 {
            r = r * b % m;
        }
        b = b * b % m;
        e >>= 1;
    }
    r as u64
}

/// Smallest primitive root modulo an odd prime `p`.
pub fn primitive_root(p: u64) -> u64 {
    if p == 2 {
        return 1;
    }
    let divisors: Vec<u64> = factor(p - 1)
        .expect("p - 1 >= 1")
        .factors
        .into_iter()
        .map(|(r, _)| r)
        .collect();
    (2..p)
        .find(|&g| divisors.iter().all(|&r| pow_mod(g, (p - 1) / r, p) != 1))
        .expect("every prime has a primitive root")
}

/// A primitive root modulo `p^k` for odd `p`.
pub fn primitive_root_prime_power(p: u64, k: u32) -> u64 {
    let g = primitive_root(p);
    if k == 1 {
        return g;
    }
    let p2 = p * p;
    if pow_mod(g, p - 1, p2) == 1 {
        g + p
    } else {
        g
    }
}

/// A Dirichlet character with exact root-of-unity values.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Character {
    modulus: u64,
    index: Vec<u32>,
    order: u32,
    /// `χ(n) = e(values[n mod q] / order)`, or 0 where `values == ZERO`.
    values: Arc<[u16]>,
}

impl Character {
    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    pub fn index(&self) -> &[u32] {
        &self.index
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn is_principal(&self) -> bool {
        self.order == 1
    }

    /// Exponent of `χ(n)` modulo [`order`](Self::order), or [`ZERO`].
    #[inline]
    pub fn exponent(&self, n: u64) -> u16 {
        self.values[(n % self.modulus) as usize]
    }

    pub fn value<T: Real>(&self, n: u64) -> Complex<T> {
        match self.exponent(n) {
            ZERO => Complex::new(T::zero(), T::zero()),
            k => roots_of_unity::<T>(self.order)[k as usize],
        }
    }

    /// Exponents over one period, index `n mod q`.
    pub fn period(&self) -> &[u16] {
        &self.values
    }
}

/// All φ(q) characters modulo `q`, principal first.
pub fn character_group(q: u64) -> Result<Vec<Character>> {
    Ok(UnitGroup::new(q)?.characters())
}
