//! Segmented factor sieve.
//!
//! A [`SievedBlock`] holds ω, Ω, μ, λ and the squarefree flag for every integer
//! of a half-open range `[lo, hi)`. Each segment keeps a running product of the
//! small prime powers found so far; whatever is left of `n` once every prime up
//! to `√hi` has been struck is a single prime, counted once more in ω and Ω.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Default number of integers per sieve segment.
pub const DEFAULT_SEGMENT: usize = 1 << 22;

/// All primes up to (and including) `limit`.
#[derive(Clone, PartialEq, Eq)]
pub struct PrimeList {
    limit: u64,
    primes: Arc<[u64]>,
}

impl fmt::Debug for PrimeList {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PrimeList")
            .field("limit", &self.limit)
            .field("count", &self.primes.len())
            .finish()
    }
}

impl PrimeList {
    pub fn up_to(limit: u64) -> Self {
        Self {
            limit,
            primes: primes_up_to(limit).into(),
        }
    }

    /// Every prime in the list is `<= limit`, and every prime `<= limit` is listed.
    pub fn limit(&self) -> u64 {
        self.limit
    }

    pub fn as_slice(&self) -> &[u64] {
        &self.primes
    }

    pub fn len(&self) -> usize {
        self.primes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.primes.is_empty()
    }

    /// Primes `<= n` (a prefix of the list).
    pub fn up_to_prefix(&self, n: u64) -> &[u64] {
        let end = self.primes.partition_point(|&p| p <= n);
        &self.primes[..end]
    }
}

/// Exactly the primes in `[2, n]`, ascending. Segmented odd-only Eratosthenes.
pub fn primes_up_to(n: u64) -> Vec<u64> {
    if n < 2 {
        return Vec::new();
    }
    let root = isqrt(n);
    // Base primes up to √n by a plain sieve.
    let mut small = vec![true; root as usize + 1];
    let mut base = Vec::new();
    for i in 2..=root as usize {
        if small[i] {
            base.push(i as u64);
            let mut j = i * i;
            while j <= root as usize {
                small[j] = false;
                j += i;
            }
        }
    }

    let mut out = Vec::with_capacity(estimate_pi(n));
    out.push(2);
    // Odd numbers only: index i stands for lo + 2i.
    const SEG: u64 = 1 << 18;
    let mut seg = vec![true; SEG as usize];
    let mut lo = 3u64;
    while lo <= n {
        let hi = (lo + 2 * SEG).min(n + 1); // exclusive
        let count = (hi - lo).div_ceil(2);
        seg[..count as usize].fill(true);
        for &p in base.iter().skip(1) {
            if p * p >= hi {
                break;
            }
            let mut start = (p * p).max(lo.div_ceil(p) * p);
            if start % 2 == 0 {
                start += p;
            }
            let mut j = (start - lo) / 2;
            while j < count {
                seg[j as usize] = false;
                j += p;
            }
        }
        for (i, &flag) in seg[..count as usize].iter().enumerate() {
            if flag {
                out.push(lo + 2 * i as u64);
            }
        }
        lo = hi + hi.is_multiple_of(2) as u64;
    }
    out
}

fn estimate_pi(n: u64) -> usize {
    let x = n as f64;
    if x < 17.0 {
        return 8;
    }
    (1.26 * x / x.ln()) as usize
}

/// `⌊√n⌋`, exact for all `u64`.
pub fn isqrt(n: u64) -> u64 {
    if n < 2 {
        return n;
    }
    let mut r = (n as f64).sqrt() as u64;
    while r.checked_mul(r).is_none_or(|sq| sq > n) {
        r -= 1;
    }
    while (r + 1).checked_mul(r + 1).is_some_and(|sq| sq <= n) {
        r += 1;
    }
    r
}

/// Canonical prime factorization.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Factorization {
    pub n: u64,
    /// `(prime, exponent)`, primes strictly increasing.
    pub factors: Vec<(u64, u32)>,
}

impl Factorization {
    pub fn omega(&self) -> u32 {
        self.factors.len() as u32
    }

    pub fn big_omega(&self) -> u32 {
        self.factors.iter().map(|&(_, e)| e).sum()
    }

    pub fn is_squarefree(&self) -> bool {
        self.factors.iter().all(|&(_, e)| e == 1)
    }

    pub fn mobius(&self) -> i8 {
        if !self.is_squarefree() {
            0
        } else if self.omega().is_multiple_of(2) {
            1
        } else {
            -1
        }
    }

    pub fn liouville(&self) -> i8 {
        if self.big_omega().is_multiple_of(2) {
            1
        } else {
            -1
        }
    }
}

/// Factorization by trial division. Shares nothing with the sieve.
pub fn factor(n: u64) -> Result<Factorization> {
    if n == 0 {
        return Err(Error::ZeroFactorization);
    }
    let mut factors = Vec::new();
    let mut m = n;
    let mut d = 2u64;
    while d.checked_mul(d).is_some_and(|sq| sq <= m) {
        if m.is_multiple_of(d) {
            let mut e = 0;
            while m.is_multiple_of(d) {
                m /= d;
                e += 1;
            }
            factors.push((d, e));
        }
        d += if d == 2 { 1 } else { 2 };
    }
    if m > 1 {
        factors.push((m, 1));
    }
    Ok(Factorization { n, factors })
}

/// Packed bit array, LSB-first within each 64-bit word.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BitArray {
    len: usize,
    words: Vec<u64>,
}

impl BitArray {
    pub fn from_bools(bits: &[bool]) -> Self {
        let mut words = vec![0u64; bits.len().div_ceil(64)];
        for (i, &b) in bits.iter().enumerate() {
            if b {
                words[i / 64] |= 1 << (i % 64);
            }
        }
        Self {
            len: bits.len(),
            words,
        }
    }

    pub fn from_words(len: usize, words: Vec<u64>) -> Self {
        Self { len, words }
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit index {i} out of range {}", self.len);
        (self.words[i / 64] >> (i % 64)) & 1 == 1
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }
}

/// ω, Ω, μ, λ and squarefreeness on `[lo, hi)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SievedBlock {
    pub(crate) lo: u64,
    pub(crate) hi: u64,
    pub(crate) omega: Vec<u8>,
    pub(crate) big_omega: Vec<u8>,
    pub(crate) mu: Vec<i8>,
    pub(crate) lambda: Vec<i8>,
    pub(crate) squarefree: BitArray,
    pub(crate) primes: PrimeList,
}

impl SievedBlock {
    pub fn lo(&self) -> u64 {
        self.lo
    }

    pub fn hi(&self) -> u64 {
        self.hi
    }

    pub fn len(&self) -> usize {
        (self.hi - self.lo) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.hi == self.lo
    }

    pub fn contains(&self, n: u64) -> bool {
        n >= self.lo && n < self.hi
    }

    /// The prime list the block was sieved with.
    pub fn primes(&self) -> &PrimeList {
        &self.primes
    }

    #[inline]
    fn idx(&self, n: u64) -> usize {
        assert!(self.contains(n), "{n} outside block [{}, {})", self.lo, self.hi);
        (n - self.lo) as usize
    }

    #[inline]
    pub fn omega(&self, n: u64) -> u8 {
        self.omega[self.idx(n)]
    }

    #[inline]
    pub fn big_omega(&self, n: u64) -> u8 {
        self.big_omega[self.idx(n)]
    }

    #[inline]
    pub fn mu(&self, n: u64) -> i8 {
        self.mu[self.idx(n)]
    }

    #[inline]
    pub fn lambda(&self, n: u64) -> i8 {
        self.lambda[self.idx(n)]
    }

    #[inline]
    pub fn is_squarefree(&self, n: u64) -> bool {
        self.squarefree.get(self.idx(n))
    }

    pub fn omega_slice(&self) -> &[u8] {
        &self.omega
    }

    pub fn big_omega_slice(&self) -> &[u8] {
        &self.big_omega
    }

    pub fn mu_slice(&self) -> &[i8] {
        &self.mu
    }

    pub fn lambda_slice(&self) -> &[i8] {
        &self.lambda
    }

    pub fn squarefree_bits(&self) -> &BitArray {
        &self.squarefree
    }

    /// Reassemble a block from raw arrays, checking every type invariant.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        lo: u64,
        hi: u64,
        omega: Vec<u8>,
        big_omega: Vec<u8>,
        mu: Vec<i8>,
        lambda: Vec<i8>,
        squarefree: BitArray,
        primes: PrimeList,
    ) -> Result<Self> {
        if lo == 0 || hi <= lo {
            return Err(Error::InvalidRange { lo, hi });
        }
        let len = (hi - lo) as usize;
        if [omega.len(), big_omega.len(), mu.len(), lambda.len(), squarefree.len()]
            .iter()
            .any(|&l| l != len)
        {
            return Err(Error::CacheFormat(format!("array length mismatch, expected {len}")));
        }
        for i in 0..len {
            let sign = |c: u8| if c.is_multiple_of(2) { 1 } else { -1 };
            let expected_mu = if squarefree.get(i) { sign(omega[i]) } else { 0 };
            if omega[i] > big_omega[i] || lambda[i] != sign(big_omega[i]) || mu[i] != expected_mu {
                return Err(Error::CacheFormat(format!("invariant violated at n = {}", lo + i as u64)));
            }
        }
        Ok(Self {
            lo,
            hi,
            omega,
            big_omega,
            mu,
            lambda,
            squarefree,
            primes,
        })
    }
}

/// Sieve `[lo, hi)` with the default segment size.
pub fn build_block(lo: u64, hi: u64, primes: &PrimeList) -> Result<SievedBlock> {
    build_block_with(lo, hi, primes, DEFAULT_SEGMENT)
}

/// Sieve `[lo, hi)`; distinct segments are processed in parallel.
pub fn build_block_with(lo: u64, hi: u64, primes: &PrimeList, segment: usize) -> Result<SievedBlock> {
    if lo == 0 || hi <= lo {
        return Err(Error::InvalidRange { lo, hi });
    }
    let required = isqrt(hi - 1);
    if primes.limit() < required {
        return Err(Error::InsufficientPrimes {
            required,
            available: primes.limit(),
        });
    }
    let segment = segment.max(1);
    let len = (hi - lo) as usize;
    let mut omega = vec![0u8; len];
    let mut big_omega = vec![0u8; len];
    let mut mu = vec![0i8; len];
    let mut lambda = vec![0i8; len];
    let mut sqf = vec![true; len];
    let small = primes.up_to_prefix(required);

    omega
        .par_chunks_mut(segment)
        .zip(big_omega.par_chunks_mut(segment))
        .zip(mu.par_chunks_mut(segment))
        .zip(lambda.par_chunks_mut(segment))
        .zip(sqf.par_chunks_mut(segment))
        .enumerate()
        .for_each(|(k, ((((om, bo), mu), la), sq))| {
            let seg_lo = lo + (k * segment) as u64;
            sieve_segment(seg_lo, small, om, bo, mu, la, sq);
        });

    Ok(SievedBlock {
        lo,
        hi,
        omega,
        big_omega,
        mu,
        lambda,
        squarefree: BitArray::from_bools(&sqf),
        primes: primes.clone(),
    })
}

fn sieve_segment(
    lo: u64,
    primes: &[u64],
    omega: &mut [u8],
    big_omega: &mut [u8],
    mu: &mut [i8],
    lambda: &mut [i8],
    squarefree: &mut [bool],
) {
    let len = omega.len();
    let last = lo + len as u64 - 1;
    // Product of the prime powers struck so far; n / found is the cofactor.
    let mut found = vec![1u64; len];
    for &p in primes {
        if p > last / p {
            break;
        }
        let mut pk = p;
        let mut k = 1;
        loop {
            let start = (lo.div_ceil(pk) * pk - lo) as usize;
            let step = pk as usize;
            let mut i = start;
            while i < len {
                big_omega[i] += 1;
                found[i] *= p;
                if k == 1 {
                    omega[i] += 1;
                } else if k == 2 {
                    squarefree[i] = false;
                }
                i += step;
            }
            match pk.checked_mul(p) {
                Some(next) if next <= last => {
                    pk = next;
                    k += 1;
                }
                _ => break,
            }
        }
    }
    for i in 0..len {
        if found[i] != lo + i as u64 {
            omega[i] += 1;
            big_omega[i] += 1;
        }
        lambda[i] = if big_omega[i].is_multiple_of(2) { 1 } else { -1 };
        mu[i] = match (squarefree[i], omega[i] % 2) {
            (false, _) => 0,
            (true, 0) => 1,
            (true, _) => -1,
        };
    }
}

/// Primes sufficient to sieve any block ending below `hi`.
pub fn primes_for(hi: u64) -> PrimeList {
    PrimeList::up_to(isqrt(hi.saturating_sub(1)).max(2))
}
