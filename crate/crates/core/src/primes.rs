//! Primes and Piatetski-Shapiro primes.
//!
//! Two independent routes produce the Piatetski-Shapiro primes of type `gamma`:
//! the indicator `[-p^gamma] - [-(p+1)^gamma]` applied to every prime
//! ([`ps_primes_in`]), and direct enumeration of `[n^(1/gamma)]`
//! ([`ps_enumerate_oracle`]). The indicator counts integers in the half-open
//! interval `[p^gamma, (p+1)^gamma)`, which is exactly the condition
//! `[n^(1/gamma)] = p`.

use alloc::vec;
use alloc::vec::Vec;

use crate::dd;
use crate::error::{Error, Result};
use crate::params::GammaExponent;

pub const MAX_SIEVE_LIMIT: u64 = 1 << 40;
pub const SEGMENT_LEN: u64 = 1 << 20;

/// All primes up to `limit`, ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrimeTable {
    limit: u64,
    primes: Vec<u64>,
}

impl PrimeTable {
    #[inline]
    pub fn limit(&self) -> u64 {
        self.limit
    }

    #[inline]
    pub fn primes(&self) -> &[u64] {
        &self.primes
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.primes.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.primes.is_empty()
    }

    pub fn contains(&self, n: u64) -> bool {
        self.primes.binary_search(&n).is_ok()
    }

    /// Primes in the real half-open interval `(lo, hi]`.
    pub fn range(&self, lo: f64, hi: f64) -> &[u64] {
        let start = self.primes.partition_point(|&p| p as f64 <= lo);
        let end = self.primes.partition_point(|&p| p as f64 <= hi);
        if start >= end {
            &[]
        } else {
            &self.primes[start..end]
        }
    }
}

/// Primes up to `sqrt(hi)` by a plain sieve; seeds the segments.
fn base_primes(hi: u64) -> Vec<u64> {
    let mut r = libm::sqrt(hi as f64) as u64;
    while (r + 1) * (r + 1) <= hi {
        r += 1;
    }
    while r * r > hi {
        r -= 1;
    }
    let r = r as usize;
    let mut composite = vec![false; r + 1];
    let mut out = Vec::new();
    for i in 2..=r {
        if !composite[i] {
            out.push(i as u64);
            let mut j = i * i;
            while j <= r {
                composite[j] = true;
                j += i;
            }
        }
    }
    out
}

/// Visit every prime in `[lo, hi]` in ascending order, one segment at a time.
pub fn for_each_prime_in(lo: u64, hi: u64, mut visit: impl FnMut(u64)) {
    let lo = lo.max(2);
    if hi < lo {
        return;
    }
    let base = base_primes(hi);
    let mut seg = vec![true; SEGMENT_LEN as usize];
    let mut start = lo;
    loop {
        let end = hi.min(start.saturating_add(SEGMENT_LEN - 1));
        let len = (end - start + 1) as usize;
        seg[..len].fill(true);
        for &q in &base {
            if q * q > end {
                break;
            }
            let first = (q * q).max(start.div_ceil(q) * q);
            let mut m = first;
            while m <= end {
                seg[(m - start) as usize] = false;
                m += q;
            }
        }
        for (i, &is_p) in seg[..len].iter().enumerate() {
            if is_p {
                visit(start + i as u64);
            }
        }
        if end == hi {
            break;
        }
        start = end + 1;
    }
}

/// Segmented sieve of Eratosthenes up to `limit`.
pub fn sieve_primes(limit: u64) -> Result<PrimeTable> {
    if !(2..=MAX_SIEVE_LIMIT).contains(&limit) {
        return Err(Error::SieveLimit(limit));
    }
    let mut primes = Vec::new();
    for_each_prime_in(2, limit, |p| primes.push(p));
    Ok(PrimeTable { limit, primes })
}

/// `[-p^gamma] - [-(p+1)^gamma]`, which is 1 iff `[n^(1/gamma)] = p` for some `n`.
pub fn ps_indicator(p: u64, gamma: GammaExponent) -> u8 {
    let g = gamma.value();
    let lower = dd::ceil_pow(p as f64, g);
    let upper = dd::ceil_pow((p + 1) as f64, g);
    (upper - lower) as u8
}

/// One Piatetski-Shapiro prime with its summation weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsPrime {
    pub p: u64,
    /// `p^(1 - gamma)`.
    pub weight_w: f64,
    /// `log p`.
    pub weight_log: f64,
}

impl PsPrime {
    pub fn new(p: u64, gamma: GammaExponent) -> Self {
        let pf = p as f64;
        Self {
            p,
            weight_w: libm::pow(pf, 1.0 - gamma.value()),
            weight_log: libm::log(pf),
        }
    }

    /// `p^(1 - gamma) log p`.
    #[inline]
    pub fn weight(&self) -> f64 {
        self.weight_w * self.weight_log
    }
}

/// Piatetski-Shapiro primes of one type in a range `(lo, hi]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PsPrimeSet {
    gamma: GammaExponent,
    lo: f64,
    hi: f64,
    entries: Vec<PsPrime>,
}

impl PsPrimeSet {
    /// Build from ascending primes already known to be of type `gamma`.
    pub fn from_primes(
        gamma: GammaExponent,
        lo: f64,
        hi: f64,
        primes: impl IntoIterator<Item = u64>,
    ) -> Self {
        let entries = primes.into_iter().map(|p| PsPrime::new(p, gamma)).collect();
        Self { gamma, lo, hi, entries }
    }

    #[inline]
    pub fn gamma(&self) -> GammaExponent {
        self.gamma
    }

    #[inline]
    pub fn range(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    #[inline]
    pub fn entries(&self) -> &[PsPrime] {
        &self.entries
    }

    pub fn primes(&self) -> impl Iterator<Item = u64> + '_ {
        self.entries.iter().map(|e| e.p)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, p: u64) -> bool {
        self.entries.binary_search_by_key(&p, |e| e.p).is_ok()
    }

    /// Total weight `sum p^(1-gamma) log p`.
    pub fn total_weight(&self) -> f64 {
        self.entries
            .iter()
            .map(PsPrime::weight)
            .collect::<crate::accum::Neumaier>()
            .value()
    }
}

/// Piatetski-Shapiro primes in `(lo, hi]` selected by [`ps_indicator`].
pub fn ps_primes_in(lo: f64, hi: f64, gamma: GammaExponent, table: &PrimeTable) -> Result<PsPrimeSet> {
    if hi > table.limit() as f64 {
        return Err(Error::RangeBeyondTable {
            hi,
            limit: table.limit(),
        });
    }
    let selected = table
        .range(lo, hi)
        .iter()
        .copied()
        .filter(|&p| ps_indicator(p, gamma) == 1);
    Ok(PsPrimeSet::from_primes(gamma, lo, hi, selected))
}

/// Piatetski-Shapiro primes up to `limit` by enumerating `[n^(1/gamma)]`.
///
/// Shares no code with [`ps_indicator`] or the segmented sieve: primality is
/// read off a plain byte sieve.
pub fn ps_enumerate_oracle(limit: u64, gamma: GammaExponent) -> PsPrimeSet {
    let limit = limit.max(2);
    let n_max = libm::ceil(libm::pow((limit + 1) as f64, gamma.value())) as u64;
    let mut composite = vec![false; limit as usize + 1];
    composite[0] = true;
    composite[1] = true;
    let mut i = 2usize;
    while i * i <= limit as usize {
        if !composite[i] {
            for j in (i * i..=limit as usize).step_by(i) {
                composite[j] = true;
            }
        }
        i += 1;
    }
    let mut found = Vec::new();
    for n in 1..=n_max {
        let m = dd::floor_pow_recip(n as f64, gamma.value());
        if m > limit as f64 {
            break;
        }
        let m = m as u64;
        if !composite[m as usize] {
            found.push(m);
        }
    }
    found.sort_unstable();
    found.dedup();
    PsPrimeSet::from_primes(gamma, 0.0, limit as f64, found)
}

/// Trial-division primality, for re-validating individual results.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    if n % 2 == 0 {
        return n == 2;
    }
    let mut d = 3u64;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 2;
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g(v: f64) -> GammaExponent {
        GammaExponent::new(v).unwrap()
    }

    #[test]
    fn small_sieves() {
        assert_eq!(sieve_primes(10).unwrap().primes(), &[2, 3, 5, 7]);
        assert_eq!(sieve_primes(2).unwrap().primes(), &[2]);
        assert!(sieve_primes(1).is_err());
        assert!(sieve_primes(MAX_SIEVE_LIMIT + 1).is_err());
    }

    #[test]
    fn segment_boundaries() {
        // straddle the first segment edge and compare with trial division
        let lo = SEGMENT_LEN - 500;
        let hi = SEGMENT_LEN + 500;
        let mut got = Vec::new();
        for_each_prime_in(lo, hi, |p| got.push(p));
        let want: Vec<u64> = (lo..=hi).filter(|&n| is_prime(n)).collect();
        assert_eq!(got, want);
    }

    #[test]
    fn pi_of_a_million() {
        let t = sieve_primes(1_000_000).unwrap();
        assert_eq!(t.len(), 78_498);
        // trial division over a sample window agrees
        let window = t.range(999_000.0, 1_000_000.0);
        let want: Vec<u64> = (999_001..=1_000_000).filter(|&n| is_prime(n)).collect();
        assert_eq!(window, &want[..]);
    }

    #[test]
    fn indicator_examples() {
        // 2 in [2^0.9, 3^0.9) = [1.866, 2.688)
        assert_eq!(ps_indicator(2, g(0.9)), 1);
        // no integer in [10.058, 10.752)
        assert_eq!(ps_indicator(13, g(0.9)), 0);
        let near_one = g(1.0 - 1e-9);
        for p in [2, 3, 5, 7, 11, 13, 101, 997] {
            assert_eq!(ps_indicator(p, near_one), 1);
        }
        // (3 + 1)^(1/2) = 2 is an integer: [sqrt 3, 2) holds none
        assert_eq!(ps_indicator(3, g(0.5)), 0);
    }

    #[test]
    fn range_selection() {
        let t = sieve_primes(100).unwrap();
        let s = ps_primes_in(0.0, 50.0, g(0.9), &t).unwrap();
        let ps: Vec<u64> = s.primes().collect();
        assert_eq!(&ps[..5], &[2, 3, 5, 7, 11]);
        assert!(!s.contains(13));
        for &p in &ps {
            assert_eq!(ps_indicator(p, g(0.9)), 1);
        }

        let all = ps_primes_in(0.0, 50.0, g(0.999_999), &t).unwrap();
        assert_eq!(all.primes().collect::<Vec<_>>(), t.range(0.0, 50.0));

        assert!(ps_primes_in(10.0, 10.0, g(0.9), &t).unwrap().is_empty());
        assert!(ps_primes_in(0.0, 101.0, g(0.9), &t).is_err());
    }

    #[test]
    fn oracle_small_cases() {
        let t = sieve_primes(50).unwrap();
        let a = ps_enumerate_oracle(50, g(0.9));
        let b = ps_primes_in(0.0, 50.0, g(0.9), &t).unwrap();
        assert_eq!(a.primes().collect::<Vec<_>>(), b.primes().collect::<Vec<_>>());

        // [n^2] = n^2 is never prime
        assert!(ps_enumerate_oracle(10, g(0.5)).is_empty());
        // 2 = [2^(1/gamma)] iff 2^(1/gamma) < 3, i.e. gamma > log 2 / log 3
        assert_eq!(ps_enumerate_oracle(2, g(0.9)).primes().collect::<Vec<_>>(), [2]);
        assert!(ps_enumerate_oracle(2, g(0.6)).is_empty());
    }

    #[test]
    fn weights() {
        let e = PsPrime::new(101, g(0.9));
        assert!((e.weight_w - libm::pow(101.0, 0.1)).abs() < 1e-14);
        assert!((e.weight() - libm::pow(101.0, 0.1) * libm::log(101.0)).abs() < 1e-13);
    }
}
