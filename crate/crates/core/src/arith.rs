//! Prime tables, factorization and the elementary arithmetic functions.
//!
//! Everything above the sieve limit falls back to trial division by the
//! stored primes, so `factorize` accepts any `n <= limit^2`.

use crate::error::{Error, Result};

/// Smallest-prime-factor table and prime list up to `limit`.
///
/// Immutable after construction; share it by reference across threads.
#[derive(Debug, Clone)]
pub struct PrimeTables {
    limit: u64,
    spf: Vec<u32>,
    primes: Vec<u64>,
}

pub const DEFAULT_PRIME_LIMIT: u64 = 10_000_000;

impl PrimeTables {
    /// Linear sieve. `limit` must fit in `u32`.
    pub fn new(limit: u64) -> Result<Self> {
        if limit < 2 {
            return Err(Error::domain(format!(
                "prime table limit {limit} must be at least 2"
            )));
        }
        if limit > u32::MAX as u64 {
            return Err(Error::domain(format!(
                "prime table limit {limit} exceeds 32-bit range"
            )));
        }
        let n = limit as usize;
        let mut spf = vec![0u32; n + 1];
        let mut primes: Vec<u64> = Vec::with_capacity(estimate_prime_count(limit));
        for i in 2..=n {
            if spf[i] == 0 {
                spf[i] = i as u32;
                primes.push(i as u64);
            }
            let si = spf[i] as u64;
            for &p in &primes {
                if p > si {
                    break;
                }
                let m = i as u64 * p;
                if m > limit {
                    break;
                }
                spf[m as usize] = p as u32;
            }
        }
        Ok(PrimeTables { limit, spf, primes })
    }

    pub fn limit(&self) -> u64 {
        self.limit
    }

    /// All primes `<= limit`, increasing.
    pub fn primes(&self) -> &[u64] {
        &self.primes
    }

    /// Primes `p` with `lower < p <= upper` (reals), clipped to the table.
    pub fn primes_in(&self, lower: f64, upper: f64) -> &[u64] {
        let lo = self.primes.partition_point(|&p| (p as f64) <= lower);
        let hi = self.primes.partition_point(|&p| (p as f64) <= upper);
        if hi <= lo {
            &[]
        } else {
            &self.primes[lo..hi]
        }
    }

    /// Primes `p < bound` (strict).
    pub fn primes_below(&self, bound: f64) -> &[u64] {
        let hi = self.primes.partition_point(|&p| (p as f64) < bound);
        &self.primes[..hi]
    }

    /// Least prime factor of `2 <= n <= limit`.
    pub fn smallest_prime_factor(&self, n: u64) -> Option<u64> {
        if n < 2 || n > self.limit {
            None
        } else {
            Some(self.spf[n as usize] as u64)
        }
    }

    pub fn is_prime(&self, n: u64) -> bool {
        if n < 2 {
            return false;
        }
        if n <= self.limit {
            return self.spf[n as usize] as u64 == n;
        }
        for &p in &self.primes {
            if p * p > n {
                return true;
            }
            if n % p == 0 {
                return false;
            }
        }
        // beyond limit^2: keep trial dividing past the table
        let mut d = self.limit | 1;
        while d.saturating_mul(d) <= n {
            if n % d == 0 {
                return false;
            }
            d += 2;
        }
        true
    }

    /// Canonical prime-power decomposition of `1 <= n <= limit^2`.
    pub fn factorize(&self, n: u64) -> Result<FactoredInteger> {
        if n == 0 {
            return Err(Error::domain("cannot factorize 0"));
        }
        if (n as u128) > (self.limit as u128) * (self.limit as u128) {
            return Err(Error::domain(format!(
                "{n} exceeds the supported range limit^2 = {}^2",
                self.limit
            )));
        }
        let mut factors: Vec<(u64, u32)> = Vec::new();
        let mut m = n;
        if m > self.limit {
            for &p in &self.primes {
                if p * p > m {
                    break;
                }
                if m % p == 0 {
                    let mut e = 0;
                    while m % p == 0 {
                        m /= p;
                        e += 1;
                    }
                    factors.push((p, e));
                    if m <= self.limit {
                        break;
                    }
                }
            }
            if m > self.limit {
                // no prime factor <= sqrt(m) remains
                factors.push((m, 1));
                m = 1;
            }
        }
        while m > 1 {
            let p = self.spf[m as usize] as u64;
            let mut e = 0;
            while m % p == 0 {
                m /= p;
                e += 1;
            }
            factors.push((p, e));
        }
        factors.sort_unstable_by_key(|&(p, _)| p);
        Ok(FactoredInteger { value: n, factors })
    }
}

fn estimate_prime_count(limit: u64) -> usize {
    let x = limit as f64;
    if x < 17.0 {
        8
    } else {
        (1.26 * x / x.ln()) as usize
    }
}

/// A positive integer together with its prime-power decomposition.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FactoredInteger {
    value: u64,
    factors: Vec<(u64, u32)>,
}

impl FactoredInteger {
    pub fn one() -> Self {
        FactoredInteger {
            value: 1,
            factors: Vec::new(),
        }
    }

    /// Builds from `(prime, exponent)` pairs. Primes must be strictly
    /// increasing with positive exponents; primality itself is not checked.
    pub fn from_factors(factors: Vec<(u64, u32)>) -> Result<Self> {
        let mut value: u64 = 1;
        let mut last = 1u64;
        for &(p, e) in &factors {
            if p <= last || e == 0 {
                return Err(Error::domain(format!(
                    "malformed factorization {factors:?}"
                )));
            }
            last = p;
            for _ in 0..e {
                value = value
                    .checked_mul(p)
                    .ok_or_else(|| Error::domain("factorization overflows u64"))?;
            }
        }
        Ok(FactoredInteger { value, factors })
    }

    pub fn value(&self) -> u64 {
        self.value
    }

    pub fn factors(&self) -> &[(u64, u32)] {
        &self.factors
    }

    /// Ω(n): prime factors counted with multiplicity.
    pub fn big_omega(&self) -> u32 {
        self.factors.iter().map(|&(_, e)| e).sum()
    }

    /// ω(n): distinct prime factors.
    pub fn omega(&self) -> usize {
        self.factors.len()
    }

    /// P⁺(n), with P⁺(1) = 1.
    pub fn largest_prime(&self) -> u64 {
        self.factors.last().map_or(1, |&(p, _)| p)
    }

    /// P⁻(n), or `None` for n = 1 (P⁻(1) = +∞).
    pub fn smallest_prime(&self) -> Option<u64> {
        self.factors.first().map(|&(p, _)| p)
    }

    /// P⁻(n) as a real, +∞ for n = 1.
    pub fn smallest_prime_real(&self) -> f64 {
        self.smallest_prime().map_or(f64::INFINITY, |p| p as f64)
    }

    pub fn valuation(&self, p: u64) -> u32 {
        self.factors
            .iter()
            .find(|&&(q, _)| q == p)
            .map_or(0, |&(_, e)| e)
    }

    pub fn is_squarefree(&self) -> bool {
        self.factors.iter().all(|&(_, e)| e == 1)
    }

    /// Möbius function.
    pub fn mobius(&self) -> i8 {
        if !self.is_squarefree() {
            0
        } else if self.factors.len() % 2 == 0 {
            1
        } else {
            -1
        }
    }

    /// All divisors, unsorted.
    pub fn divisors(&self) -> Vec<u64> {
        let mut divs = vec![1u64];
        for &(p, e) in &self.factors {
            let len = divs.len();
            let mut pk = 1u64;
            for _ in 0..e {
                pk *= p;
                for i in 0..len {
                    divs.push(divs[i] * pk);
                }
            }
        }
        divs
    }

    /// Divisors not exceeding `bound`.
    pub fn divisors_up_to(&self, bound: u64) -> Vec<u64> {
        let mut divs = vec![1u64];
        for &(p, e) in &self.factors {
            let len = divs.len();
            for i in 0..len {
                let mut d = divs[i];
                for _ in 0..e {
                    match d.checked_mul(p) {
                        Some(next) if next <= bound => {
                            d = next;
                            divs.push(d);
                        }
                        _ => break,
                    }
                }
            }
        }
        divs
    }
}

/// ψ_β(d), the multiplicative function with Σ_{d|m} ψ_β(d) = m^β.
///
/// On prime powers ψ_β(p^k) = p^{βk} − p^{β(k−1)}.
pub fn psi_beta(d: &FactoredInteger, beta: f64) -> f64 {
    d.factors()
        .iter()
        .map(|&(p, k)| {
            let lp = (p as f64).ln();
            // p^{β(k-1)} (p^β - 1), with expm1 for small β log p
            (beta * (k - 1) as f64 * lp).exp() * (beta * lp).exp_m1()
        })
        .product()
}

/// ∏ (1 − h(p)) over primes `lower < p <= upper`, accumulated as a sum
/// of logarithms.
pub fn mertens_product(
    tables: &PrimeTables,
    lower: f64,
    upper: f64,
    h: impl Fn(u64) -> f64,
) -> Result<f64> {
    Ok(mertens_log(tables, lower, upper, |_| true, h)?.exp())
}

/// Σ log(1 − h(p)) over primes `lower < p <= upper` accepted by `keep`.
pub fn mertens_log(
    tables: &PrimeTables,
    lower: f64,
    upper: f64,
    keep: impl Fn(u64) -> bool,
    h: impl Fn(u64) -> f64,
) -> Result<f64> {
    if upper.floor() > tables.limit() as f64 {
        return Err(Error::domain(format!(
            "product range up to {upper} exceeds the prime table limit {}",
            tables.limit()
        )));
    }
    let mut acc = 0.0;
    for &p in tables.primes_in(lower, upper) {
        if !keep(p) {
            continue;
        }
        let hp = h(p);
        if !(hp < 1.0) || hp.is_nan() {
            return Err(Error::DegenerateProduct {
                prime: p,
                value: hp,
            });
        }
        acc += (-hp).ln_1p();
    }
    Ok(acc)
}

/// log log x, defined for x >= 16 only.
pub fn log_log(x: f64) -> Result<f64> {
    if !(x >= 16.0) {
        return Err(Error::domain(format!(
            "iterated logarithm needs x >= 16, got {x}"
        )));
    }
    Ok(x.ln().ln())
}
