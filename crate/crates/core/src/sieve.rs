//! Combinatorial β-sieve weights and the sums built from them.

use std::fmt;

use rayon::prelude::*;

use crate::arith::{mertens_log, PrimeTables};
use crate::error::{Error, Result};
use crate::families::WeightedFamily;

/// Largest number of nonzero weights a table may hold.
pub const MAX_WEIGHTS: usize = 20_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Upper,
    Lower,
}

impl Side {
    fn truncates_at(self, depth: usize) -> bool {
        match self {
            Side::Upper => depth % 2 == 1,
            Side::Lower => depth % 2 == 0,
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Upper => "upper",
            Side::Lower => "lower",
        })
    }
}

/// `2⌈κ⌉ + 1`.
pub fn default_beta(kappa: f64) -> u32 {
    2 * kappa.ceil() as u32 + 1
}

#[derive(Debug, Clone, Copy)]
struct Node {
    m: u64,
    prime: u32,
    parent: u32,
    depth: u8,
}

/// Sparse `λ±` table. Only squarefree `m | P(z)` with `λ_m ≠ 0` are stored.
#[derive(Debug, Clone)]
pub struct SieveWeights {
    kappa: f64,
    y: f64,
    z: f64,
    side: Side,
    beta: u32,
    primes: Vec<u64>,
    // parents before children; index 0 is m = 1
    nodes: Vec<Node>,
    sorted: Vec<(u64, i8)>,
}

impl SieveWeights {
    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    pub fn z(&self) -> f64 {
        self.z
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn beta(&self) -> u32 {
        self.beta
    }

    /// `σ = log y / log z`.
    pub fn sigma(&self) -> f64 {
        self.y.ln() / self.z.ln()
    }

    /// Sifting primes, all `p < z`.
    pub fn primes(&self) -> &[u64] {
        &self.primes
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn lambda(&self, m: u64) -> f64 {
        match self.sorted.binary_search_by_key(&m, |e| e.0) {
            Ok(i) => self.sorted[i].1 as f64,
            Err(_) => 0.0,
        }
    }

    /// Nonzero weights `(m, λ_m)` in increasing `m`.
    pub fn iter(&self) -> impl Iterator<Item = (u64, f64)> + '_ {
        self.sorted.iter().map(|&(m, s)| (m, s as f64))
    }

    /// `Σ_m λ_m f(m)` for a multiplicative `f` given on primes.
    pub fn weighted_sum(&self, f: impl Fn(u64) -> f64) -> f64 {
        let mut fm = vec![0.0f64; self.nodes.len()];
        fm[0] = 1.0;
        let mut sum = 1.0;
        for (i, node) in self.nodes.iter().enumerate().skip(1) {
            fm[i] = fm[node.parent as usize] * f(self.primes[node.prime as usize]);
            let sign = if node.depth % 2 == 0 { 1.0 } else { -1.0 };
            sum += sign * fm[i];
        }
        sum
    }
}

/// Builds `λ±` with `β_s = 2⌈κ⌉ + 1`.
pub fn build_weights(
    kappa: f64,
    y: f64,
    z: f64,
    side: Side,
    tables: &PrimeTables,
) -> Result<SieveWeights> {
    build_weights_with_beta(kappa, y, z, side, default_beta(kappa), tables)
}

/// `λ_m = μ(m)` for `m = p₁ > ⋯ > p_r`, all `p_i < z`, when
/// `p₁⋯p_{l−1}p_l^{β+1} < y` for every odd (upper) or even (lower) `l ≤ r`.
pub fn build_weights_with_beta(
    kappa: f64,
    y: f64,
    z: f64,
    side: Side,
    beta: u32,
    tables: &PrimeTables,
) -> Result<SieveWeights> {
    if !(kappa > 0.0 && kappa.is_finite()) {
        return Err(Error::domain(format!("kappa = {kappa} must be positive")));
    }
    if !(y > 1.0) || !y.is_finite() {
        return Err(Error::domain(format!("y = {y} must exceed 1")));
    }
    if !(z > 1.0) || !z.is_finite() {
        return Err(Error::domain(format!("z = {z} must exceed 1")));
    }
    if z.ceil() > tables.limit() as f64 {
        return Err(Error::domain(format!(
            "z = {z} exceeds the prime table limit {}",
            tables.limit()
        )));
    }
    let primes = tables.primes_below(z).to_vec();
    if !primes.is_empty() && y < z {
        return Err(Error::domain(format!("y = {y} must be at least z = {z}")));
    }
    let mut nodes = vec![Node {
        m: 1,
        prime: u32::MAX,
        parent: 0,
        depth: 0,
    }];
    let exp = beta as i32 + 1;
    // explicit stack of (node index, exclusive upper prime index)
    let mut stack: Vec<(usize, usize)> = vec![(0, primes.len())];
    while let Some((idx, bound)) = stack.pop() {
        let Node { m, depth, .. } = nodes[idx];
        let next = depth as usize + 1;
        let limit = if side.truncates_at(next) {
            let cap = (y / m as f64).powf(1.0 / exp as f64);
            let mut k = primes[..bound].partition_point(|&p| (p as f64) <= cap);
            while k > 0 && (m as f64) * (primes[k - 1] as f64).powi(exp) >= y {
                k -= 1;
            }
            while k < bound && (m as f64) * (primes[k] as f64).powi(exp) < y {
                k += 1;
            }
            k
        } else {
            bound
        };
        let first_child = nodes.len();
        for k in (0..limit).rev() {
            nodes.push(Node {
                m: m * primes[k],
                prime: k as u32,
                parent: idx as u32,
                depth: next as u8,
            });
            if nodes.len() > MAX_WEIGHTS {
                return Err(Error::domain(format!(
                    "weight table exceeds {MAX_WEIGHTS} entries (y = {y}, z = {z})"
                )));
            }
        }
        for (offset, k) in (0..limit).rev().enumerate() {
            if k > 0 {
                stack.push((first_child + offset, k));
            }
        }
    }
    let mut sorted: Vec<(u64, i8)> = nodes
        .iter()
        .map(|n| (n.m, if n.depth % 2 == 0 { 1 } else { -1 }))
        .collect();
    sorted.sort_unstable_by_key(|e| e.0);
    Ok(SieveWeights {
        kappa,
        y,
        z,
        side,
        beta,
        primes,
        nodes,
        sorted,
    })
}

/// Outcome of [`verify_weights`].
#[derive(Debug, Clone, PartialEq)]
pub struct SieveCheck {
    pub side: Side,
    pub n_max: u64,
    pub lambda_one_ok: bool,
    pub bounded_violations: usize,
    pub support_violations: usize,
    pub sandwich_violations: usize,
    pub coprime_violations: usize,
    pub first_witness: Option<u64>,
}

impl SieveCheck {
    pub fn passed(&self) -> bool {
        self.lambda_one_ok
            && self.bounded_violations == 0
            && self.support_violations == 0
            && self.sandwich_violations == 0
            && self.coprime_violations == 0
    }
}

/// Checks `λ₁ = 1`, `|λ_m| ≤ 1`, the support cutoff, the sandwich inequality and
/// coprime exactness for every `n ≤ n_max` by exhaustive divisor sums.
pub fn verify_weights(w: &SieveWeights, n_max: u64, tables: &PrimeTables) -> Result<SieveCheck> {
    if n_max > tables.limit() {
        return Err(Error::domain(format!(
            "n_max = {n_max} exceeds the prime table limit {}",
            tables.limit()
        )));
    }
    let lambda_one_ok = w.lambda(1) == 1.0;
    let bounded_violations = w.iter().filter(|&(m, l)| m > 1 && l.abs() > 1.0).count();
    let support_violations = w.iter().filter(|&(m, _)| m as f64 >= w.y).count();

    let weights: Vec<(u64, i32)> = w.sorted.iter().map(|&(m, s)| (m, s as i32)).collect();
    let chunk = 8192u64;
    let starts: Vec<u64> = (0..n_max.div_ceil(chunk)).map(|i| 1 + i * chunk).collect();
    let results: Vec<(usize, usize, Option<u64>)> = starts
        .par_iter()
        .map(|&lo| {
            let hi = (lo + chunk - 1).min(n_max);
            let mut sums = vec![0i32; (hi - lo + 1) as usize];
            for &(m, s) in weights.iter().take_while(|&&(m, _)| m <= hi) {
                let mut n = lo.div_ceil(m) * m;
                while n <= hi {
                    sums[(n - lo) as usize] += s;
                    n += m;
                }
            }
            let (mut sandwich, mut coprime, mut witness) = (0usize, 0usize, None);
            for (i, &s) in sums.iter().enumerate() {
                let n = lo + i as u64;
                if n == 1 {
                    continue;
                }
                let spf = tables.smallest_prime_factor(n).expect("n within table");
                let indicator = (spf as f64 >= w.z) as i32;
                let ok = match w.side {
                    Side::Upper => s >= indicator,
                    Side::Lower => s <= indicator,
                };
                if !ok {
                    sandwich += 1;
                    witness.get_or_insert(n);
                }
                if indicator == 1 && s != 1 {
                    coprime += 1;
                    witness.get_or_insert(n);
                }
            }
            (sandwich, coprime, witness)
        })
        .collect();
    let sandwich_violations = results.iter().map(|r| r.0).sum();
    let coprime_violations = results.iter().map(|r| r.1).sum();
    let first_witness = results.iter().find_map(|r| r.2);
    Ok(SieveCheck {
        side: w.side,
        n_max,
        lambda_one_ok,
        bounded_violations,
        support_violations,
        sandwich_violations,
        coprime_violations,
        first_witness,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Accuracy {
    pub sum: f64,
    pub reference: f64,
    pub relative_error: f64,
}

/// Compares `Σ λ_m f(m)` with `∏_{p<z}(1 − f(p))`.
pub fn main_term_accuracy(w: &SieveWeights, f: impl Fn(u64) -> f64) -> Result<Accuracy> {
    let mut log_ref = 0.0;
    for &p in &w.primes {
        let fp = f(p);
        if !(0.0..1.0).contains(&fp) {
            return Err(Error::domain(format!("f({p}) = {fp} must lie in [0, 1)")));
        }
        log_ref += (-fp).ln_1p();
    }
    let reference = log_ref.exp();
    let sum = w.weighted_sum(&f);
    Ok(Accuracy {
        sum,
        reference,
        relative_error: (sum / reference - 1.0).abs(),
    })
}

/// `1 − e^{1+9κ−s} K¹⁰`, the lower-sieve factor at sifting ratio `s`.
pub fn lower_sieve_factor(kappa: f64, s: f64, k: f64) -> f64 {
    1.0 - (1.0 + 9.0 * kappa - s).exp() * k.powi(10)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SiftedSum {
    pub exact: f64,
    pub bound: f64,
    pub ratio: f64,
    pub gamma: f64,
    pub mass: f64,
    pub cutoff: f64,
    /// Whether `log M > 4KΓ` holds; the bound is reported either way.
    pub log_condition: bool,
}

/// Exact weight of `a` with `b | c_a` and no prime `p ≤ M^{ξ₄}`, `p ∤ b`, dividing `c_a`,
/// next to `Γ^κ M h(b) ∏_{B<p≤M, p∤b}(1 − h(p)) + M^{1−ξ/2}`.
pub fn sifted_sum_upper(
    fam: &WeightedFamily,
    b: u64,
    t: f64,
    xi4: f64,
    xi3: Option<f64>,
    tables: &PrimeTables,
) -> Result<SiftedSum> {
    let model = fam.model();
    let theta = model.theta();
    let xi3 = xi3.unwrap_or(theta / 3.0);
    if b == 0 {
        return Err(Error::domain("b must be a positive integer"));
    }
    if !(xi4 > 0.0 && xi4.is_finite()) {
        return Err(Error::domain(format!("xi4 = {xi4} must be positive")));
    }
    if !(xi3 > 0.0 && xi3 < theta) {
        return Err(Error::domain(format!(
            "xi3 = {xi3} violates 0 < xi3 < theta = {theta}"
        )));
    }
    let support = fam.enumerate(t)?;
    let m = model.mass(t, &support);
    if !(m > 1.0 && m.is_finite()) {
        return Err(Error::domain(format!("mass M(T) = {m} must exceed 1")));
    }
    if b as f64 > m.powf(xi3) * (1.0 + 1e-12) {
        return Err(Error::domain(format!(
            "b = {b} violates b <= M^xi3 = {}",
            m.powf(xi3)
        )));
    }
    let h = model.density_at(t);
    let params = *h.params();
    let gamma = (1.0 / xi4).max(1.0 / (theta - xi3)).max(1.0 / model.xi());
    let cutoff = m.powf(xi4) * (1.0 + 1e-12);

    let mut exact = 0.0;
    for (w, c) in support.iter() {
        if c % b != 0 {
            continue;
        }
        let fc = tables.factorize(c)?;
        let sifted = fc
            .factors()
            .iter()
            .all(|&(p, _)| p as f64 > cutoff || b % p == 0);
        if sifted {
            exact += w;
        }
    }
    let hb = h.eval(&tables.factorize(b)?);
    let log_prod = mertens_log(tables, params.b, m, |p| b % p != 0, |p| h.at_prime(p))?;
    let bound = gamma.powf(params.kappa) * m * hb * log_prod.exp() + m.powf(1.0 - model.xi() / 2.0);
    Ok(SiftedSum {
        exact,
        bound,
        ratio: exact / bound,
        gamma,
        mass: m,
        cutoff: m.powf(xi4),
        log_condition: m.ln() > 4.0 * params.k * gamma,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::EquidistModel;

    fn tables() -> PrimeTables {
        PrimeTables::new(1_000_000).unwrap()
    }

    #[test]
    fn trivial_tables() {
        let t = tables();
        let w = build_weights(1.0, 10.0, 2.0, Side::Upper, &t).unwrap();
        assert_eq!(w.iter().collect::<Vec<_>>(), vec![(1, 1.0)]);
        assert!(build_weights(1.0, 1.0, 5.0, Side::Upper, &t).is_err());
        assert!(build_weights(1.0, 10.0, 1.0, Side::Upper, &t).is_err());
        assert!(build_weights(1.0, 10.0, 50.0, Side::Upper, &t).is_err());
    }

    #[test]
    fn weights_match_definition() {
        let t = tables();
        for side in [Side::Upper, Side::Lower] {
            let w = build_weights(1.0, 125.0, 5.0, side, &t).unwrap();
            // brute force over squarefree divisors of 2·3
            for m in [1u64, 2, 3, 6] {
                let mut ps: Vec<u64> = [3u64, 2].into_iter().filter(|p| m % p == 0).collect();
                ps.sort_unstable_by(|a, b| b.cmp(a));
                let mut prod = 1u64;
                let mut ok = true;
                for (i, &p) in ps.iter().enumerate() {
                    if side.truncates_at(i + 1) && (prod * p.pow(4)) as f64 >= 125.0 {
                        ok = false;
                    }
                    prod *= p;
                }
                let expected = if ok {
                    (-1f64).powi(ps.len() as i32)
                } else {
                    0.0
                };
                assert_eq!(w.lambda(m), expected, "m = {m}, {side}");
            }
            let s: f64 = [1u64, 2, 3, 5, 6, 10, 15, 30]
                .iter()
                .map(|&d| w.lambda(d))
                .sum();
            match side {
                Side::Upper => assert!(s >= 0.0),
                Side::Lower => assert!(s <= 0.0),
            }
        }
    }

    #[test]
    fn small_grid_properties() {
        let t = tables();
        for side in [Side::Upper, Side::Lower] {
            let w = build_weights(1.0, 1000.0, 10.0, side, &t).unwrap();
            let r = verify_weights(&w, 20_000, &t).unwrap();
            assert!(r.passed(), "{r:?}");
        }
    }

    #[test]
    fn accuracy_improves_with_sigma() {
        let t = tables();
        let w0 = build_weights(1.0, 1e4, 100.0, Side::Upper, &t).unwrap();
        let zero = main_term_accuracy(&w0, |_| 0.0).unwrap();
        assert_eq!(
            (zero.sum, zero.reference, zero.relative_error),
            (1.0, 1.0, 0.0)
        );
        let e2 = main_term_accuracy(&w0, |p| 1.0 / p as f64)
            .unwrap()
            .relative_error;
        let w3 = build_weights(1.0, 1e6, 100.0, Side::Upper, &t).unwrap();
        let e3 = main_term_accuracy(&w3, |p| 1.0 / p as f64)
            .unwrap()
            .relative_error;
        assert!(e3 < e2);
        assert!(main_term_accuracy(&w3, |_| 1.0).is_err());
        let lw = build_weights(1.0, 1e6, 100.0, Side::Lower, &t).unwrap();
        let acc = main_term_accuracy(&lw, |p| 1.0 / p as f64).unwrap();
        assert!(acc.sum >= lower_sieve_factor(1.0, lw.sigma(), 1.0) * acc.reference);
    }

    #[test]
    fn weighted_sum_matches_lookup() {
        let t = tables();
        let w = build_weights(2.0, 5e4, 30.0, Side::Lower, &t).unwrap();
        let direct: f64 = w.iter().map(|(m, l)| l / m as f64).sum();
        assert!((w.weighted_sum(|p| 1.0 / p as f64) - direct).abs() < 1e-12);
        let plain: f64 = w.iter().map(|(_, l)| l).sum();
        assert_eq!(w.weighted_sum(|_| 1.0), plain);
    }

    #[test]
    fn sifted_sum_examples() {
        let t = tables();
        let fam = WeightedFamily::identity(EquidistModel::identity_standard());
        let r = sifted_sum_upper(&fam, 1, 1e4, 0.25, None, &t).unwrap();
        let oracle = (1..=10_000u64)
            .filter(|n| [2, 3, 5, 7].iter().all(|p| n % p != 0))
            .count();
        assert_eq!(r.exact, oracle as f64);
        let r = sifted_sum_upper(&fam, 1, 1e4, 0.01, None, &t).unwrap();
        assert_eq!(r.exact, 1e4);
        let r = sifted_sum_upper(&fam, 3, 1e6, 1.0 / 3.0, None, &t).unwrap();
        assert!(r.ratio.is_finite() && r.ratio < 5.0);
        assert!(sifted_sum_upper(&fam, 1000, 1e4, 0.25, None, &t).is_err());
        assert!(sifted_sum_upper(&fam, 1, 1e4, 0.25, Some(0.6), &t).is_err());
    }
}
