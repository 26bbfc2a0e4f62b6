//! Arithmetic functions and finite-range validators for the density class
//! 𝒟(κ, λ₁, λ₂, B, K) and the growth class ℳ(A, ε, C).
//!
//! Membership is only ever certified over the ranges a report names.

use std::fmt;
use std::sync::Arc;

use crate::arith::{FactoredInteger, PrimeTables};
use crate::error::{Error, Result};

/// Relative slack tolerated before an inequality counts as violated.
pub const SLACK_TOLERANCE: f64 = 1e-12;

pub type PrimePowerRule = Arc<dyn Fn(u64, u32) -> f64 + Send + Sync>;
pub type PointwiseRule = Arc<dyn Fn(&FactoredInteger) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum FunctionKind {
    /// Determined by its values on prime powers; f(1) = 1.
    Multiplicative(PrimePowerRule),
    Pointwise(PointwiseRule),
}

/// A nonnegative function on the positive integers.
#[derive(Clone)]
pub struct ArithmeticFunction {
    name: String,
    kind: FunctionKind,
}

impl fmt::Debug for ArithmeticFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            FunctionKind::Multiplicative(_) => "multiplicative",
            FunctionKind::Pointwise(_) => "pointwise",
        };
        f.debug_struct("ArithmeticFunction")
            .field("name", &self.name)
            .field("kind", &kind)
            .finish()
    }
}

impl ArithmeticFunction {
    pub fn multiplicative(
        name: impl Into<String>,
        rule: impl Fn(u64, u32) -> f64 + Send + Sync + 'static,
    ) -> Self {
        ArithmeticFunction {
            name: name.into(),
            kind: FunctionKind::Multiplicative(Arc::new(rule)),
        }
    }

    pub fn pointwise(
        name: impl Into<String>,
        eval: impl Fn(&FactoredInteger) -> f64 + Send + Sync + 'static,
    ) -> Self {
        ArithmeticFunction {
            name: name.into(),
            kind: FunctionKind::Pointwise(Arc::new(eval)),
        }
    }

    /// The constant function 1.
    pub fn one() -> Self {
        Self::multiplicative("one", |_, _| 1.0)
    }

    /// τ, the number of divisors.
    pub fn divisor_count() -> Self {
        Self::multiplicative("tau", |_, e| (e + 1) as f64)
    }

    /// μ², the indicator of squarefree integers.
    pub fn mu_squared() -> Self {
        Self::multiplicative("mu2", |_, e| if e == 1 { 1.0 } else { 0.0 })
    }

    /// n ↦ base^{Ω(n)}.
    pub fn big_omega_power(base: f64) -> Self {
        Self::multiplicative(format!("omega_power({base})"), move |_, e| {
            base.powi(e as i32)
        })
    }

    /// f(pᵉ) = values[e−1], the last entry repeating for larger e.
    pub fn exponent_table(name: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() || values.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::domain(
                "exponent table needs finite nonnegative entries",
            ));
        }
        Ok(Self::multiplicative(name, move |_, e| {
            values[(e as usize - 1).min(values.len() - 1)]
        }))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> &FunctionKind {
        &self.kind
    }

    pub fn is_multiplicative(&self) -> bool {
        matches!(self.kind, FunctionKind::Multiplicative(_))
    }

    /// Value at a prime power, available for multiplicative functions.
    pub fn prime_power(&self, p: u64, e: u32) -> Option<f64> {
        match &self.kind {
            FunctionKind::Multiplicative(rule) => Some(rule(p, e)),
            FunctionKind::Pointwise(_) => None,
        }
    }

    pub fn eval(&self, n: &FactoredInteger) -> f64 {
        match &self.kind {
            FunctionKind::Multiplicative(rule) => {
                n.factors().iter().map(|&(p, e)| rule(p, e)).product()
            }
            FunctionKind::Pointwise(eval) => eval(n),
        }
    }

    pub fn eval_int(&self, n: u64, tables: &PrimeTables) -> Result<f64> {
        Ok(self.eval(&tables.factorize(n)?))
    }

    /// Values f(0..=n_max) (index 0 holds 0) from the prime tables.
    pub fn table(&self, tables: &PrimeTables, n_max: u64) -> Result<FunctionTable> {
        match &self.kind {
            FunctionKind::Multiplicative(rule) => {
                multiplicative_table(tables, n_max, |p, e| rule(p, e))
            }
            FunctionKind::Pointwise(eval) => {
                check_table_range(tables, n_max)?;
                let mut values = Vec::with_capacity(n_max as usize + 1);
                values.push(0.0);
                for n in 1..=n_max {
                    values.push(eval(&tables.factorize(n)?));
                }
                Ok(FunctionTable { values })
            }
        }
    }
}

fn check_table_range(tables: &PrimeTables, n_max: u64) -> Result<()> {
    if n_max > tables.limit() {
        return Err(Error::domain(format!(
            "table size {n_max} exceeds the prime table limit {}",
            tables.limit()
        )));
    }
    Ok(())
}

/// Flat table of function values indexed by n.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionTable {
    values: Vec<f64>,
}

impl FunctionTable {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.len() <= 1
    }

    pub fn max_index(&self) -> u64 {
        self.values.len() as u64 - 1
    }

    pub fn get(&self, n: u64) -> Option<f64> {
        self.values.get(n as usize).copied()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Multiplicative sieve: f(n) = f(n / pᵉ)·rule(p, e) with p = spf(n).
pub(crate) fn multiplicative_table(
    tables: &PrimeTables,
    n_max: u64,
    rule: impl Fn(u64, u32) -> f64,
) -> Result<FunctionTable> {
    check_table_range(tables, n_max)?;
    let n = n_max as usize;
    let mut values = vec![0.0f64; n + 1];
    let mut cofactor = vec![0u32; n + 1];
    let mut exponent = vec![0u8; n + 1];
    if n >= 1 {
        values[1] = 1.0;
        cofactor[1] = 1;
    }
    for i in 2..=n {
        let p = tables
            .smallest_prime_factor(i as u64)
            .expect("within table") as usize;
        let q = i / p;
        if q % p == 0 {
            exponent[i] = exponent[q] + 1;
            cofactor[i] = cofactor[q];
        } else {
            exponent[i] = 1;
            cofactor[i] = q as u32;
        }
        values[i] = values[cofactor[i] as usize] * rule(p as u64, exponent[i] as u32);
    }
    Ok(FunctionTable { values })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityParams {
    pub kappa: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub b: f64,
    pub k: f64,
}

impl DensityParams {
    pub fn new(kappa: f64, lambda1: f64, lambda2: f64, b: f64, k: f64) -> Result<Self> {
        let p = DensityParams {
            kappa,
            lambda1,
            lambda2,
            b,
            k,
        };
        p.validate()?;
        Ok(p)
    }

    /// All parameters positive, except λ₂ which may be 0.
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("kappa", self.kappa),
            ("lambda1", self.lambda1),
            ("B", self.b),
            ("K", self.k),
        ];
        for (name, v) in fields {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::domain(format!(
                    "density parameter {name} = {v} must be positive"
                )));
            }
        }
        if !(self.lambda2 >= 0.0) || !self.lambda2.is_finite() {
            return Err(Error::domain(format!(
                "density parameter lambda2 = {} must be nonnegative",
                self.lambda2
            )));
        }
        Ok(())
    }
}

/// A multiplicative density h together with its class parameters.
#[derive(Clone)]
pub struct DensityFunction {
    name: String,
    rule: PrimePowerRule,
    params: DensityParams,
}

impl fmt::Debug for DensityFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DensityFunction")
            .field("name", &self.name)
            .field("params", &self.params)
            .finish()
    }
}

impl DensityFunction {
    pub fn new(
        name: impl Into<String>,
        params: DensityParams,
        rule: impl Fn(u64, u32) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        params.validate()?;
        Ok(DensityFunction {
            name: name.into(),
            rule: Arc::new(rule),
            params,
        })
    }

    /// h(pᵉ) = p^{−e}, i.e. h(d) = 1/d.
    pub fn reciprocal(params: DensityParams) -> Result<Self> {
        Self::new("reciprocal", params, |p, e| (p as f64).powi(-(e as i32)))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn params(&self) -> &DensityParams {
        &self.params
    }

    pub fn with_params(&self, params: DensityParams) -> Result<Self> {
        params.validate()?;
        Ok(DensityFunction {
            name: self.name.clone(),
            rule: self.rule.clone(),
            params,
        })
    }

    pub fn prime_power(&self, p: u64, e: u32) -> f64 {
        (self.rule)(p, e)
    }

    pub fn at_prime(&self, p: u64) -> f64 {
        (self.rule)(p, 1)
    }

    pub fn eval(&self, n: &FactoredInteger) -> f64 {
        n.factors()
            .iter()
            .map(|&(p, e)| (self.rule)(p, e))
            .product()
    }

    pub fn table(&self, tables: &PrimeTables, n_max: u64) -> Result<FunctionTable> {
        multiplicative_table(tables, n_max, |p, e| (self.rule)(p, e))
    }

    pub fn as_function(&self) -> ArithmeticFunction {
        let rule = self.rule.clone();
        ArithmeticFunction::multiplicative(self.name.clone(), move |p, e| rule(p, e))
    }
}

/// Outcome of one inequality checked over a finite range.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionReport {
    pub condition: String,
    pub passed: bool,
    /// Largest observed lhs ÷ rhs; at most 1 when the condition holds.
    pub worst_slack: f64,
    /// Where `worst_slack` was attained.
    pub witness: Option<String>,
    pub violations: usize,
    pub checked_range: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassReport {
    pub conditions: Vec<ConditionReport>,
}

impl ClassReport {
    pub fn passed(&self) -> bool {
        self.conditions.iter().all(|c| c.passed)
    }

    pub fn condition(&self, name: &str) -> Option<&ConditionReport> {
        self.conditions.iter().find(|c| c.condition == name)
    }
}

/// Running maximum of slack values; ties keep the first witness seen.
struct SlackTracker {
    worst: f64,
    witness: Option<String>,
    violations: usize,
}

impl SlackTracker {
    fn new() -> Self {
        SlackTracker {
            worst: 0.0,
            witness: None,
            violations: 0,
        }
    }

    fn observe(&mut self, slack: f64, witness: impl FnOnce() -> String) {
        if !(slack <= 1.0 + SLACK_TOLERANCE) {
            self.violations += 1;
        }
        let worse = self.witness.is_none()
            || slack > self.worst
            || (slack.is_nan() && !self.worst.is_nan());
        if worse {
            self.worst = slack;
            self.witness = Some(witness());
        }
    }

    fn finish(self, condition: &str, checked_range: String) -> ConditionReport {
        ConditionReport {
            condition: condition.to_string(),
            passed: self.violations == 0,
            worst_slack: self.worst,
            witness: self.witness,
            violations: self.violations,
            checked_range,
        }
    }
}

/// Log-spaced (w, z) grid over {3, 10, 10², …, prime_limit}, w < z.
pub fn default_density_grid(prime_limit: u64) -> Vec<(f64, f64)> {
    let mut points = vec![3.0f64];
    let mut x = 10.0f64;
    while x < prime_limit as f64 {
        points.push(x);
        x *= 10.0;
    }
    if *points.last().unwrap() < prime_limit as f64 {
        points.push(prime_limit as f64);
    }
    let mut grid = Vec::new();
    for (i, &w) in points.iter().enumerate() {
        for &z in &points[i + 1..] {
            grid.push((w, z));
        }
    }
    grid
}

/// Checks the three density-class conditions of `h` over primes up to
/// `prime_limit`, exponents up to `exponent_limit` and the (w, z) grid.
///
/// Grid points with `w <= B` are skipped: the product condition only
/// constrains ranges above B.
pub fn check_density_class(
    h: &DensityFunction,
    tables: &PrimeTables,
    prime_limit: u64,
    exponent_limit: u32,
    grid: &[(f64, f64)],
) -> Result<ClassReport> {
    let params = h.params();
    if prime_limit > tables.limit() {
        return Err(Error::domain(format!(
            "prime limit {prime_limit} exceeds the prime table limit {}",
            tables.limit()
        )));
    }
    if exponent_limit == 0 {
        return Err(Error::domain("exponent limit must be at least 1"));
    }
    for &(w, z) in grid {
        if !(w < z) || z > prime_limit as f64 {
            return Err(Error::domain(format!(
                "grid point (w, z) = ({w}, {z}) must satisfy w < z <= {prime_limit}"
            )));
        }
    }
    let primes = tables.primes_in(0.0, prime_limit as f64);

    // (1.1) via prefix sums of −log(1 − h(p)); degenerate primes tracked apart.
    let mut prefix = Vec::with_capacity(primes.len() + 1);
    prefix.push(0.0f64);
    let mut degenerate: Vec<usize> = Vec::new();
    for (i, &p) in primes.iter().enumerate() {
        let hp = h.at_prime(p);
        let term = if hp < 1.0 {
            -(-hp).ln_1p()
        } else {
            degenerate.push(i);
            0.0
        };
        prefix.push(prefix[i] + term);
    }
    let mut product_cond = SlackTracker::new();
    let mut checked_cells = 0usize;
    for &(w, z) in grid {
        if w <= params.b {
            continue;
        }
        checked_cells += 1;
        // primes with w <= p < z
        let lo = primes.partition_point(|&p| (p as f64) < w);
        let hi = primes.partition_point(|&p| (p as f64) < z);
        let bound = (z.ln() / w.ln()).powf(params.kappa) * (1.0 + params.k / w.ln());
        let slack = match degenerate.iter().find(|&&i| i >= lo && i < hi) {
            Some(&i) => {
                let p = primes[i];
                product_cond.observe(f64::INFINITY, || format!("w={w}, z={z}, h({p})>=1"));
                continue;
            }
            None => (prefix[hi] - prefix[lo]).exp() / bound,
        };
        product_cond.observe(slack, || format!("w={w}, z={z}"));
    }

    let mut low_power = SlackTracker::new();
    let mut high_power = SlackTracker::new();
    for &p in primes {
        let lp = (p as f64).ln();
        for e in 1..=exponent_limit {
            let hv = h.prime_power(p, e);
            if !(hv >= 0.0) || !hv.is_finite() {
                return Err(Error::domain(format!(
                    "h({p}^{e}) = {hv} is not a nonnegative real"
                )));
            }
            if (p as f64) > params.b {
                let slack = hv / (params.b / p as f64);
                low_power.observe(slack, || format!("p={p}, e={e}"));
            }
            let bound = ((-(e as f64) * params.lambda1 + params.lambda2) * lp).exp();
            high_power.observe(hv / bound, || format!("p={p}, e={e}"));
        }
    }

    Ok(ClassReport {
        conditions: vec![
            product_cond.finish(
                "product",
                format!("{checked_cells} grid cells with B < w < z <= {prime_limit}"),
            ),
            low_power.finish(
                "low_power",
                format!("B < p <= {prime_limit}, e <= {exponent_limit}"),
            ),
            high_power.finish(
                "high_power",
                format!("p <= {prime_limit}, e <= {exponent_limit}"),
            ),
        ],
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthParams {
    pub a: f64,
    pub epsilon: f64,
    pub c: f64,
}

impl GrowthParams {
    pub fn new(a: f64, epsilon: f64, c: f64) -> Result<Self> {
        if !(a >= 1.0) || !(epsilon > 0.0) || !(c > 0.0) {
            return Err(Error::domain(format!(
                "growth parameters need A >= 1, epsilon > 0, C > 0 (got {a}, {epsilon}, {c})"
            )));
        }
        Ok(GrowthParams { a, epsilon, c })
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Exhaustive check of f(mn) <= f(m)·bound(n) over coprime m, n with
/// mn <= limit.
pub fn check_submultiplicative(
    f: &ArithmeticFunction,
    tables: &PrimeTables,
    limit: u64,
    condition: &str,
    bound: impl Fn(&FactoredInteger) -> f64,
) -> Result<ClassReport> {
    if limit < 2 {
        return Err(Error::domain("sample limit must be at least 2"));
    }
    let values = f.table(tables, limit)?;
    let bounds: Vec<f64> = std::iter::once(Ok(0.0))
        .chain((1..=limit).map(|n| tables.factorize(n).map(|fact| bound(&fact))))
        .collect::<Result<_>>()?;
    let mut tracker = SlackTracker::new();
    for m in 1..=limit {
        let fm = values.get(m).unwrap();
        for n in 1..=limit / m {
            if gcd(m, n) != 1 {
                continue;
            }
            let lhs = values.get(m * n).unwrap();
            let rhs = fm * bounds[n as usize];
            let ratio = if lhs == 0.0 {
                0.0
            } else if rhs == 0.0 {
                f64::INFINITY
            } else {
                lhs / rhs
            };
            tracker.observe(ratio, || format!("m={m}, n={n}"));
        }
    }
    Ok(ClassReport {
        conditions: vec![tracker.finish(condition, format!("coprime m, n with mn <= {limit}"))],
    })
}

/// Exhaustive check of f(mn) <= f(m)·min{A^{Ω(n)}, C n^ε} over coprime
/// pairs with mn <= sample_limit.
pub fn check_growth_class(
    f: &ArithmeticFunction,
    params: GrowthParams,
    tables: &PrimeTables,
    sample_limit: u64,
) -> Result<ClassReport> {
    check_submultiplicative(f, tables, sample_limit, "growth", |n| {
        let by_omega = params.a.powi(n.big_omega() as i32);
        let by_size = params.c * (n.value() as f64).powf(params.epsilon);
        by_omega.min(by_size)
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Positivity {
    /// min f(m) over m <= m_limit with Ω(m) <= L.
    pub infimum: f64,
    pub attained_at: u64,
}

/// Desk-scale proxy for inf{f(m) : Ω(m) <= L}.
pub fn check_lower_positivity(
    f: &ArithmeticFunction,
    big_omega_limit: u32,
    tables: &PrimeTables,
    m_limit: u64,
) -> Result<Positivity> {
    if m_limit < 2 {
        return Err(Error::domain("m_limit must be at least 2"));
    }
    let mut best = Positivity {
        infimum: f64::INFINITY,
        attained_at: 0,
    };
    for m in 1..=m_limit {
        let fact = tables.factorize(m)?;
        if fact.big_omega() > big_omega_limit {
            continue;
        }
        let v = f.eval(&fact);
        if v < best.infimum {
            best = Positivity {
                infimum: v,
                attained_at: m,
            };
        }
    }
    Ok(best)
}
