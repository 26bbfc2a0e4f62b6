//! Exact left-hand sides against explicit envelopes for the smooth-sum,
//! Euler-product and tail estimates.
//!
//! Every evaluator returns a [`LemmaReport`] whose `implied_constant` is the
//! measured ratio `lhs / rhs_envelope`.

use rayon::prelude::*;

use crate::arith::{log_log, FactoredInteger, PrimeTables};
use crate::error::{Error, Result};
use crate::multfn::{check_submultiplicative, ArithmeticFunction, ClassReport, DensityFunction};

const REL_TOL: f64 = 1e-12;
const EXPONENT_CAP: u32 = 400;

/// How smooth series `ℋ(V)` are summed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeriesMode {
    /// Euler product when `F` and `G` are multiplicative, enumeration otherwise.
    Auto,
    /// Enumerate terms up to `a_max` and certify the remainder by Rankin's trick.
    Enumerate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeParams {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    /// `C` of the majorant `min{C^{Ω(b)}, C′ b^{c₂/2}}`.
    pub c: f64,
    pub c_prime: f64,
    /// Exponent `ε` of the majorant `H(pᵉ) = min{Cᵉ, C′p^{εe}}`.
    pub epsilon: f64,
    pub beta0: f64,
    pub varpi: f64,
    pub upsilon: f64,
    pub psi: f64,
    pub nu1: f64,
    pub a_max: u64,
    /// Range over which the `G` majorant hypothesis is scanned.
    pub g_check_limit: u64,
    pub series: SeriesMode,
}

impl Default for EnvelopeParams {
    fn default() -> Self {
        EnvelopeParams {
            c0: 1.0,
            c1: 1.0,
            c2: 1.0,
            c3: 0.0,
            c: 2.0,
            c_prime: 2.0,
            epsilon: 0.5,
            beta0: 1.0,
            varpi: 1.0,
            upsilon: 1e3,
            psi: 1e2,
            nu1: 1.0,
            a_max: 10_000_000,
            g_check_limit: 10_000,
            series: SeriesMode::Auto,
        }
    }
}

impl EnvelopeParams {
    /// `c = min{c₂/2, 1/(1+⌊2c₁/c₂⌋)}`.
    pub fn shiu_c(&self) -> f64 {
        (self.c2 / 2.0).min(1.0 / (1.0 + (2.0 * self.c1 / self.c2).floor()))
    }

    /// `c′ = (c + 2(c₀ + c))/c`.
    pub fn shiu_c_prime(&self) -> f64 {
        let c = self.shiu_c();
        (c + 2.0 * (self.c0 + c)) / c
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("c0", self.c0),
            ("c1", self.c1),
            ("c2", self.c2),
            ("C", self.c),
            ("C_prime", self.c_prime),
            ("epsilon", self.epsilon),
            ("beta0", self.beta0),
            ("varpi", self.varpi),
            ("Upsilon", self.upsilon),
            ("Psi", self.psi),
            ("nu1", self.nu1),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::domain(format!(
                    "{name} = {v} must be a positive real"
                )));
            }
        }
        if !(self.c3 >= 0.0 && self.c3.is_finite()) {
            return Err(Error::domain(format!(
                "c3 = {} must be nonnegative",
                self.c3
            )));
        }
        if self.a_max < 2 {
            return Err(Error::domain("a_max must be at least 2"));
        }
        Ok(())
    }

    fn require_c_above_one(&self) -> Result<()> {
        if self.c <= 1.0 {
            return Err(Error::domain(format!("C = {} must exceed 1", self.c)));
        }
        Ok(())
    }

    fn require_varpi(&self) -> Result<()> {
        let cap = (self.c2 / 2.0 * self.psi.ln()).min(self.beta0);
        if self.varpi > cap * (1.0 + REL_TOL) {
            return Err(Error::domain(format!(
                "varpi = {} violates varpi <= min{{(c2/2) log Psi, beta0}} = {cap}",
                self.varpi
            )));
        }
        Ok(())
    }

    /// `H(pᵉ) = min{Cᵉ, C′p^{εe}}`.
    pub fn majorant(&self, p: u64, e: u32) -> f64 {
        let pf = p as f64;
        self.c
            .powi(e as i32)
            .min(self.c_prime * pf.powf(self.epsilon * e as f64))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LemmaReport {
    pub lemma: String,
    /// Value of the size parameter being swept.
    pub size: f64,
    pub lhs: f64,
    pub rhs_envelope: f64,
    pub implied_constant: f64,
    /// Upper bound on the absolute error of `lhs` from truncating infinite sums.
    pub truncation_error: f64,
    pub parameters: Vec<(String, f64)>,
}

impl LemmaReport {
    fn new(
        lemma: &str,
        size: f64,
        lhs: f64,
        rhs_envelope: f64,
        truncation_error: f64,
        parameters: Vec<(&str, f64)>,
    ) -> Self {
        let implied_constant = if lhs == 0.0 { 0.0 } else { lhs / rhs_envelope };
        LemmaReport {
            lemma: lemma.to_string(),
            size,
            lhs,
            rhs_envelope,
            implied_constant,
            truncation_error,
            parameters: parameters
                .into_iter()
                .map(|(k, v)| (k.to_string(), v))
                .collect(),
        }
    }
}

/// Evaluates `f` at each grid point in parallel; output order follows the grid.
pub fn sweep<F>(grid: &[f64], f: F) -> Result<Vec<LemmaReport>>
where
    F: Fn(f64) -> Result<LemmaReport> + Sync,
{
    grid.par_iter().map(|&s| f(s)).collect()
}

/// `F(pᵉ) = min{1/p, p^{1−e}}`.
pub fn standard_f() -> ArithmeticFunction {
    ArithmeticFunction::multiplicative("F_std", |p, e| {
        let pf = p as f64;
        (1.0 / pf).min(pf.powi(1 - e as i32))
    })
}

fn rule_of<'a>(f: &'a ArithmeticFunction, what: &str) -> Result<impl Fn(u64, u32) -> f64 + 'a> {
    if !f.is_multiplicative() {
        return Err(Error::domain(format!("{what} must be multiplicative")));
    }
    Ok(move |p, e| f.prime_power(p, e).expect("multiplicative"))
}

/// Checks `F(pᵉ) ≤ min{c₀/p, p^{c₁−ec₂}}` (and `F(pᵉ) ≤ c₃/p²` for `e ≥ 2` when
/// `with_c3`) on all prime powers `pᵉ ≤ upto`.
pub fn check_f_hypothesis(
    f: &ArithmeticFunction,
    params: &EnvelopeParams,
    upto: f64,
    with_c3: bool,
    tables: &PrimeTables,
) -> Result<()> {
    let rule = rule_of(f, "F")?;
    let limit = upto.min(tables.limit() as f64);
    for &p in tables.primes_below(limit + 1.0) {
        let pf = p as f64;
        let mut pe = pf;
        let mut e = 1u32;
        while pe <= limit {
            let v = rule(p, e);
            let bound = (params.c0 / pf).min(pf.powf(params.c1 - e as f64 * params.c2));
            if !(v >= 0.0) || v > bound * (1.0 + REL_TOL) {
                return Err(Error::Hypothesis {
                    condition: "F(p^e) <= min{c0/p, p^(c1 - e c2)}".into(),
                    witness: format!("p={p}, e={e}, F={v}, bound={bound}"),
                });
            }
            if with_c3 && e >= 2 && v > params.c3 / (pf * pf) * (1.0 + REL_TOL) {
                return Err(Error::Hypothesis {
                    condition: "F(p^e) <= c3/p^2 for e >= 2".into(),
                    witness: format!("p={p}, e={e}, F={v}, c3={}", params.c3),
                });
            }
            pe *= pf;
            e += 1;
        }
    }
    Ok(())
}

/// Scans `G(ab) ≤ G(a) min{C^{Ω(b)}, C′b^{c₂/2}}` over coprime `ab ≤ g_check_limit`.
pub fn check_g_hypothesis(
    g: &ArithmeticFunction,
    params: &EnvelopeParams,
    tables: &PrimeTables,
) -> Result<()> {
    let limit = params.g_check_limit.min(tables.limit());
    if limit < 2 {
        return Ok(());
    }
    let report = check_submultiplicative(g, tables, limit, "G majorant", |b| {
        let by_omega = params.c.powi(b.big_omega() as i32);
        let by_size = params.c_prime * (b.value() as f64).powf(params.c2 / 2.0);
        by_omega.min(by_size)
    })?;
    let cond = &report.conditions[0];
    if !cond.passed {
        return Err(Error::Hypothesis {
            condition: "G(ab) <= G(a) min{C^Omega(b), C' b^(c2/2)}".into(),
            witness: cond.witness.clone().unwrap_or_default(),
        });
    }
    Ok(())
}

/// Calls `visit(n, factors)` for every `n ≤ limit` composed of `primes`
/// (ascending), including `n = 1`.
pub fn for_each_smooth(primes: &[u64], limit: u64, mut visit: impl FnMut(u64, &[(u64, u32)])) {
    fn rec(
        primes: &[u64],
        start: usize,
        n: u64,
        limit: u64,
        stack: &mut Vec<(u64, u32)>,
        visit: &mut dyn FnMut(u64, &[(u64, u32)]),
    ) {
        for i in start..primes.len() {
            let p = primes[i];
            let Some(mut m) = n.checked_mul(p).filter(|&m| m <= limit) else {
                break;
            };
            let mut e = 1;
            loop {
                stack.push((p, e));
                visit(m, stack);
                rec(primes, i + 1, m, limit, stack, visit);
                stack.pop();
                match m.checked_mul(p).filter(|&v| v <= limit) {
                    Some(v) => {
                        m = v;
                        e += 1;
                    }
                    None => break,
                }
            }
        }
    }
    if limit == 0 {
        return;
    }
    visit(1, &[]);
    let mut stack = Vec::new();
    rec(primes, 0, 1, limit, &mut stack, &mut visit);
}

/// The summand `F(n) G(n) ∏_{c₀<p|n}(1 − F(p))⁻¹` of `ℋ`.
struct SmoothTerm<'a> {
    f: &'a ArithmeticFunction,
    g: &'a ArithmeticFunction,
    c0: f64,
}

impl SmoothTerm<'_> {
    fn weight(&self, p: u64) -> Result<f64> {
        if p as f64 <= self.c0 {
            return Ok(1.0);
        }
        let fp = self.f.prime_power(p, 1).expect("multiplicative");
        if fp >= 1.0 {
            return Err(Error::DegenerateProduct {
                prime: p,
                value: fp,
            });
        }
        Ok(1.0 / (1.0 - fp))
    }

    fn eval(&self, factors: &[(u64, u32)]) -> f64 {
        let mut v = 1.0;
        for &(p, e) in factors {
            v *= self.f.prime_power(p, e).expect("multiplicative");
            if p as f64 > self.c0 {
                v /= 1.0 - self.f.prime_power(p, 1).expect("multiplicative");
            }
        }
        let gv = if self.g.is_multiplicative() {
            factors
                .iter()
                .map(|&(p, e)| self.g.prime_power(p, e).unwrap())
                .product()
        } else {
            let fact = FactoredInteger::from_factors(factors.to_vec()).expect("ordered factors");
            self.g.eval(&fact)
        };
        v * gv
    }
}

/// Value of a smooth series with a bound on what was left out.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesValue {
    pub value: f64,
    pub truncation_error: f64,
}

/// `Σ_{e≥1} term(e)` with geometric tail `scale·ρ^{e}` beyond the cutoff.
fn exponent_series(term: impl Fn(u32) -> f64, scale: f64, rho: f64) -> Result<(f64, f64)> {
    if !(rho < 1.0) {
        return Err(Error::domain(format!(
            "divergent prime-power series (ratio {rho} >= 1)"
        )));
    }
    let mut sum = 0.0;
    for e in 1..=EXPONENT_CAP {
        sum += term(e);
        let tail = scale * rho.powi(e as i32 + 1) / (1.0 - rho);
        if tail <= 1e-17 * (1.0 + sum) {
            return Ok((sum, tail));
        }
    }
    let tail = scale * rho.powi(EXPONENT_CAP as i32 + 1) / (1.0 - rho);
    Ok((sum, tail))
}

/// `ℋ(V) = Σ_{P⁺(n)<V} F(n) G(n) ∏_{c₀<p|n}(1 − F(p))⁻¹`.
pub fn smooth_series(
    f: &ArithmeticFunction,
    g: &ArithmeticFunction,
    params: &EnvelopeParams,
    v: f64,
    tables: &PrimeTables,
) -> Result<SeriesValue> {
    let (total, _) = smooth_split(f, g, params, v, 0, tables)?;
    Ok(total)
}

/// Returns `ℋ(V)` and the head `Σ_{n≤head, P⁺(n)<V}` of the same series.
fn smooth_split(
    f: &ArithmeticFunction,
    g: &ArithmeticFunction,
    params: &EnvelopeParams,
    v: f64,
    head: u64,
    tables: &PrimeTables,
) -> Result<(SeriesValue, f64)> {
    if !f.is_multiplicative() {
        return Err(Error::domain("F must be multiplicative"));
    }
    if v.ceil() > tables.limit() as f64 {
        return Err(Error::domain(format!(
            "V = {v} exceeds the prime table limit {}",
            tables.limit()
        )));
    }
    let primes = tables.primes_below(v);
    let term = SmoothTerm {
        f,
        g,
        c0: params.c0,
    };
    for &p in primes {
        term.weight(p)?;
    }
    let exact = params.series == SeriesMode::Auto && g.is_multiplicative();
    let mut head_sum = 0.0;
    if exact {
        for_each_smooth(primes, head, |_, fs| head_sum += term.eval(fs));
        let (mut log_total, mut err) = (0.0, 0.0);
        for &p in primes {
            let w = term.weight(p)?;
            let pf = p as f64;
            let rho = pf.powf(-params.c2 / 2.0);
            let scale = params.c_prime * pf.powf(params.c1);
            let (s, tail) = exponent_series(
                |e| f.prime_power(p, e).unwrap() * g.prime_power(p, e).unwrap(),
                scale,
                rho,
            )?;
            log_total += (w * s).ln_1p();
            err += w * tail;
        }
        let value = log_total.exp();
        return Ok((
            SeriesValue {
                value,
                truncation_error: value * err.exp_m1(),
            },
            head_sum,
        ));
    }
    let a_max = params.a_max;
    let mut total = 0.0;
    for_each_smooth(primes, a_max, |n, fs| {
        let t = term.eval(fs);
        total += t;
        if n <= head {
            head_sum += t;
        }
    });
    let tail = rankin_tail(f, params, primes, a_max, &term)?;
    Ok((
        SeriesValue {
            value: total,
            truncation_error: tail,
        },
        head_sum,
    ))
}

/// Rankin bound on `Σ_{a>a_max, P⁺(a)<V}` using `G(a) ≤ G(1)H(a)`.
fn rankin_tail(
    f: &ArithmeticFunction,
    params: &EnvelopeParams,
    primes: &[u64],
    a_max: u64,
    term: &SmoothTerm<'_>,
) -> Result<f64> {
    let g1 = term.eval(&[]);
    let half = params.c2 / 2.0;
    let mut best = f64::INFINITY;
    for k in 1..20 {
        let beta = half * k as f64 / 20.0;
        let mut log_prod = -beta * (a_max as f64).ln();
        for &p in primes {
            let w = term.weight(p)?;
            let pf = p as f64;
            let rho = pf.powf(beta - half);
            let scale = params.c_prime * pf.powf(params.c1);
            let (s, tail) = exponent_series(
                |e| f.prime_power(p, e).unwrap() * params.majorant(p, e) * pf.powf(beta * e as f64),
                scale,
                rho,
            )?;
            log_prod += (w * (s + tail)).ln_1p();
        }
        best = best.min(g1 * log_prod.exp());
    }
    Ok(best)
}

/// Smooth sum over `n ∈ (z, x]` with `P⁺(n) ≤ (log x)(log log x)` against
/// `z^{−c} exp(c′ log x/(log log x)^{1/2})`.
pub fn lemma21_smooth_tail(
    f: &ArithmeticFunction,
    params: &EnvelopeParams,
    x: f64,
    z: f64,
    tables: &PrimeTables,
) -> Result<LemmaReport> {
    params.validate()?;
    if !(x >= 16.0 && z >= 16.0) {
        return Err(Error::domain(format!(
            "x = {x} and z = {z} must both be at least 16"
        )));
    }
    if x > u64::MAX as f64 / 2.0 {
        return Err(Error::domain("x is too large to enumerate"));
    }
    let lx = log_log(x)?;
    let y = x.ln() * lx;
    check_f_hypothesis(
        f,
        params,
        y.max(x.min(tables.limit() as f64)),
        false,
        tables,
    )?;
    let rule = rule_of(f, "F")?;
    let primes = tables.primes_in(0.0, y);
    let mut lhs = 0.0;
    let zf = z.floor() as u64;
    for_each_smooth(primes, x.floor() as u64, |n, fs| {
        if n > zf {
            lhs += fs.iter().map(|&(p, e)| rule(p, e)).product::<f64>();
        }
    });
    let c = params.shiu_c();
    let cp = params.shiu_c_prime();
    let rhs = z.powf(-c) * (cp * x.ln() / lx.sqrt()).exp();
    Ok(LemmaReport::new(
        "2.1",
        z,
        lhs,
        rhs,
        0.0,
        vec![
            ("x", x),
            ("z", z),
            ("smooth_bound", y),
            ("c", c),
            ("c_prime", cp),
        ],
    ))
}

/// The Euler product over `p ≤ T`, `p ∤ c` against `e^{β log T}`.
pub fn lemma22_euler_product(
    f: &ArithmeticFunction,
    params: &EnvelopeParams,
    a: f64,
    c: u64,
    beta: f64,
    t: f64,
    tables: &PrimeTables,
) -> Result<LemmaReport> {
    params.validate()?;
    if !(a > 1.0) {
        return Err(Error::domain(format!("A = {a} must exceed 1")));
    }
    if c == 0 {
        return Err(Error::domain("c must be a positive integer"));
    }
    if !(t >= 2.0) {
        return Err(Error::domain(format!("T = {t} must be at least 2")));
    }
    let lt = t.ln();
    if lt <= 4.0 * params.beta0 / params.c2 {
        return Err(Error::domain(format!(
            "log T = {lt} violates log T > 4 beta0/c2 = {}",
            4.0 * params.beta0 / params.c2
        )));
    }
    let beta_cap = (params.c2 / 2.0).min(params.beta0 / lt);
    if !(beta > 0.0) || beta > beta_cap * (1.0 + REL_TOL) {
        return Err(Error::domain(format!(
            "beta = {beta} violates 0 < beta <= min{{c2/2, beta0/log T}} = {beta_cap}"
        )));
    }
    if t.floor() > tables.limit() as f64 {
        return Err(Error::domain(format!(
            "T = {t} exceeds the prime table limit"
        )));
    }
    check_f_hypothesis(f, params, t, false, tables)?;
    let rule = rule_of(f, "F")?;
    let (mut log_lhs, mut err) = (0.0, 0.0);
    for &p in tables.primes_in(0.0, t) {
        if c % p == 0 {
            continue;
        }
        let pf = p as f64;
        let w = if pf > params.c0 {
            let fp = rule(p, 1);
            if fp >= 1.0 {
                return Err(Error::DegenerateProduct {
                    prime: p,
                    value: fp,
                });
            }
            1.0 / (1.0 - fp)
        } else {
            1.0
        };
        // Σ_{i≥1, j≥0, i+j=k} (p^{βi} − p^{β(i−1)}) telescopes to p^{βk} − 1
        let r1 = pf.powf(beta - params.c2 / 2.0);
        let r2 = a * pf.powf(beta - params.c2);
        let (rho, scale) = if r2 < r1 {
            (r2, pf.powf(params.c1))
        } else {
            (r1, params.c_prime * pf.powf(params.c1))
        };
        let (s, tail) = exponent_series(
            |k| {
                let kf = k as f64;
                let coeff = (params.c_prime * pf.powf(kf * params.c2 / 2.0)).min(a.powf(kf));
                coeff * rule(p, k) * (beta * kf * pf.ln()).exp_m1()
            },
            scale,
            rho,
        )?;
        log_lhs += (w * s).ln_1p();
        err += w * tail;
    }
    let lhs = log_lhs.exp();
    let rhs = (beta * lt).exp();
    Ok(LemmaReport::new(
        "2.2",
        t,
        lhs,
        rhs,
        lhs * err.exp_m1(),
        vec![("A", a), ("c", c as f64), ("beta", beta), ("T", t)],
    ))
}

/// Exhaustive check of `G(ab) ≤ G(a)H(b)` with `H(pᵉ) = min{Cᵉ, C′p^{εe}}`.
pub fn lemma23_majorant(
    g: &ArithmeticFunction,
    params: &EnvelopeParams,
    sample_limit: u64,
    tables: &PrimeTables,
) -> Result<ClassReport> {
    params.validate()?;
    check_submultiplicative(g, tables, sample_limit, "majorant", |b| {
        b.factors()
            .iter()
            .map(|&(p, e)| params.majorant(p, e))
            .product()
    })
}

fn tail_setup(params: &EnvelopeParams) -> Result<()> {
    params.validate()?;
    params.require_c_above_one()?;
    params.require_varpi()?;
    if !(params.upsilon >= 16.0 && params.psi >= 16.0) {
        return Err(Error::domain(format!(
            "Upsilon = {} and Psi = {} must both be at least 16",
            params.upsilon, params.psi
        )));
    }
    Ok(())
}

/// Tail `Σ_{a>Υ, P⁺(a)<Ψ}` and the factor `exp(−ϖ log Υ/log Ψ)`.
fn smooth_tail(
    f: &ArithmeticFunction,
    g: &ArithmeticFunction,
    params: &EnvelopeParams,
    tables: &PrimeTables,
) -> Result<(f64, SeriesValue, f64)> {
    check_f_hypothesis(f, params, params.psi, false, tables)?;
    check_g_hypothesis(g, params, tables)?;
    let head = params.upsilon.floor() as u64;
    let (total, head_sum) = smooth_split(f, g, params, params.psi, head, tables)?;
    let lhs = if params.series == SeriesMode::Enumerate && head >= params.a_max {
        0.0
    } else {
        (total.value - head_sum).max(0.0)
    };
    let decay = (-params.varpi * params.upsilon.ln() / params.psi.ln()).exp();
    Ok((lhs, total, decay))
}

/// Tail of the `Ψ`-smooth series beyond `Υ` against `exp(−ϖ log Υ/log Ψ) ℋ(Ψ)`.
pub fn lemma24_tail(
    f: &ArithmeticFunction,
    g: &ArithmeticFunction,
    params: &EnvelopeParams,
    tables: &PrimeTables,
) -> Result<LemmaReport> {
    tail_setup(params)?;
    let (lhs, total, decay) = smooth_tail(f, g, params, tables)?;
    Ok(LemmaReport::new(
        "2.4",
        params.upsilon,
        lhs,
        decay * total.value,
        total.truncation_error,
        vec![
            ("Upsilon", params.upsilon),
            ("Psi", params.psi),
            ("varpi", params.varpi),
            ("H_Psi", total.value),
        ],
    ))
}

/// `ℋ(V)` against `ℋ(V^ε)`, scaled by `ε^{ν₁}`.
pub fn lemma25_h_ratio(
    f: &ArithmeticFunction,
    g: &ArithmeticFunction,
    params: &EnvelopeParams,
    v: f64,
    epsilon: f64,
    tables: &PrimeTables,
) -> Result<LemmaReport> {
    params.validate()?;
    params.require_c_above_one()?;
    if !(v >= 1.0 && epsilon > 0.0) {
        return Err(Error::domain(format!(
            "need V >= 1 and epsilon > 0 (got {v}, {epsilon})"
        )));
    }
    let ve = v.powf(epsilon);
    if ve.powf(params.c2 / 2.0) <= 2.0 * params.c {
        return Err(Error::domain(format!(
            "V^(epsilon c2/2) = {} violates V^(epsilon c2/2) > 2C = {}",
            ve.powf(params.c2 / 2.0),
            2.0 * params.c
        )));
    }
    if ve <= params.c0 {
        return Err(Error::domain(format!(
            "V^epsilon = {ve} violates V^epsilon > c0 = {}",
            params.c0
        )));
    }
    check_f_hypothesis(f, params, v, false, tables)?;
    check_g_hypothesis(g, params, tables)?;
    let big = smooth_series(f, g, params, v, tables)?;
    let small = smooth_series(f, g, params, ve, tables)?;
    let report = LemmaReport::new(
        "2.5",
        v,
        big.value,
        small.value,
        big.truncation_error + small.truncation_error,
        vec![("V", v), ("epsilon", epsilon), ("nu1", params.nu1)],
    );
    Ok(LemmaReport {
        implied_constant: report.implied_constant * epsilon.powf(params.nu1),
        ..report
    })
}

/// Same tail as [`lemma24_tail`] against `exp(−ϖ log Υ/log Ψ) Σ_{a≤Ψ}`.
pub fn lemma26_tail_vs_head(
    f: &ArithmeticFunction,
    g: &ArithmeticFunction,
    params: &EnvelopeParams,
    tables: &PrimeTables,
) -> Result<LemmaReport> {
    tail_setup(params)?;
    let (lhs, total, decay) = smooth_tail(f, g, params, tables)?;
    let term = SmoothTerm {
        f,
        g,
        c0: params.c0,
    };
    let mut head = 0.0;
    for a in 1..=params.psi.floor() as u64 {
        let fact = tables.factorize(a)?;
        head += term.eval(fact.factors());
    }
    Ok(LemmaReport::new(
        "2.6",
        params.upsilon,
        lhs,
        decay * head,
        total.truncation_error,
        vec![
            ("Upsilon", params.upsilon),
            ("Psi", params.psi),
            ("varpi", params.varpi),
            ("head_sum", head),
        ],
    ))
}

/// Weighted sum over squarefree `m` with primes in `(α₁, x^{α₂})` against
/// `𝒞 ∏_{α₁<p≤x^{min{α₂,α₃}}, p∤a}(1 − g(p))`, with `α₁ = B`.
pub fn lemma27_weighted_product_sum(
    g: &DensityFunction,
    a: u64,
    alpha2: f64,
    alpha3: f64,
    x: f64,
    tables: &PrimeTables,
) -> Result<LemmaReport> {
    if a == 0 {
        return Err(Error::domain("a must be a positive integer"));
    }
    if !(alpha2 > 0.0 && alpha3 > 0.0) {
        return Err(Error::domain("alpha2 and alpha3 must be positive"));
    }
    if !(x >= 16.0) {
        return Err(Error::domain(format!("x = {x} must be at least 16")));
    }
    let alpha1 = g.params().b;
    let x2 = x.powf(alpha2);
    let x3 = x.powf(alpha3);
    let top = x2.max(x3);
    if top.floor() > tables.limit() as f64 {
        return Err(Error::domain(format!(
            "x^max(alpha2, alpha3) = {top} exceeds the prime table limit"
        )));
    }
    for &p in tables.primes_in(0.0, top) {
        let gp = g.at_prime(p);
        if !(gp >= 0.0) || gp > alpha1 / p as f64 * (1.0 + REL_TOL) {
            return Err(Error::Hypothesis {
                condition: "g(p) <= alpha1/p".into(),
                witness: format!("p={p}, g(p)={gp}, alpha1={alpha1}"),
            });
        }
    }
    let coprime = |p: u64| a % p != 0;
    let log1m = |p: u64| -> Result<f64> {
        let gp = g.at_prime(p);
        if gp >= 1.0 {
            return Err(Error::DegenerateProduct {
                prime: p,
                value: gp,
            });
        }
        Ok((-gp).ln_1p())
    };
    let mut log_lhs = 0.0;
    for &p in tables.primes_in(alpha1, x3).iter().filter(|&&p| coprime(p)) {
        log_lhs += 2.0 * log1m(p)?;
    }
    for &p in tables
        .primes_below(x2)
        .iter()
        .filter(|&&p| p as f64 > alpha1 && coprime(p))
    {
        let gp = g.at_prime(p);
        let boost = if p as f64 <= x3 {
            (-2.0 * log1m(p)?).exp()
        } else {
            1.0
        };
        log_lhs += (gp * boost).ln_1p();
    }
    let mut log_c = 0.0;
    if alpha2 <= alpha3 {
        for &p in tables.primes_in(x2, x3).iter().filter(|&&p| coprime(p)) {
            log_c += 2.0 * log1m(p)?;
        }
    } else {
        for &p in tables.primes_in(x3, x2).iter().filter(|&&p| coprime(p)) {
            log_c -= log1m(p)?;
        }
    }
    let mut log_main = 0.0;
    for &p in tables
        .primes_in(alpha1, x2.min(x3))
        .iter()
        .filter(|&&p| coprime(p))
    {
        log_main += log1m(p)?;
    }
    Ok(LemmaReport::new(
        "2.7",
        x,
        log_lhs.exp(),
        (log_c + log_main).exp(),
        0.0,
        vec![
            ("a", a as f64),
            ("alpha1", alpha1),
            ("alpha2", alpha2),
            ("alpha3", alpha3),
            ("x", x),
            ("C_factor", log_c.exp()),
        ],
    ))
}

/// `Σ_{n≤x, P⁻(n)>c₀} F(n)G(n)` against `exp(Σ_{c₀<p≤x} F(p)G(p))`.
pub fn lemma210_exp_bound(
    f: &ArithmeticFunction,
    g: &ArithmeticFunction,
    params: &EnvelopeParams,
    x: f64,
    tables: &PrimeTables,
) -> Result<LemmaReport> {
    params.validate()?;
    if !(x >= 1.0) {
        return Err(Error::domain(format!("x = {x} must be at least 1")));
    }
    let n_max = x.floor() as u64;
    if n_max > tables.limit() {
        return Err(Error::domain(format!(
            "x = {x} exceeds the prime table limit"
        )));
    }
    check_f_hypothesis(f, params, x, true, tables)?;
    check_g_hypothesis(g, params, tables)?;
    let ft = f.table(tables, n_max)?;
    let gt = g.table(tables, n_max)?;
    let mut lhs = 0.0;
    for n in 1..=n_max {
        let rough =
            n == 1 || tables.smallest_prime_factor(n).expect("within table") as f64 > params.c0;
        if rough {
            lhs += ft.values()[n as usize] * gt.values()[n as usize];
        }
    }
    let exponent: f64 = tables
        .primes_in(params.c0, x)
        .iter()
        .map(|&p| ft.values()[p as usize] * gt.values()[p as usize])
        .sum();
    Ok(LemmaReport::new(
        "2.10",
        x,
        lhs,
        exponent.exp(),
        0.0,
        vec![
            ("x", x),
            ("c0", params.c0),
            ("c3", params.c3),
            ("prime_sum", exponent),
        ],
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::multfn::DensityParams;

    fn tables() -> PrimeTables {
        PrimeTables::new(200_000).unwrap()
    }

    #[test]
    fn shiu_constants() {
        let p = EnvelopeParams::default();
        assert!((p.shiu_c() - 1.0 / 3.0).abs() < 1e-15);
        assert!((p.shiu_c_prime() - 9.0).abs() < 1e-12);
    }

    #[test]
    fn smooth_enumeration_matches_scan() {
        let t = tables();
        let primes = t.primes_below(12.0);
        let mut seen = Vec::new();
        for_each_smooth(primes, 500, |n, fs| {
            assert_eq!(
                FactoredInteger::from_factors(fs.to_vec()).unwrap().value(),
                n
            );
            seen.push(n);
        });
        seen.sort_unstable();
        let oracle: Vec<u64> = (1..=500)
            .filter(|&n| t.factorize(n).unwrap().largest_prime() < 12)
            .collect();
        assert_eq!(seen, oracle);
    }

    #[test]
    fn lemma21_examples() {
        let t = tables();
        let p = EnvelopeParams::default();
        let f = standard_f();
        let r = lemma21_smooth_tail(&f, &p, 1e5, 1e5, &t).unwrap();
        assert_eq!(r.lhs, 0.0);
        let r = lemma21_smooth_tail(&f, &p, 1e5, 1e2, &t).unwrap();
        assert!(r.implied_constant.is_finite() && r.implied_constant > 0.0);
        let bad = ArithmeticFunction::multiplicative("bad", |p, _| 2.0 / p as f64);
        assert!(matches!(
            lemma21_smooth_tail(&bad, &p, 1e5, 1e2, &t),
            Err(Error::Hypothesis { .. })
        ));
    }

    #[test]
    fn lemma22_examples() {
        let t = tables();
        let p = EnvelopeParams {
            c_prime: 1.0,
            ..Default::default()
        };
        let zero = ArithmeticFunction::multiplicative("zero", |_, _| 0.0);
        let r = lemma22_euler_product(&zero, &p, 2.0, 1, 1e-9, 1e3, &t).unwrap();
        assert_eq!(r.lhs, 1.0);
        assert!((r.rhs_envelope - 1.0).abs() < 1e-8);
        let f = standard_f();
        let beta = 1.0 / 1e3f64.ln();
        let r1 = lemma22_euler_product(&f, &p, 2.0, 1, beta, 1e3, &t).unwrap();
        let r6 = lemma22_euler_product(&f, &p, 2.0, 6, beta, 1e3, &t).unwrap();
        assert!(r1.implied_constant.is_finite());
        assert!(r1.truncation_error < 1e-9 * r1.lhs);
        assert!(r6.lhs < r1.lhs);
        assert!(lemma22_euler_product(&f, &p, 2.0, 1, 0.5, 1e3, &t).is_err());
    }

    #[test]
    fn lemma23_examples() {
        let t = tables();
        let p = EnvelopeParams {
            c: 2.0,
            c_prime: 2.0,
            epsilon: 1.0,
            ..Default::default()
        };
        let r = lemma23_majorant(&ArithmeticFunction::divisor_count(), &p, 2000, &t).unwrap();
        assert!(r.passed());
        let p = EnvelopeParams {
            c: 2.0,
            c_prime: 1.0,
            epsilon: 0.1,
            ..Default::default()
        };
        let r = lemma23_majorant(&ArithmeticFunction::big_omega_power(3.0), &p, 1000, &t).unwrap();
        assert!(!r.passed());
        assert!(r.conditions[0].witness.is_some());
    }

    #[test]
    fn smooth_series_modes_agree() {
        let t = tables();
        let f = ArithmeticFunction::multiplicative("inv", |p, e| (p as f64).powi(-(e as i32)));
        let g = ArithmeticFunction::one();
        let auto = EnvelopeParams {
            psi: 20.0,
            ..Default::default()
        };
        let en = EnvelopeParams {
            series: SeriesMode::Enumerate,
            a_max: 1_000_000,
            ..auto.clone()
        };
        let a = smooth_series(&f, &g, &auto, 20.0, &t).unwrap();
        let b = smooth_series(&f, &g, &en, 20.0, &t).unwrap();
        assert!(b.value <= a.value + a.truncation_error);
        assert!(a.value - b.value <= b.truncation_error);
    }

    #[test]
    fn lemma24_examples() {
        let t = tables();
        let f = ArithmeticFunction::multiplicative("inv", |p, e| (p as f64).powi(-(e as i32)));
        let g = ArithmeticFunction::one();
        let p = EnvelopeParams {
            upsilon: 1e3,
            psi: 1e2,
            a_max: 1_000_000,
            series: SeriesMode::Enumerate,
            ..Default::default()
        };
        let r = lemma24_tail(&f, &g, &p, &t).unwrap();
        assert!(r.implied_constant.is_finite() && r.lhs > 0.0);
        let doubled = lemma24_tail(
            &f,
            &g,
            &EnvelopeParams {
                a_max: 2_000_000,
                ..p.clone()
            },
            &t,
        )
        .unwrap();
        assert!(doubled.lhs - r.lhs <= r.truncation_error);
        let far = EnvelopeParams {
            upsilon: 2e6,
            ..p.clone()
        };
        assert_eq!(lemma24_tail(&f, &g, &far, &t).unwrap().lhs, 0.0);
        let bad = EnvelopeParams { varpi: 5.0, ..p };
        assert!(lemma24_tail(&f, &g, &bad, &t).is_err());
    }

    #[test]
    fn lemma25_examples() {
        let t = tables();
        let f = ArithmeticFunction::multiplicative("inv", |p, e| (p as f64).powi(-(e as i32)));
        let g = ArithmeticFunction::one();
        let p = EnvelopeParams::default();
        let r = lemma25_h_ratio(&f, &g, &p, 1e4, 1.0, &t).unwrap();
        assert_eq!(r.lhs, r.rhs_envelope);
        assert_eq!(r.implied_constant, 1.0);
        let r = lemma25_h_ratio(&f, &g, &p, 1e4, 0.5, &t).unwrap();
        assert!(r.implied_constant.is_finite());
        assert!(r.lhs >= smooth_series(&f, &g, &p, 1e2, &t).unwrap().value);
        assert!(lemma25_h_ratio(&f, &g, &p, 1e4, 0.2, &t).is_err());
    }

    #[test]
    fn lemma27_examples() {
        let t = tables();
        let params = DensityParams::new(1.0, 1.0, 0.0, 1.0, 1.0).unwrap();
        let g = DensityFunction::reciprocal(params).unwrap();
        let r = lemma27_weighted_product_sum(&g, 1, 0.5, 0.5, 1e4, &t).unwrap();
        // subset products over primes below 100, with the squared factors of the rest
        let primes = t.primes_below(100.0).to_vec();
        let all: f64 = primes
            .iter()
            .map(|&p| (1.0 - 1.0 / p as f64).powi(2))
            .product();
        let mut oracle = 0.0;
        let mut stack = vec![(0usize, 1.0f64)];
        while let Some((i, acc)) = stack.pop() {
            if i == primes.len() {
                oracle += acc;
                continue;
            }
            let p = primes[i] as f64;
            stack.push((i + 1, acc));
            stack.push((i + 1, acc / p / (1.0 - 1.0 / p).powi(2)));
        }
        assert!((r.lhs - oracle * all).abs() < 1e-9 * r.lhs);
        assert_eq!(
            r.parameters.iter().find(|p| p.0 == "C_factor").unwrap().1,
            1.0
        );
        // every prime below 256^(1/2) divides a
        let r = lemma27_weighted_product_sum(&g, 30030, 0.5, 0.5, 256.0, &t).unwrap();
        assert!((r.lhs - 1.0).abs() < 1e-12);
        assert!(r.rhs_envelope >= r.parameters.iter().find(|p| p.0 == "C_factor").unwrap().1);
    }

    #[test]
    fn lemma210_examples() {
        let t = tables();
        let p = EnvelopeParams {
            c3: 1e6,
            ..Default::default()
        };
        let zero = ArithmeticFunction::multiplicative("zero", |_, _| 0.0);
        let r = lemma210_exp_bound(&zero, &ArithmeticFunction::one(), &p, 1e3, &t).unwrap();
        assert_eq!((r.lhs, r.rhs_envelope), (1.0, 1.0));
        let f = ArithmeticFunction::multiplicative("inv", |p, e| (p as f64).powi(-(e as i32)));
        let one = ArithmeticFunction::one();
        let r = lemma210_exp_bound(&f, &one, &p, 1e5, &t).unwrap();
        let harmonic: f64 = (1..=100_000).map(|n| 1.0 / n as f64).sum();
        assert!((r.lhs - harmonic).abs() < 1e-9 * harmonic);
        let two = ArithmeticFunction::multiplicative("two", |_, e| if e == 1 { 2.0 } else { 1.0 });
        let p2 = EnvelopeParams {
            c: 3.0,
            c_prime: 3.0,
            ..p.clone()
        };
        let r2 = lemma210_exp_bound(&f, &two, &p2, 1e5, &t).unwrap();
        let ratio = r2.rhs_envelope.ln() / r.rhs_envelope.ln();
        assert!((ratio - 2.0).abs() < 1e-12);
        assert!(r2.implied_constant < r.implied_constant);
        let strict = EnvelopeParams { c3: 1.0, ..p };
        assert!(lemma210_exp_bound(&standard_f(), &one, &strict, 1e3, &t).is_err());
    }
}
