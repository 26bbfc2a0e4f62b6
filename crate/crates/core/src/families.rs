//! Weighted families, congruence sums `C_d(T)` and equidistribution diagnostics.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::{Arc, Mutex};

use crate::arith::{mertens_log, FactoredInteger, PrimeTables};
use crate::error::{Error, Result};
use crate::multfn::{DensityFunction, DensityParams};

/// Largest support a single `T` may materialize.
pub const SUPPORT_CAP: u64 = 10_000_000;

const BUCKET_LIMIT: u64 = 1 << 26;

/// Integer polynomial in at most three variables `x`, `y`, `z`.
#[derive(Clone, PartialEq, Eq)]
pub struct Polynomial {
    terms: BTreeMap<[u32; 3], i64>,
}

impl Polynomial {
    pub fn from_terms(terms: impl IntoIterator<Item = ([u32; 3], i64)>) -> Result<Self> {
        let mut map: BTreeMap<[u32; 3], i64> = BTreeMap::new();
        for (exps, c) in terms {
            let slot = map.entry(exps).or_insert(0);
            *slot = slot
                .checked_add(c)
                .ok_or_else(|| Error::domain("polynomial coefficient overflow"))?;
        }
        map.retain(|_, c| *c != 0);
        Ok(Polynomial { terms: map })
    }

    /// Univariate polynomial in `x` from coefficients, constant term first.
    pub fn univariate(coeffs: &[i64]) -> Self {
        let terms = coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != 0)
            .map(|(i, c)| ([i as u32, 0, 0], *c))
            .collect();
        Polynomial { terms }
    }

    /// Parses expressions such as `x^2 + y^2`, `3*x*y - 2*z^3 + 7` or `-x+1`.
    pub fn parse(src: &str) -> Result<Self> {
        let s: String = src.chars().filter(|c| !c.is_whitespace()).collect();
        if s.is_empty() {
            return Err(Error::domain("empty polynomial"));
        }
        let mut terms = Vec::new();
        let mut rest = s.as_str();
        let mut first = true;
        while !rest.is_empty() {
            let mut sign = 1i64;
            if let Some(r) = rest.strip_prefix('+') {
                rest = r;
            } else if let Some(r) = rest.strip_prefix('-') {
                sign = -1;
                rest = r;
            } else if !first {
                return Err(Error::domain(format!(
                    "expected '+' or '-' in polynomial {src:?}"
                )));
            }
            first = false;
            let end = rest.find(['+', '-']).unwrap_or(rest.len());
            let (term, tail) = rest.split_at(end);
            rest = tail;
            if term.is_empty() {
                return Err(Error::domain(format!("empty term in polynomial {src:?}")));
            }
            let mut coeff = sign;
            let mut exps = [0u32; 3];
            for factor in term.split('*') {
                let (base, power) = match factor.split_once('^') {
                    Some((b, e)) => {
                        let e: u32 = e
                            .parse()
                            .map_err(|_| Error::domain(format!("bad exponent in {factor:?}")))?;
                        (b, e)
                    }
                    None => (factor, 1),
                };
                match base {
                    "x" => exps[0] += power,
                    "y" => exps[1] += power,
                    "z" => exps[2] += power,
                    num => {
                        let v: i64 = num.parse().map_err(|_| {
                            Error::domain(format!("bad factor {factor:?} in polynomial"))
                        })?;
                        let v = v
                            .checked_pow(power)
                            .ok_or_else(|| Error::domain("polynomial coefficient overflow"))?;
                        coeff = coeff
                            .checked_mul(v)
                            .ok_or_else(|| Error::domain("polynomial coefficient overflow"))?;
                    }
                }
            }
            terms.push((exps, coeff));
        }
        Polynomial::from_terms(terms)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|e| e.iter().sum()).max().unwrap_or(0)
    }

    /// Number of leading variables actually used (0 for constants).
    pub fn num_vars(&self) -> usize {
        self.terms
            .keys()
            .map(|e| e.iter().rposition(|&k| k > 0).map_or(0, |i| i + 1))
            .max()
            .unwrap_or(0)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&[u32; 3], &i64)> {
        self.terms.iter()
    }

    /// Exact value at an integer point; `None` on overflow.
    pub fn eval(&self, point: &[i64]) -> Option<i128> {
        let mut total: i128 = 0;
        for (exps, &c) in &self.terms {
            let mut term = c as i128;
            for (i, &k) in exps.iter().enumerate() {
                if k == 0 {
                    continue;
                }
                let x = *point.get(i)? as i128;
                term = term.checked_mul(x.checked_pow(k)?)?;
            }
            total = total.checked_add(term)?;
        }
        Some(total)
    }

    /// Coefficients of a univariate polynomial in `x`, constant term first.
    pub fn univariate_coeffs(&self) -> Option<Vec<i64>> {
        if self.num_vars() > 1 {
            return None;
        }
        let deg = self.degree() as usize;
        let mut out = vec![0i64; deg + 1];
        for (exps, &c) in &self.terms {
            out[exps[0] as usize] = c;
        }
        Some(out)
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (exps, &c)) in self.terms.iter().rev().enumerate() {
            let mut parts = Vec::new();
            for (v, &k) in ["x", "y", "z"].iter().zip(exps) {
                match k {
                    0 => {}
                    1 => parts.push(v.to_string()),
                    _ => parts.push(format!("{v}^{k}")),
                }
            }
            let mag = c.unsigned_abs();
            if parts.is_empty() || mag != 1 {
                parts.insert(0, mag.to_string());
            }
            let sep = match (i, c < 0) {
                (0, true) => "-",
                (0, false) => "",
                (_, true) => " - ",
                (_, false) => " + ",
            };
            write!(f, "{sep}{}", parts.join("*"))?;
        }
        Ok(())
    }
}

impl fmt::Debug for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Polynomial({self})")
    }
}

/// Choice of the main-term mass `M(T)`.
#[derive(Clone)]
pub enum Mass {
    TotalWeight,
    T,
    /// `coeff * T^exponent`.
    Power {
        coeff: f64,
        exponent: f64,
    },
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for Mass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mass::TotalWeight => write!(f, "TotalWeight"),
            Mass::T => write!(f, "T"),
            Mass::Power { coeff, exponent } => write!(f, "Power({coeff}*T^{exponent})"),
            Mass::Custom(_) => write!(f, "Custom"),
        }
    }
}

pub type DensityOverride = Arc<dyn Fn(f64) -> DensityFunction + Send + Sync>;

/// The model `(h, M, θ, ξ, α, B̃)` a family is claimed to satisfy.
#[derive(Clone)]
pub struct EquidistModel {
    h: DensityFunction,
    mass: Mass,
    theta: f64,
    xi: f64,
    alpha: f64,
    b_tilde: f64,
    h_override: Option<DensityOverride>,
}

impl fmt::Debug for EquidistModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EquidistModel")
            .field("h", &self.h.name())
            .field("mass", &self.mass)
            .field("theta", &self.theta)
            .field("xi", &self.xi)
            .field("alpha", &self.alpha)
            .field("b_tilde", &self.b_tilde)
            .field("h_override", &self.h_override.is_some())
            .finish()
    }
}

impl EquidistModel {
    pub fn new(
        h: DensityFunction,
        mass: Mass,
        theta: f64,
        xi: f64,
        alpha: f64,
        b_tilde: f64,
    ) -> Result<Self> {
        if !(theta > 0.0 && theta < 1.0) {
            return Err(Error::domain(format!("theta = {theta} must lie in (0, 1)")));
        }
        if !(xi > 0.0 && xi < 1.0) {
            return Err(Error::domain(format!("xi = {xi} must lie in (0, 1)")));
        }
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::domain(format!("alpha = {alpha} must be positive")));
        }
        if !(b_tilde > 0.0 && b_tilde.is_finite()) {
            return Err(Error::domain(format!(
                "B_tilde = {b_tilde} must be positive"
            )));
        }
        if let Mass::Power { coeff, exponent } = mass {
            if !(coeff > 0.0 && exponent > 0.0) {
                return Err(Error::domain(
                    "power mass needs positive coefficient and exponent",
                ));
            }
        }
        Ok(EquidistModel {
            h,
            mass,
            theta,
            xi,
            alpha,
            b_tilde,
            h_override: None,
        })
    }

    /// `h(d) = 1/d`, `M(T) = T`, `θ = 1/2`, `ξ = 9/10`, `α = B̃ = 1`.
    pub fn identity_standard() -> Self {
        let params = DensityParams::new(1.0, 1.0, 0.0, 1.0, 1.0).expect("valid");
        let h = DensityFunction::reciprocal(params).expect("valid");
        EquidistModel::new(h, Mass::T, 0.5, 0.9, 1.0, 1.0).expect("valid")
    }

    pub fn with_density_override(mut self, f: DensityOverride) -> Self {
        self.h_override = Some(f);
        self
    }

    pub fn with_mass(mut self, mass: Mass) -> Self {
        self.mass = mass;
        self
    }

    pub fn density(&self) -> &DensityFunction {
        &self.h
    }

    /// `h_T`: the override if present, the base density otherwise.
    pub fn density_at(&self, t: f64) -> DensityFunction {
        match &self.h_override {
            Some(f) => f(t),
            None => self.h.clone(),
        }
    }

    pub fn mass_choice(&self) -> &Mass {
        &self.mass
    }

    pub fn mass(&self, t: f64, support: &Support) -> f64 {
        match &self.mass {
            Mass::TotalWeight => support.total_weight(),
            Mass::T => t,
            Mass::Power { coeff, exponent } => coeff * t.powf(*exponent),
            Mass::Custom(f) => f(t),
        }
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn xi(&self) -> f64 {
        self.xi
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn b_tilde(&self) -> f64 {
        self.b_tilde
    }
}

/// The materialized support of `χ_T`: parallel weight and value arrays.
#[derive(Debug, Clone, PartialEq)]
pub struct Support {
    t: f64,
    weights: Vec<f64>,
    values: Vec<u64>,
}

impl Support {
    /// Drops zero weights; rejects negative or non-finite weights and zero values.
    pub fn from_entries(t: f64, entries: impl IntoIterator<Item = (f64, u64)>) -> Result<Self> {
        let mut weights = Vec::new();
        let mut values = Vec::new();
        for (w, c) in entries {
            if !(w >= 0.0 && w.is_finite()) {
                return Err(Error::domain(format!(
                    "weight {w} is not a nonnegative real"
                )));
            }
            if c == 0 {
                return Err(Error::domain("family values must be positive integers"));
            }
            if w > 0.0 {
                weights.push(w);
                values.push(c);
            }
        }
        Ok(Support { t, weights, values })
    }

    fn unit(t: f64, values: Vec<u64>) -> Self {
        Support {
            t,
            weights: vec![1.0; values.len()],
            values,
        }
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn values(&self) -> &[u64] {
        &self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, u64)> + '_ {
        self.weights
            .iter()
            .copied()
            .zip(self.values.iter().copied())
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn max_value(&self) -> u64 {
        self.values.iter().copied().max().unwrap_or(0)
    }

    /// `C_d(T)`.
    pub fn congruence_sum(&self, d: u64) -> Result<f64> {
        if d == 0 {
            return Err(Error::domain("modulus d must be at least 1"));
        }
        Ok(self
            .iter()
            .filter(|(_, c)| c % d == 0)
            .map(|(w, _)| w)
            .sum())
    }

    /// `C_d(T)` for every `1 ≤ d ≤ d_limit`; index 0 is unused and zero.
    pub fn congruence_sums(&self, d_limit: u64, tables: &PrimeTables) -> Result<Vec<f64>> {
        if d_limit == 0 {
            return Err(Error::domain("d_limit must be at least 1"));
        }
        let n = d_limit as usize;
        let mut out = vec![0.0; n + 1];
        let max = self.max_value();
        if max <= BUCKET_LIMIT {
            let mut bucket = vec![0.0; max as usize + 1];
            for (w, c) in self.iter() {
                bucket[c as usize] += w;
            }
            for (d, slot) in out.iter_mut().enumerate().skip(1) {
                *slot = bucket.iter().step_by(d).skip(1).sum();
            }
        } else {
            for (w, c) in self.iter() {
                for d in tables.factorize(c)?.divisors_up_to(d_limit) {
                    out[d as usize] += w;
                }
            }
        }
        Ok(out)
    }
}

/// How a family produces its support at a given `T`.
#[derive(Clone)]
pub enum FamilyKind {
    /// `χ_T = 1` on `[1, T]`, `c_n = n`.
    Identity,
    /// `c_x = |Q(x)|` over integer points of the closed box `T·𝒟`, skipping zeros of `Q`.
    PolynomialBox {
        q: Polynomial,
        bounds: Vec<(f64, f64)>,
    },
    /// `c_x = |Q₂(x)|` over integer points of `[−T, T]ⁿ` with `Q₁(x) = 0 ≠ Q₂(x)`.
    Variety {
        q1: Polynomial,
        q2: Polynomial,
        dim: usize,
    },
    Custom(Arc<dyn Fn(f64) -> Result<Support> + Send + Sync>),
}

impl fmt::Debug for FamilyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FamilyKind::Identity => write!(f, "Identity"),
            FamilyKind::PolynomialBox { q, bounds } => write!(f, "PolynomialBox({q}, {bounds:?})"),
            FamilyKind::Variety { q1, q2, dim } => write!(f, "Variety({q1}, {q2}, dim {dim})"),
            FamilyKind::Custom(_) => write!(f, "Custom"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct WeightedFamily {
    name: String,
    kind: FamilyKind,
    model: EquidistModel,
}

impl WeightedFamily {
    pub fn identity(model: EquidistModel) -> Self {
        WeightedFamily {
            name: "identity".into(),
            kind: FamilyKind::Identity,
            model,
        }
    }

    pub fn polynomial_box(
        q: Polynomial,
        bounds: Vec<(f64, f64)>,
        model: EquidistModel,
    ) -> Result<Self> {
        if q.is_zero() {
            return Err(Error::domain("zero polynomial"));
        }
        if q.degree() == 0 {
            return Err(Error::domain("polynomial must have degree at least 1"));
        }
        if bounds.is_empty() || bounds.len() > 3 {
            return Err(Error::domain("box dimension must be 1, 2 or 3"));
        }
        if q.num_vars() > bounds.len() {
            return Err(Error::domain(format!(
                "polynomial uses {} variables but the box has dimension {}",
                q.num_vars(),
                bounds.len()
            )));
        }
        for &(lo, hi) in &bounds {
            if !(lo.is_finite() && hi.is_finite()) {
                return Err(Error::domain("unbounded box"));
            }
            if lo > hi {
                return Err(Error::domain(format!("empty box side [{lo}, {hi}]")));
            }
        }
        let name = format!("polybox[{q}]");
        Ok(WeightedFamily {
            name,
            kind: FamilyKind::PolynomialBox { q, bounds },
            model,
        })
    }

    pub fn variety(q1: Polynomial, q2: Polynomial, model: EquidistModel) -> Result<Self> {
        if q1.is_zero() || q2.is_zero() {
            return Err(Error::domain("zero polynomial"));
        }
        if q1.degree() == 0 && q2.degree() == 0 {
            return Err(Error::domain("polynomial must have degree at least 1"));
        }
        let dim = q1.num_vars().max(q2.num_vars());
        let name = format!("variety[{q1} = 0, {q2}]");
        Ok(WeightedFamily {
            name,
            kind: FamilyKind::Variety { q1, q2, dim },
            model,
        })
    }

    pub fn custom(
        name: impl Into<String>,
        model: EquidistModel,
        f: Arc<dyn Fn(f64) -> Result<Support> + Send + Sync>,
    ) -> Self {
        WeightedFamily {
            name: name.into(),
            kind: FamilyKind::Custom(f),
            model,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> &FamilyKind {
        &self.kind
    }

    pub fn model(&self) -> &EquidistModel {
        &self.model
    }

    pub fn with_model(mut self, model: EquidistModel) -> Self {
        self.model = model;
        self
    }

    pub fn enumerate(&self, t: f64) -> Result<Support> {
        if !(t >= 1.0 && t.is_finite()) {
            return Err(Error::domain(format!("T = {t} must be a finite real >= 1")));
        }
        match &self.kind {
            FamilyKind::Identity => {
                let n = t.floor() as u64;
                if n > SUPPORT_CAP {
                    return Err(support_too_large(n as f64));
                }
                Ok(Support::unit(t, (1..=n).collect()))
            }
            FamilyKind::PolynomialBox { q, bounds } => {
                let ranges: Vec<(i64, i64)> = bounds
                    .iter()
                    .map(|&(lo, hi)| ((t * lo).ceil() as i64, (t * hi).floor() as i64))
                    .collect();
                let values = lattice_values(&ranges, |x| {
                    let v = q.eval(x).ok_or_else(overflow)?;
                    Ok(if v == 0 { None } else { Some(v) })
                })?;
                Ok(Support::unit(t, values))
            }
            FamilyKind::Variety { q1, q2, dim } => {
                let r = t.floor() as i64;
                let ranges = vec![(-r, r); (*dim).max(1)];
                let values = lattice_values(&ranges, |x| {
                    if q1.eval(x).ok_or_else(overflow)? != 0 {
                        return Ok(None);
                    }
                    let v = q2.eval(x).ok_or_else(overflow)?;
                    Ok(if v == 0 { None } else { Some(v) })
                })?;
                Ok(Support::unit(t, values))
            }
            FamilyKind::Custom(f) => f(t),
        }
    }

    /// `C_d(T)` computed from a fresh enumeration.
    pub fn congruence_sum(&self, d: u64, t: f64) -> Result<f64> {
        self.enumerate(t)?.congruence_sum(d)
    }
}

fn overflow() -> Error {
    Error::domain("polynomial value overflows 64 bits")
}

fn support_too_large(points: f64) -> Error {
    Error::domain(format!(
        "support of {points} points exceeds the cap of {SUPPORT_CAP}"
    ))
}

fn lattice_values(
    ranges: &[(i64, i64)],
    mut value: impl FnMut(&[i64]) -> Result<Option<i128>>,
) -> Result<Vec<u64>> {
    let mut points = 1.0f64;
    for &(lo, hi) in ranges {
        if hi < lo {
            return Ok(Vec::new());
        }
        points *= (hi - lo + 1) as f64;
    }
    if points > SUPPORT_CAP as f64 {
        return Err(support_too_large(points));
    }
    let mut out = Vec::new();
    let mut x: Vec<i64> = ranges.iter().map(|r| r.0).collect();
    loop {
        if let Some(v) = value(&x)? {
            let v = u64::try_from(v.unsigned_abs()).map_err(|_| overflow())?;
            out.push(v);
        }
        let mut i = ranges.len();
        loop {
            if i == 0 {
                return Ok(out);
            }
            i -= 1;
            if x[i] < ranges[i].1 {
                x[i] += 1;
                break;
            }
            x[i] = ranges[i].0;
        }
    }
}

/// One grid point of [`check_family`].
#[derive(Debug, Clone, PartialEq)]
pub struct FamilyRow {
    pub t: f64,
    pub support_size: usize,
    pub total_weight: f64,
    pub mass: f64,
    pub max_value: u64,
    pub growth_bound: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FamilyReport {
    pub rows: Vec<FamilyRow>,
    pub weight_increasing: bool,
    pub growth_ok: bool,
}

impl FamilyReport {
    pub fn passed(&self) -> bool {
        self.weight_increasing && self.growth_ok
    }
}

/// Checks growing total weight and `c_a ≤ B̃ M^α` along a `T` grid.
pub fn check_family(fam: &WeightedFamily, grid: &[f64]) -> Result<FamilyReport> {
    let model = fam.model();
    let mut rows = Vec::with_capacity(grid.len());
    for &t in grid {
        let s = fam.enumerate(t)?;
        let mass = model.mass(t, &s);
        rows.push(FamilyRow {
            t,
            support_size: s.len(),
            total_weight: s.total_weight(),
            mass,
            max_value: s.max_value(),
            growth_bound: model.b_tilde() * mass.powf(model.alpha()),
        });
    }
    let weight_increasing = rows
        .windows(2)
        .all(|w| w[1].total_weight > w[0].total_weight);
    let growth_ok = rows
        .iter()
        .all(|r| r.max_value as f64 <= r.growth_bound * (1.0 + 1e-12));
    Ok(FamilyReport {
        rows,
        weight_increasing,
        growth_ok,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsRow {
    pub d: u64,
    pub c_d: f64,
    pub h_d_m: f64,
    pub residual: f64,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsTable {
    pub t: f64,
    pub mass: f64,
    pub rows: Vec<DiagnosticsRow>,
    pub max_score: f64,
    pub argmax: u64,
}

/// Residuals `C_d(T) − h(d)M` for `d ≤ d_limit`, normalized by the error envelope.
pub fn equidist_diagnostics(
    fam: &WeightedFamily,
    t: f64,
    d_limit: u64,
    tables: &PrimeTables,
) -> Result<DiagnosticsTable> {
    let support = fam.enumerate(t)?;
    diagnostics_for(fam.model(), &support, d_limit, tables)
}

pub fn diagnostics_for(
    model: &EquidistModel,
    support: &Support,
    d_limit: u64,
    tables: &PrimeTables,
) -> Result<DiagnosticsTable> {
    let t = support.t();
    let m = model.mass(t, support);
    if !(m > 0.0 && m.is_finite()) {
        return Err(Error::domain(format!("mass M(T) = {m} must be positive")));
    }
    let level = m.powf(model.theta());
    if d_limit as f64 > level * (1.0 + 1e-9) {
        return Err(Error::domain(format!(
            "d_limit = {d_limit} exceeds the level M^theta = {level}"
        )));
    }
    let h = model.density_at(t);
    let b = h.params().b;
    let hp = |p: u64| h.at_prime(p);
    let full = mertens_log(tables, b, m, |_| true, hp)?;
    let envelope_tail = m.powf(1.0 - model.xi());
    let sums = support.congruence_sums(d_limit, tables)?;
    let mut rows = Vec::with_capacity(d_limit as usize);
    let (mut max_score, mut argmax) = (0.0f64, 1u64);
    for d in 1..=d_limit {
        let fd = tables.factorize(d)?;
        let hd = h.eval(&fd);
        if !(hd >= 0.0 && hd.is_finite()) {
            return Err(Error::domain(format!(
                "h({d}) = {hd} is not a nonnegative real"
            )));
        }
        let mut log_prod = full;
        for &(p, _) in fd.factors() {
            let pf = p as f64;
            if pf > b && pf <= m {
                log_prod -= (-hp(p)).ln_1p();
            }
        }
        let h_d_m = hd * m;
        let c_d = sums[d as usize];
        let residual = c_d - h_d_m;
        let score = residual.abs() / (h_d_m * (2.0 * log_prod).exp() + envelope_tail);
        if score > max_score {
            max_score = score;
            argmax = d;
        }
        rows.push(DiagnosticsRow {
            d,
            c_d,
            h_d_m,
            residual,
            score,
        });
    }
    Ok(DiagnosticsTable {
        t,
        mass: m,
        rows,
        max_score,
        argmax,
    })
}

/// `h(pᵉ) = ρ(pᵉ)/pᵉ`, where `ρ` counts roots of a univariate `Q` modulo `pᵉ`.
pub fn root_density(q: &Polynomial, params: DensityParams) -> Result<DensityFunction> {
    let counter = RootCounter::new(q)?;
    let name = format!("roots[{q}]");
    DensityFunction::new(name, params, move |p, e| {
        counter.count(p, e) / (p as f64).powi(e as i32)
    })
}

/// Counts `#{x mod pᵉ : Q(x) ≡ 0}` with caching.
#[derive(Debug)]
pub struct RootCounter {
    coeffs: Vec<i64>,
    cache: Mutex<HashMap<(u64, u32), f64>>,
}

const EXHAUSTIVE_LIMIT: u64 = 10_000;

impl RootCounter {
    pub fn new(q: &Polynomial) -> Result<Self> {
        let coeffs = q
            .univariate_coeffs()
            .ok_or_else(|| Error::domain("root densities need a univariate polynomial"))?;
        if q.is_zero() || q.degree() == 0 {
            return Err(Error::domain(
                "root densities need a polynomial of degree at least 1",
            ));
        }
        Ok(RootCounter {
            coeffs,
            cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn count(&self, p: u64, e: u32) -> f64 {
        if e == 0 {
            return 1.0;
        }
        if let Some(&v) = self.cache.lock().expect("cache").get(&(p, e)) {
            return v;
        }
        let v = count_roots(&self.coeffs, p, e);
        self.cache.lock().expect("cache").insert((p, e), v);
        v
    }
}

fn count_roots(coeffs: &[i64], p: u64, e: u32) -> f64 {
    // Q = p·Q' gives ρ_Q(pᵉ) = p·ρ_{Q'}(pᵉ⁻¹)
    if coeffs.iter().all(|&c| c.rem_euclid(p as i64) == 0) {
        if e == 1 {
            return p as f64;
        }
        let reduced: Vec<i64> = coeffs.iter().map(|c| c / p as i64).collect();
        return p as f64 * count_roots(&reduced, p, e - 1);
    }
    let pe = (p as u128).checked_pow(e);
    if let Some(pe) = pe.filter(|&m| m <= EXHAUSTIVE_LIMIT as u128) {
        let m = pe as u64;
        return (0..m).filter(|&x| eval_mod(coeffs, x, m) == 0).count() as f64;
    }
    let modp: Vec<u64> = coeffs
        .iter()
        .map(|c| c.rem_euclid(p as i64) as u64)
        .collect();
    // simple roots mod p lift uniquely
    if e == 1 || is_separable_mod(&modp, p) {
        if p > EXHAUSTIVE_LIMIT {
            return distinct_roots_mod_p(&modp, p) as f64;
        }
        return (0..p).filter(|&x| eval_mod(coeffs, x, p) == 0).count() as f64;
    }
    hensel_count(coeffs, p, e)
}

fn hensel_count(coeffs: &[i64], p: u64, e: u32) -> f64 {
    let mut roots: Vec<u128> = (0..p)
        .filter(|&x| eval_mod(coeffs, x, p) == 0)
        .map(|x| x as u128)
        .collect();
    let mut modulus = p as u128;
    for _ in 1..e {
        let next = modulus * p as u128;
        let mut lifted = Vec::new();
        for &r in &roots {
            for t in 0..p as u128 {
                let x = r + t * modulus;
                if eval_mod_wide(coeffs, x, next) == 0 {
                    lifted.push(x);
                }
            }
        }
        roots = lifted;
        modulus = next;
        if roots.is_empty() {
            break;
        }
    }
    roots.len() as f64
}

fn eval_mod(coeffs: &[i64], x: u64, m: u64) -> u64 {
    eval_mod_wide(coeffs, x as u128, m as u128) as u64
}

fn eval_mod_wide(coeffs: &[i64], x: u128, m: u128) -> u128 {
    let mut acc: u128 = 0;
    for &c in coeffs.iter().rev() {
        let c = (c as i128).rem_euclid(m as i128) as u128;
        acc = (mul_mod(acc, x % m, m) + c) % m;
    }
    acc
}

fn mul_mod(a: u128, b: u128, m: u128) -> u128 {
    if let Some(v) = a.checked_mul(b) {
        return v % m;
    }
    let (mut a, mut b, mut acc) = (a % m, b, 0u128);
    while b > 0 {
        if b & 1 == 1 {
            acc = (acc + a) % m;
        }
        a = (a << 1) % m;
        b >>= 1;
    }
    acc
}

fn trim(a: &mut Vec<u64>) {
    while a.last() == Some(&0) {
        a.pop();
    }
}

fn inv_mod(a: u64, p: u64) -> u64 {
    pow_mod(a, p - 2, p)
}

fn pow_mod(mut a: u64, mut k: u64, p: u64) -> u64 {
    let mut acc = 1u64;
    a %= p;
    while k > 0 {
        if k & 1 == 1 {
            acc = (acc as u128 * a as u128 % p as u128) as u64;
        }
        a = (a as u128 * a as u128 % p as u128) as u64;
        k >>= 1;
    }
    acc
}

fn poly_rem(a: &[u64], b: &[u64], p: u64) -> Vec<u64> {
    let mut r = a.to_vec();
    trim(&mut r);
    let db = b.len() - 1;
    let inv = inv_mod(b[db], p);
    while r.len() > db {
        let k = r.len() - 1;
        let factor = (r[k] as u128 * inv as u128 % p as u128) as u64;
        for i in 0..=db {
            let sub = (factor as u128 * b[i] as u128 % p as u128) as u64;
            let slot = &mut r[k - db + i];
            *slot = (*slot + p - sub) % p;
        }
        trim(&mut r);
    }
    r
}

fn poly_mulmod(a: &[u64], b: &[u64], f: &[u64], p: u64) -> Vec<u64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0u64; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] = ((out[i + j] as u128 + x as u128 * y as u128) % p as u128) as u64;
        }
    }
    poly_rem(&out, f, p)
}

fn poly_gcd(a: &[u64], b: &[u64], p: u64) -> Vec<u64> {
    let (mut a, mut b) = (a.to_vec(), b.to_vec());
    trim(&mut a);
    trim(&mut b);
    while !b.is_empty() {
        let r = poly_rem(&a, &b, p);
        a = b;
        b = r;
    }
    a
}

fn is_separable_mod(f: &[u64], p: u64) -> bool {
    let mut f = f.to_vec();
    trim(&mut f);
    let deriv: Vec<u64> = f
        .iter()
        .enumerate()
        .skip(1)
        .map(|(i, &c)| (c as u128 * (i as u128 % p as u128) % p as u128) as u64)
        .collect();
    let mut deriv = deriv;
    trim(&mut deriv);
    if deriv.is_empty() {
        return f.len() <= 1;
    }
    poly_gcd(&f, &deriv, p).len() <= 1
}

/// Degree of `gcd(x^p − x, f)` over `F_p`.
fn distinct_roots_mod_p(f: &[u64], p: u64) -> usize {
    let mut f = f.to_vec();
    trim(&mut f);
    if f.len() <= 1 {
        return if f.is_empty() { p as usize } else { 0 };
    }
    let mut acc = vec![1u64];
    let mut base = poly_rem(&[0, 1], &f, p);
    let mut k = p;
    while k > 0 {
        if k & 1 == 1 {
            acc = poly_mulmod(&acc, &base, &f, p);
        }
        base = poly_mulmod(&base, &base, &f, p);
        k >>= 1;
    }
    acc.resize(acc.len().max(2), 0);
    acc[1] = (acc[1] + p - 1) % p;
    trim(&mut acc);
    if acc.is_empty() {
        return f.len() - 1;
    }
    poly_gcd(&f, &acc, p).len() - 1
}

/// `FactoredInteger` for each value in a support, shared by downstream passes.
pub fn factor_support(support: &Support, tables: &PrimeTables) -> Result<Vec<FactoredInteger>> {
    support
        .values()
        .iter()
        .map(|&c| tables.factorize(c))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tables() -> PrimeTables {
        PrimeTables::new(100_000).unwrap()
    }

    #[test]
    fn parse_and_display() {
        let q = Polynomial::parse("x^2 + y^2").unwrap();
        assert_eq!(q.degree(), 2);
        assert_eq!(q.num_vars(), 2);
        assert_eq!(q.eval(&[3, 4]), Some(25));
        let r = Polynomial::parse("3*x*y - 2*z^3 + 7").unwrap();
        assert_eq!(r.eval(&[1, 2, 1]), Some(11));
        assert_eq!(Polynomial::parse(&r.to_string()).unwrap(), r);
        assert_eq!(Polynomial::parse("-x+1").unwrap().eval(&[5]), Some(-4));
        assert!(Polynomial::parse("x - x").unwrap().is_zero());
        assert!(Polynomial::parse("x + w").is_err());
        assert!(Polynomial::parse("").is_err());
        assert!(Polynomial::parse("x +").is_err());
    }

    #[test]
    fn identity_support_and_congruence() {
        let fam = WeightedFamily::identity(EquidistModel::identity_standard());
        let s = fam.enumerate(10.0).unwrap();
        assert_eq!(s.values(), &(1..=10).collect::<Vec<_>>()[..]);
        assert_eq!(s.congruence_sum(3).unwrap(), 3.0);
        assert_eq!(s.congruence_sum(1).unwrap(), s.total_weight());
        assert!(s.congruence_sum(0).is_err());
    }

    #[test]
    fn polynomial_box_values() {
        let m = EquidistModel::identity_standard().with_mass(Mass::TotalWeight);
        let q = Polynomial::parse("x^2+1").unwrap();
        let fam = WeightedFamily::polynomial_box(q, vec![(0.0, 1.0)], m.clone()).unwrap();
        assert_eq!(fam.enumerate(5.0).unwrap().values(), &[1, 2, 5, 10, 17, 26]);
        let q2 = Polynomial::parse("x^2+y^2").unwrap();
        let fam2 = WeightedFamily::polynomial_box(q2, vec![(0.0, 1.0); 2], m.clone()).unwrap();
        assert_eq!(fam2.enumerate(3.0).unwrap().len(), 15);
        let zero = Polynomial::parse("0").unwrap();
        assert!(WeightedFamily::polynomial_box(zero, vec![(0.0, 1.0)], m.clone()).is_err());
        let q3 = Polynomial::parse("x").unwrap();
        assert!(WeightedFamily::polynomial_box(q3, vec![(0.0, f64::INFINITY)], m).is_err());
    }

    #[test]
    fn variety_family() {
        let m = EquidistModel::identity_standard().with_mass(Mass::TotalWeight);
        let q1 = Polynomial::parse("x - y").unwrap();
        let q2 = Polynomial::parse("x^2 + 1").unwrap();
        let fam = WeightedFamily::variety(q1, q2, m).unwrap();
        let s = fam.enumerate(2.0).unwrap();
        assert_eq!(s.values(), &[5, 2, 1, 2, 5]);
    }

    #[test]
    fn model_rejects_bad_levels() {
        let h = EquidistModel::identity_standard().density().clone();
        assert!(EquidistModel::new(h.clone(), Mass::T, 1.0, 0.9, 1.0, 1.0).is_err());
        assert!(EquidistModel::new(h, Mass::T, 0.5, 1.2, 1.0, 1.0).is_err());
    }

    #[test]
    fn diagnostics_small() {
        let fam = WeightedFamily::identity(EquidistModel::identity_standard());
        let t = tables();
        let table = equidist_diagnostics(&fam, 10.0, 3, &t).unwrap();
        let row = &table.rows[2];
        assert!((row.residual + 1.0 / 3.0).abs() < 1e-12);
        assert!(row.score < 1.0);
        assert!(equidist_diagnostics(&fam, 10.0, 4, &t).is_err());
        let exact = fam
            .clone()
            .with_model(EquidistModel::identity_standard().with_mass(Mass::TotalWeight));
        let table = equidist_diagnostics(&exact, 100.0, 10, &t).unwrap();
        assert_eq!(table.rows[0].residual, 0.0);
    }

    #[test]
    fn family_report() {
        let fam = WeightedFamily::identity(EquidistModel::identity_standard());
        let r = check_family(&fam, &[10.0, 100.0, 1000.0]).unwrap();
        assert!(r.passed());
        let r = check_family(&fam, &[100.0, 10.0]).unwrap();
        assert!(!r.weight_increasing);
    }

    #[test]
    fn root_counts_match_exhaustive() {
        let q = Polynomial::parse("x^2 + 1").unwrap();
        let c = RootCounter::new(&q).unwrap();
        assert_eq!(c.count(2, 1), 1.0);
        assert_eq!(c.count(2, 2), 0.0);
        assert_eq!(c.count(3, 1), 0.0);
        assert_eq!(c.count(5, 3), 2.0);
        // large primes go through the gcd path
        assert_eq!(c.count(100_003, 1), 0.0);
        assert_eq!(c.count(100_049, 1), 2.0);
        assert_eq!(c.count(100_049, 2), 2.0);
        let sq = RootCounter::new(&Polynomial::parse("x^2").unwrap()).unwrap();
        assert_eq!(sq.count(101, 3), 101.0);
        let scaled = RootCounter::new(&Polynomial::parse("6*x + 6").unwrap()).unwrap();
        assert_eq!(scaled.count(2, 3), 2.0);
    }
}
