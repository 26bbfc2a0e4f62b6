//! Both sides of the upper and lower bounds, the flat/rough split with its
//! case decomposition, and the flat part used on the lower side.

use std::fmt;

use rayon::prelude::*;

use crate::arith::{log_log, mertens_log, FactoredInteger, PrimeTables};
use crate::error::{Error, Result};
use crate::families::{EquidistModel, Support, WeightedFamily};
use crate::multfn::{ArithmeticFunction, DensityFunction, DensityParams};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecompositionConstants {
    pub eta1: f64,
    pub eta2: f64,
    pub eta3: f64,
    /// `Z = M^{αη₁}`.
    pub z_big: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LowerBoundConstants {
    pub v: f64,
    pub v0: f64,
    /// `z = M^v`.
    pub z: f64,
}

/// `η₁, η₂, η₃, Z` and `v, v₀, z` at mass `M`.
pub fn compute_constants(
    model: &EquidistModel,
    params: &DensityParams,
    mass: f64,
) -> (DecompositionConstants, LowerBoundConstants) {
    let (theta, xi, alpha) = (model.theta(), model.xi(), model.alpha());
    let eta1 = (xi / 20.0).min(theta / 2.0).min(0.5) / alpha;
    let eta2 = 0.5;
    let (l1, l2) = (params.lambda1, params.lambda2);
    let eta3 = (l1 * eta2 / (2.0 * (1.0 + l1 + l2))).min(0.5);
    let z_big = mass.powf(alpha * eta1);

    let mut denom = 1.0 + 9.0 * params.kappa + 2f64.ln() + 10.0 * params.k.ln();
    if denom <= 0.0 {
        // the product condition with K also holds with K = 1
        denom = 1.0 + 9.0 * params.kappa + 2f64.ln();
    }
    let v = 1f64.min(theta * 0.25f64.min(xi / (4.0 * theta)) / denom);
    let v0 = (v / 2.0).min(theta / 2.0);
    (
        DecompositionConstants {
            eta1,
            eta2,
            eta3,
            z_big,
        },
        LowerBoundConstants {
            v,
            v0,
            z: mass.powf(v),
        },
    )
}

/// `c = d·b` with `d` the longest prefix of prime powers (increasing primes)
/// whose product stays `≤ Z`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FlatRoughSplit {
    pub d: u64,
    pub b: u64,
    /// `P⁻(b)`, absent for `b = 1`.
    pub rough_least_prime: Option<u64>,
}

pub fn split_flat_rough(c: &FactoredInteger, z_big: f64) -> FlatRoughSplit {
    let cap = if z_big >= u128::MAX as f64 {
        u128::MAX
    } else {
        z_big.max(0.0).floor() as u128
    };
    let mut d: u128 = 1;
    let mut taken = 0;
    for &(p, e) in c.factors() {
        let pe = (p as u128).pow(e);
        match d.checked_mul(pe) {
            Some(next) if next <= cap => {
                d = next;
                taken += 1;
            }
            _ => break,
        }
    }
    let d = d as u64;
    FlatRoughSplit {
        d,
        b: c.value() / d,
        rough_least_prime: c.factors().get(taken).map(|&(p, _)| p),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Case {
    I,
    II,
    III,
    IV,
}

impl Case {
    pub const ALL: [Case; 4] = [Case::I, Case::II, Case::III, Case::IV];

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Case {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Case::I => "i",
            Case::II => "ii",
            Case::III => "iii",
            Case::IV => "iv",
        })
    }
}

/// Precomputed thresholds `Z^{η₃}`, `Z^{1−η₂}` and `(log Z) log log Z`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CaseThresholds {
    pub z_big: f64,
    pub rough: f64,
    pub flat: f64,
    /// Absent when `Z < 16`.
    pub small_prime: Option<f64>,
}

impl CaseThresholds {
    pub fn new(consts: &DecompositionConstants) -> Self {
        let z = consts.z_big;
        CaseThresholds {
            z_big: z,
            rough: z.powf(consts.eta3),
            flat: z.powf(1.0 - consts.eta2),
            small_prime: log_log(z).ok().map(|ll| z.ln() * ll),
        }
    }

    /// Cases are tried in the order (i), (ii), (iii), (iv). Only elements that
    /// reach the (iii)/(iv) test need `Z ≥ 16`.
    pub fn classify(&self, split: &FlatRoughSplit) -> Result<Case> {
        let pb = split.rough_least_prime.map_or(f64::INFINITY, |p| p as f64);
        if pb >= self.rough {
            return Ok(Case::I);
        }
        if split.d as f64 <= self.flat {
            return Ok(Case::II);
        }
        let bound = self.small_prime.ok_or_else(|| {
            Error::domain(format!(
                "Z = {} is below 16, so (log Z) log log Z is undefined",
                self.z_big
            ))
        })?;
        Ok(if pb <= bound { Case::III } else { Case::IV })
    }
}

pub fn classify_case(split: &FlatRoughSplit, consts: &DecompositionConstants) -> Result<Case> {
    CaseThresholds::new(consts).classify(split)
}

/// `c♭ = ∏_{p≤z} p^{v_p(c)}`.
pub fn flat_part(c: &FactoredInteger, z: f64) -> u64 {
    c.factors()
        .iter()
        .take_while(|&&(p, _)| p as f64 <= z)
        .map(|&(p, e)| p.pow(e))
        .product()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LhsBreakdown {
    pub lhs: f64,
    pub cases: [f64; 4],
    pub counts: [u64; 4],
}

/// `Σ χ_T(a) f(c_a)` over a materialized support, split by case.
pub fn lhs_from_support(
    support: &Support,
    f: &ArithmeticFunction,
    thresholds: &CaseThresholds,
    tables: &PrimeTables,
) -> Result<LhsBreakdown> {
    let mut out = LhsBreakdown {
        lhs: 0.0,
        cases: [0.0; 4],
        counts: [0; 4],
    };
    for (w, c) in support.iter() {
        let fc = tables.factorize(c)?;
        let term = w * f.eval(&fc);
        let case = thresholds.classify(&split_flat_rough(&fc, thresholds.z_big))?;
        out.lhs += term;
        out.cases[case.index()] += term;
        out.counts[case.index()] += 1;
    }
    Ok(out)
}

pub fn lhs_sum(
    fam: &WeightedFamily,
    f: &ArithmeticFunction,
    t: f64,
    tables: &PrimeTables,
) -> Result<LhsBreakdown> {
    let support = fam.enumerate(t)?;
    let model = fam.model();
    let m = model.mass(t, &support);
    let h = model.density_at(t);
    let (consts, _) = compute_constants(model, h.params(), m);
    lhs_from_support(&support, f, &CaseThresholds::new(&consts), tables)
}

/// `Σ_{a≤M} f(a) h(a)`.
fn weighted_head(
    f: &ArithmeticFunction,
    h: &DensityFunction,
    m: f64,
    tables: &PrimeTables,
) -> Result<f64> {
    let n = m.floor() as u64;
    if n > tables.limit() {
        return Err(Error::domain(format!(
            "M = {m} exceeds the prime table limit {}",
            tables.limit()
        )));
    }
    if n == 0 {
        return Ok(0.0);
    }
    let ft = f.table(tables, n)?;
    let ht = h.table(tables, n)?;
    Ok(ft.values()[1..]
        .iter()
        .zip(&ht.values()[1..])
        .map(|(a, b)| a * b)
        .sum())
}

/// `M ∏_{B<p≤M}(1 − h(p)) Σ_{a≤M} f(a)h(a)`.
pub fn upper_rhs_at(
    f: &ArithmeticFunction,
    h: &DensityFunction,
    m: f64,
    tables: &PrimeTables,
) -> Result<f64> {
    let log_prod = mertens_log(tables, h.params().b, m, |_| true, |p| h.at_prime(p))?;
    Ok(m * log_prod.exp() * weighted_head(f, h, m, tables)?)
}

/// `M ∏_{p≤M}(1 − h(p)) Σ_{a≤M} f(a)h(a)`, or `None` when some `h(p) ≥ 1`.
pub fn lower_rhs_at(
    f: &ArithmeticFunction,
    h: &DensityFunction,
    m: f64,
    tables: &PrimeTables,
) -> Result<Option<f64>> {
    match mertens_log(tables, 0.0, m, |_| true, |p| h.at_prime(p)) {
        Ok(log_prod) => Ok(Some(m * log_prod.exp() * weighted_head(f, h, m, tables)?)),
        Err(Error::DegenerateProduct { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

pub fn upper_bound_rhs(
    fam: &WeightedFamily,
    f: &ArithmeticFunction,
    t: f64,
    tables: &PrimeTables,
) -> Result<f64> {
    let support = fam.enumerate(t)?;
    let m = fam.model().mass(t, &support);
    upper_rhs_at(f, &fam.model().density_at(t), m, tables)
}

pub fn lower_bound_rhs(
    fam: &WeightedFamily,
    f: &ArithmeticFunction,
    t: f64,
    tables: &PrimeTables,
) -> Result<Option<f64>> {
    let support = fam.enumerate(t)?;
    let m = fam.model().mass(t, &support);
    lower_rhs_at(f, &fam.model().density_at(t), m, tables)
}

/// Error-term exponents of the case analysis and the matching powers of `M`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CaseEnvelopes {
    pub beta1: f64,
    pub beta2: f64,
    pub beta3: f64,
    /// `M^{1−ξ/3}`.
    pub m_xi3: f64,
    /// `M^{1−β₃}`, the joint envelope of cases (ii) and (iii).
    pub m_beta3: f64,
}

pub fn case_envelopes(
    model: &EquidistModel,
    params: &DensityParams,
    consts: &DecompositionConstants,
    mass: f64,
) -> CaseEnvelopes {
    let (xi, alpha) = (model.xi(), model.alpha());
    let (l1, l2) = (params.lambda1, params.lambda2);
    let DecompositionConstants {
        eta1, eta2, eta3, ..
    } = *consts;
    let shiu_c = (l1 / 2.0).min(1.0 / (1.0 + (2.0 * l2 / l1).floor()));
    let beta1 = (alpha * eta1 * (l1 * eta2 - eta3 * (1.0 + l1 + l2))).min(xi - alpha * eta1 * eta3);
    let beta2 = (xi - alpha * eta1).min(alpha * eta1 * (1.0 - eta2) * shiu_c / 2.0);
    let beta3 = [
        alpha * eta1 * (l1 * eta2 - eta3 * (1.0 + l1 + l2)) / 2.0,
        (xi - alpha * eta1) / 2.0,
        alpha * eta1 * (1.0 - eta2) * l1 / 8.0,
        alpha * eta1 * (1.0 - eta2) / (4.0 * (1.0 + (2.0 * l2 / l1).floor())),
    ]
    .into_iter()
    .fold(f64::INFINITY, f64::min);
    CaseEnvelopes {
        beta1,
        beta2,
        beta3,
        m_xi3: mass.powf(1.0 - xi / 3.0),
        m_beta3: mass.powf(1.0 - beta3),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub t: f64,
    pub m: f64,
    pub lhs: f64,
    pub rhs_upper: f64,
    pub ratio_upper: f64,
    /// Absent when the lower bound is inapplicable.
    pub rhs_lower: Option<f64>,
    pub ratio_lower: Option<f64>,
    pub cases: [f64; 4],
    pub case_counts: [u64; 4],
    pub decomposition: DecompositionConstants,
    pub lower_constants: LowerBoundConstants,
    pub envelopes: CaseEnvelopes,
}

pub fn bound_report(
    fam: &WeightedFamily,
    f: &ArithmeticFunction,
    t: f64,
    tables: &PrimeTables,
) -> Result<BoundReport> {
    let model = fam.model();
    let support = fam.enumerate(t)?;
    let m = model.mass(t, &support);
    let h = model.density_at(t);
    let (consts, lower_consts) = compute_constants(model, h.params(), m);
    let breakdown = lhs_from_support(&support, f, &CaseThresholds::new(&consts), tables)?;
    drop(support);
    let rhs_upper = upper_rhs_at(f, &h, m, tables)?;
    let rhs_lower = if f.is_multiplicative() {
        lower_rhs_at(f, &h, m, tables)?
    } else {
        None
    };
    Ok(BoundReport {
        t,
        m,
        lhs: breakdown.lhs,
        rhs_upper,
        ratio_upper: breakdown.lhs / rhs_upper,
        rhs_lower,
        ratio_lower: rhs_lower.map(|r| breakdown.lhs / r),
        cases: breakdown.cases,
        case_counts: breakdown.counts,
        decomposition: consts,
        lower_constants: lower_consts,
        envelopes: case_envelopes(model, h.params(), &consts, m),
    })
}

/// One report per grid point, computed in parallel and returned in grid order.
pub fn bound_scan(
    fam: &WeightedFamily,
    f: &ArithmeticFunction,
    grid: &[f64],
    tables: &PrimeTables,
) -> Result<Vec<BoundReport>> {
    grid.par_iter()
        .map(|&t| bound_report(fam, f, t, tables))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tables() -> PrimeTables {
        PrimeTables::new(1_000_000).unwrap()
    }

    fn fact(n: u64) -> FactoredInteger {
        tables().factorize(n).unwrap()
    }

    #[test]
    fn constants_match_formulas() {
        let model = EquidistModel::identity_standard();
        let params = *model.density().params();
        let (d, l) = compute_constants(&model, &params, 1e6);
        assert!((d.eta1 - 0.045).abs() < 1e-15);
        assert_eq!(d.eta2, 0.5);
        assert!((d.eta3 - 0.125).abs() < 1e-15);
        assert!((l.v - 0.125 / (10.0 + 2f64.ln())).abs() < 1e-15);
        assert!((l.v - 0.011690).abs() < 1e-6);
        assert!((l.v0 - l.v / 2.0).abs() < 1e-15);
        let doubled = EquidistModel::new(
            model.density().clone(),
            crate::families::Mass::T,
            0.5,
            0.9,
            2.0,
            1.0,
        )
        .unwrap();
        let (d2, _) = compute_constants(&doubled, &params, 1e6);
        assert!((d2.eta1 - d.eta1 / 2.0).abs() < 1e-15);
    }

    #[test]
    fn split_examples() {
        assert_eq!(
            split_flat_rough(&fact(60), 10.0),
            FlatRoughSplit {
                d: 4,
                b: 15,
                rough_least_prime: Some(3)
            }
        );
        assert_eq!(
            split_flat_rough(&fact(30), 30.0),
            FlatRoughSplit {
                d: 30,
                b: 1,
                rough_least_prime: None
            }
        );
        assert_eq!(
            split_flat_rough(&fact(7), 3.0),
            FlatRoughSplit {
                d: 1,
                b: 7,
                rough_least_prime: Some(7)
            }
        );
    }

    #[test]
    fn classification_examples() {
        let consts = DecompositionConstants {
            eta1: 0.045,
            eta2: 0.5,
            eta3: 0.125,
            z_big: 1e3,
        };
        let one = split_flat_rough(&fact(8), 1e3);
        assert_eq!(classify_case(&one, &consts).unwrap(), Case::I);
        // Z^{η₃} ≈ 2.37, Z^{1−η₂} ≈ 31.6
        let s = split_flat_rough(&fact(2 * 3 * 1009), 1e3);
        assert_eq!(s.d, 6);
        let s = FlatRoughSplit {
            d: 1,
            b: 2,
            rough_least_prime: Some(2),
        };
        assert_eq!(classify_case(&s, &consts).unwrap(), Case::II);
        let s = FlatRoughSplit {
            d: 512,
            b: 2,
            rough_least_prime: Some(2),
        };
        assert_eq!(classify_case(&s, &consts).unwrap(), Case::III);
        let tiny = DecompositionConstants {
            z_big: 4.0,
            eta3: 1.0,
            ..consts
        };
        assert!(classify_case(
            &FlatRoughSplit {
                d: 3,
                b: 2,
                rough_least_prime: Some(2)
            },
            &tiny
        )
        .is_err());
        assert_eq!(
            classify_case(
                &FlatRoughSplit {
                    d: 3,
                    b: 1,
                    rough_least_prime: None
                },
                &tiny
            )
            .unwrap(),
            Case::I
        );
    }

    #[test]
    fn flat_part_examples() {
        assert_eq!(flat_part(&fact(60), 4.0), 12);
        assert_eq!(flat_part(&fact(60), 2.0), 4);
        assert_eq!(flat_part(&fact(60), 5.0), 60);
        assert_eq!(flat_part(&fact(1), 5.0), 1);
    }

    #[test]
    fn lhs_and_rhs_small() {
        let t = tables();
        let fam = WeightedFamily::identity(EquidistModel::identity_standard());
        let tau = ArithmeticFunction::divisor_count();
        assert_eq!(lhs_sum(&fam, &tau, 10.0, &t).unwrap().lhs, 27.0);
        assert_eq!(
            lhs_sum(&fam, &ArithmeticFunction::one(), 10.0, &t)
                .unwrap()
                .lhs,
            10.0
        );
        let rhs = upper_bound_rhs(&fam, &ArithmeticFunction::one(), 10.0, &t).unwrap();
        let harmonic: f64 = (1..=10).map(|n| 1.0 / n as f64).sum();
        assert!((rhs - 10.0 * 8.0 / 35.0 * harmonic).abs() < 1e-12);
        assert!((rhs - 6.6947).abs() < 1e-4);
        let lower = lower_bound_rhs(&fam, &ArithmeticFunction::one(), 10.0, &t)
            .unwrap()
            .unwrap();
        assert!(rhs >= lower);
        let delta = ArithmeticFunction::multiplicative("delta", |_, _| 0.0);
        let r = upper_bound_rhs(&fam, &delta, 10.0, &t).unwrap();
        assert!((r - 10.0 * 8.0 / 35.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_lower_bound_is_absent() {
        let t = tables();
        let params = DensityParams::new(1.0, 1.0, 0.0, 2.0, 1.0).unwrap();
        let h = DensityFunction::new("heavy", params, |p, e| {
            if p == 2 {
                1.0
            } else {
                (p as f64).powi(-(e as i32))
            }
        })
        .unwrap();
        let model = EquidistModel::new(h, crate::families::Mass::T, 0.5, 0.9, 1.0, 1.0).unwrap();
        let fam = WeightedFamily::identity(model);
        let r = bound_report(&fam, &ArithmeticFunction::one(), 1000.0, &t).unwrap();
        assert!(r.rhs_lower.is_none() && r.ratio_lower.is_none());
        assert!(r.rhs_upper > 0.0);
    }
}
