use std::fmt;

use sievebound::bounds::{bound_scan, Case};
use sievebound::families::{diagnostics_for, WeightedFamily};
use sievebound::lemmas::{
    lemma210_exp_bound, lemma21_smooth_tail, lemma22_euler_product, lemma23_majorant, lemma24_tail,
    lemma25_h_ratio, lemma26_tail_vs_head, lemma27_weighted_product_sum, sweep, EnvelopeParams,
    LemmaReport, SeriesMode,
};
use sievebound::multfn::{
    check_density_class, check_growth_class, check_lower_positivity, default_density_grid,
    ClassReport, GrowthParams,
};
use sievebound::sieve::{build_weights_with_beta, default_beta, verify_weights, Side};
use sievebound::PrimeTables;

use crate::config::{Config, ConfigError};
use crate::{num, opt_num, CliError, Table};

pub const LEMMA_IDS: &[&str] = &["2.1", "2.2", "2.3", "2.4", "2.5", "2.6", "2.7", "2.10"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Command {
    ClassCheck,
    Equidist,
    SieveVerify,
    Lemma(String),
    Bound { envelopes: bool },
    Cases,
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Command::ClassCheck => f.write_str("class-check"),
            Command::Equidist => f.write_str("equidist"),
            Command::SieveVerify => f.write_str("sieve-verify"),
            Command::Lemma(id) => write!(f, "lemma {id}"),
            Command::Bound { .. } => f.write_str("bound"),
            Command::Cases => f.write_str("cases"),
        }
    }
}

pub fn run(command: &Command, cfg: &Config) -> Result<Table, CliError> {
    match command {
        Command::ClassCheck => class_check(cfg),
        Command::Equidist => equidist(cfg),
        Command::SieveVerify => sieve_verify(cfg),
        Command::Lemma(id) => lemma(cfg, id),
        Command::Bound { envelopes } => bound(cfg, *envelopes),
        Command::Cases => cases(cfg),
    }
}

fn tables(cfg: &Config, default: u64) -> Result<PrimeTables, CliError> {
    let limit = cfg.integer("limits", "primes", default)?;
    Ok(PrimeTables::new(limit)?)
}

/// Prime table covering `M` and the square root of the largest value at the
/// last grid point, at least 10⁵.
fn default_prime_limit(fam: &WeightedFamily, grid: &[f64]) -> Result<u64, CliError> {
    let tmax = grid.last().copied().unwrap_or(1.0);
    let support = fam.enumerate(tmax)?;
    let m = fam.model().mass(tmax, &support);
    let root = (support.max_value() as f64).sqrt() + 1.0;
    Ok((m.max(root).ceil() as u64).clamp(100_000, 200_000_000))
}

fn class_rows(table: &mut Table, check: &str, report: &ClassReport) {
    for c in &report.conditions {
        table.push(vec![
            check.to_string(),
            c.condition.clone(),
            c.passed.to_string(),
            num(c.worst_slack),
            c.witness.clone().unwrap_or_default(),
            c.violations.to_string(),
            c.checked_range.clone(),
        ]);
    }
    table.summary.push(format!(
        "{check}: {}",
        if report.passed() { "pass" } else { "FAIL" }
    ));
}

fn class_check(cfg: &Config) -> Result<Table, CliError> {
    let h = cfg.density()?;
    let f = cfg.function("function", "name", "one")?;
    let density_primes = cfg.integer("limits", "density_primes", 100_000)?;
    let exponents = cfg.integer("limits", "exponents", 6)? as u32;
    let growth = GrowthParams::new(
        cfg.real("growth", "a", 2.0)?,
        cfg.real("growth", "epsilon", 0.5)?,
        cfg.real("growth", "c", 2.0)?,
    )
    .map_err(|e| ConfigError {
        line: None,
        message: format!("[growth] {e}"),
    })?;
    let sample = cfg.integer("growth", "sample", 10_000)?;
    let omega_limit = cfg.integer("growth", "omega_limit", 4)? as u32;
    let m_limit = cfg.integer("growth", "m_limit", 10_000)?;
    let tables = tables(cfg, density_primes.max(sample).max(m_limit))?;

    let mut table = Table::new(&[
        "check",
        "condition",
        "passed",
        "worst_slack",
        "witness",
        "violations",
        "checked_range",
    ]);
    let density = check_density_class(
        &h,
        &tables,
        density_primes,
        exponents,
        &default_density_grid(density_primes),
    )?;
    class_rows(&mut table, "density", &density);
    let growth = check_growth_class(&f, growth, &tables, sample)?;
    class_rows(&mut table, "growth", &growth);
    if f.is_multiplicative() {
        let pos = check_lower_positivity(&f, omega_limit, &tables, m_limit)?;
        let passed = pos.infimum > 0.0;
        table.push(vec![
            "positivity".into(),
            format!("inf f(m) over Omega(m) <= {omega_limit}"),
            passed.to_string(),
            num(pos.infimum),
            format!("m={}", pos.attained_at),
            usize::from(!passed).to_string(),
            format!("m <= {m_limit}"),
        ]);
        table.summary.push(format!(
            "positivity: infimum {} at m = {}",
            pos.infimum, pos.attained_at
        ));
    }
    Ok(table)
}

fn equidist(cfg: &Config) -> Result<Table, CliError> {
    let fam = cfg.family()?;
    let grid = cfg.grid()?;
    let d_limit = cfg.integer("limits", "d_limit", 1000)?;
    let tables = tables(cfg, default_prime_limit(&fam, &grid)?)?;
    let mut table = Table::new(&["T", "d", "C_d", "h_d_M", "residual", "score"]);
    for &t in &grid {
        let support = fam.enumerate(t)?;
        let level = fam
            .model()
            .mass(t, &support)
            .powf(fam.model().theta())
            .floor() as u64;
        let diag = diagnostics_for(fam.model(), &support, d_limit.min(level), &tables)?;
        for r in &diag.rows {
            table.push(vec![
                num(t),
                r.d.to_string(),
                num(r.c_d),
                num(r.h_d_m),
                num(r.residual),
                num(r.score),
            ]);
        }
        table.summary.push(format!(
            "T = {t}: d <= {}, max score {} at d = {}",
            d_limit.min(level),
            diag.max_score,
            diag.argmax
        ));
    }
    Ok(table)
}

fn sieve_verify(cfg: &Config) -> Result<Table, CliError> {
    let kappa = cfg.real("sieve", "kappa", 1.0)?;
    let z = cfg.real("sieve", "z", 10.0)?;
    let y = cfg.real("sieve", "y", z * z)?;
    let beta = cfg.integer("sieve", "beta", default_beta(kappa) as u64)? as u32;
    let n_max = cfg.integer("sieve", "n_max", 100_000)?;
    let sides = match cfg.string("sieve", "side", "both").as_str() {
        "both" => vec![Side::Upper, Side::Lower],
        "upper" => vec![Side::Upper],
        "lower" => vec![Side::Lower],
        other => {
            return Err(ConfigError {
                line: None,
                message: format!("[sieve] side: unknown side `{other}`"),
            }
            .into())
        }
    };
    let tables = tables(cfg, n_max.max(z.ceil() as u64).max(1000))?;
    let mut table = Table::new(&["m", "lambda", "side"]);
    for side in sides {
        let w = build_weights_with_beta(kappa, y, z, side, beta, &tables)?;
        for (m, lambda) in w.iter() {
            table.push(vec![m.to_string(), num(lambda), side.to_string()]);
        }
        let check = verify_weights(&w, n_max, &tables)?;
        table.trailer.push(format!(
            "check side={side} n_max={n_max} lambda_one_ok={} bounded_violations={} support_violations={} \
             sandwich_violations={} coprime_violations={} passed={}",
            check.lambda_one_ok,
            check.bounded_violations,
            check.support_violations,
            check.sandwich_violations,
            check.coprime_violations,
            check.passed()
        ));
        table.summary.push(format!(
            "{side}: {} weights, {}",
            w.len(),
            if check.passed() {
                "all properties hold".to_string()
            } else {
                format!("FAIL at n = {:?}", check.first_witness)
            }
        ));
    }
    Ok(table)
}

pub fn envelope_params(cfg: &Config) -> Result<EnvelopeParams, ConfigError> {
    let d = EnvelopeParams::default();
    let series = match cfg.string("lemma", "series", "auto").as_str() {
        "auto" => SeriesMode::Auto,
        "enumerate" => SeriesMode::Enumerate,
        other => {
            return Err(ConfigError {
                line: None,
                message: format!("[lemma] series: unknown mode `{other}`"),
            })
        }
    };
    let p = EnvelopeParams {
        c0: cfg.real("lemma", "c0", d.c0)?,
        c1: cfg.real("lemma", "c1", d.c1)?,
        c2: cfg.real("lemma", "c2", d.c2)?,
        c3: cfg.real("lemma", "c3", 1e6)?,
        c: cfg.real("lemma", "c", d.c)?,
        c_prime: cfg.real("lemma", "c_prime", d.c_prime)?,
        epsilon: cfg.real("lemma", "epsilon", d.epsilon)?,
        beta0: cfg.real("lemma", "beta0", d.beta0)?,
        varpi: cfg.real("lemma", "varpi", d.varpi)?,
        upsilon: cfg.real("lemma", "upsilon", d.upsilon)?,
        psi: cfg.real("lemma", "psi", d.psi)?,
        nu1: cfg.real("lemma", "nu1", d.nu1)?,
        a_max: cfg.integer("lemma", "a_max", d.a_max)?,
        g_check_limit: cfg.integer("lemma", "g_check_limit", d.g_check_limit)?,
        series,
    };
    p.validate().map_err(|e| ConfigError {
        line: None,
        message: format!("[lemma] {e}"),
    })?;
    Ok(p)
}

fn lemma(cfg: &Config, id: &str) -> Result<Table, CliError> {
    if !LEMMA_IDS.contains(&id) {
        return Err(ConfigError {
            line: None,
            message: format!(
                "unknown lemma `{id}` (expected one of {})",
                LEMMA_IDS.join(", ")
            ),
        }
        .into());
    }
    let grid = cfg.grid()?;
    let params = envelope_params(cfg)?;
    let tables = tables(cfg, 10_000_000)?;
    let f = cfg.function("lemma", "f", "standard")?;
    let g = cfg.function("lemma", "g", "one")?;

    if id == "2.3" {
        let mut table = Table::new(&[
            "parameter",
            "condition",
            "passed",
            "worst_slack",
            "witness",
            "violations",
        ]);
        for &s in &grid {
            let r = lemma23_majorant(&g, &params, s as u64, &tables)?;
            for c in &r.conditions {
                table.push(vec![
                    num(s),
                    c.condition.clone(),
                    c.passed.to_string(),
                    num(c.worst_slack),
                    c.witness.clone().unwrap_or_default(),
                    c.violations.to_string(),
                ]);
            }
            table.summary.push(format!(
                "sample {s}: {}",
                if r.passed() { "pass" } else { "FAIL" }
            ));
        }
        return Ok(table);
    }

    let reports: Vec<LemmaReport> = match id {
        "2.1" => {
            let x = cfg.real("lemma", "x", 1e6)?;
            sweep(&grid, |z| lemma21_smooth_tail(&f, &params, x, z, &tables))?
        }
        "2.2" => {
            let a = cfg.real("lemma", "a", 2.0)?;
            let c = cfg.integer("lemma", "coprime_to", 1)?;
            let beta = cfg.optional_real("lemma", "beta")?;
            sweep(&grid, |t| {
                lemma22_euler_product(&f, &params, a, c, beta.unwrap_or(1.0 / t.ln()), t, &tables)
            })?
        }
        "2.4" => sweep(&grid, |u| {
            lemma24_tail(
                &f,
                &g,
                &EnvelopeParams {
                    upsilon: u,
                    ..params.clone()
                },
                &tables,
            )
        })?,
        "2.5" => {
            let eps = cfg.real("lemma", "v_epsilon", 0.5)?;
            sweep(&grid, |v| lemma25_h_ratio(&f, &g, &params, v, eps, &tables))?
        }
        "2.6" => sweep(&grid, |u| {
            lemma26_tail_vs_head(
                &f,
                &g,
                &EnvelopeParams {
                    upsilon: u,
                    ..params.clone()
                },
                &tables,
            )
        })?,
        "2.7" => {
            let h = cfg.density()?;
            let a = cfg.integer("lemma", "coprime_to", 1)?;
            let alpha2 = cfg.real("lemma", "alpha2", 0.5)?;
            let alpha3 = cfg.real("lemma", "alpha3", 0.5)?;
            sweep(&grid, |x| {
                lemma27_weighted_product_sum(&h, a, alpha2, alpha3, x, &tables)
            })?
        }
        "2.10" => sweep(&grid, |x| lemma210_exp_bound(&f, &g, &params, x, &tables))?,
        _ => unreachable!(),
    };
    let mut table = Table::new(&[
        "parameter",
        "lhs",
        "rhs_envelope",
        "implied_constant",
        "truncation_error",
    ]);
    for r in &reports {
        table.push(vec![
            num(r.size),
            num(r.lhs),
            num(r.rhs_envelope),
            num(r.implied_constant),
            num(r.truncation_error),
        ]);
        table.summary.push(format!(
            "size {}: implied constant {}",
            r.size, r.implied_constant
        ));
    }
    Ok(table)
}

fn bound(cfg: &Config, envelopes: bool) -> Result<Table, CliError> {
    let fam = cfg.family()?;
    let f = cfg.function("function", "name", "one")?;
    let grid = cfg.grid()?;
    let tables = tables(cfg, default_prime_limit(&fam, &grid)?)?;
    let reports = bound_scan(&fam, &f, &grid, &tables)?;
    let mut header = vec![
        "T",
        "M",
        "lhs",
        "rhs_upper",
        "ratio_upper",
        "rhs_lower",
        "ratio_lower",
        "case_i",
        "case_ii",
        "case_iii",
        "case_iv",
    ];
    if envelopes {
        header.extend([
            "beta1",
            "beta2",
            "beta3",
            "M_pow_1_minus_xi_over_3",
            "M_pow_1_minus_beta3",
        ]);
    }
    let mut table = Table::new(&header);
    for r in &reports {
        let mut row = vec![
            num(r.t),
            num(r.m),
            num(r.lhs),
            num(r.rhs_upper),
            num(r.ratio_upper),
            opt_num(r.rhs_lower),
            opt_num(r.ratio_lower),
        ];
        row.extend(r.cases.iter().map(|&c| num(c)));
        if envelopes {
            let e = &r.envelopes;
            row.extend([
                num(e.beta1),
                num(e.beta2),
                num(e.beta3),
                num(e.m_xi3),
                num(e.m_beta3),
            ]);
        }
        table.push(row);
        table.summary.push(format!(
            "T = {}: ratio_upper {}, ratio_lower {}",
            r.t,
            r.ratio_upper,
            r.ratio_lower.map_or("n/a".to_string(), |v| v.to_string())
        ));
    }
    Ok(table)
}

fn cases(cfg: &Config) -> Result<Table, CliError> {
    let fam = cfg.family()?;
    let f = cfg.function("function", "name", "one")?;
    let grid = cfg.grid()?;
    let tables = tables(cfg, default_prime_limit(&fam, &grid)?)?;
    let reports = bound_scan(&fam, &f, &grid, &tables)?;
    let mut table = Table::new(&["T", "M", "Z", "case", "count", "contribution", "share"]);
    for r in &reports {
        for case in Case::ALL {
            let i = case.index();
            let share = if r.lhs == 0.0 {
                0.0
            } else {
                r.cases[i] / r.lhs
            };
            table.push(vec![
                num(r.t),
                num(r.m),
                num(r.decomposition.z_big),
                case.to_string(),
                r.case_counts[i].to_string(),
                num(r.cases[i]),
                num(share),
            ]);
        }
        table.summary.push(format!(
            "T = {}: Z = {}, case shares {:?}",
            r.t,
            r.decomposition.z_big,
            r.cases.map(|c| if r.lhs == 0.0 { 0.0 } else { c / r.lhs })
        ));
    }
    Ok(table)
}
