//! Flat `key = value` configuration with `[section]` headers.
//!
//! Lines starting with `#` or `;` are comments, as is anything after
//! whitespace followed by `#` or `;`. Every value read through
//! [`Config`] is recorded together with the defaults that were filled in, so
//! a run can log the full parameter set it actually used.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::fmt;

use sievebound::families::{root_density, EquidistModel, Mass, Polynomial, WeightedFamily};
use sievebound::lemmas::standard_f;
use sievebound::multfn::{ArithmeticFunction, DensityFunction, DensityParams};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl ConfigError {
    fn at(line: usize, message: impl Into<String>) -> Self {
        ConfigError {
            line: Some(line),
            message: message.into(),
        }
    }

    fn new(message: impl Into<String>) -> Self {
        ConfigError {
            line: None,
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(n) => write!(f, "config error at line {n}: {}", self.message),
            None => write!(f, "config error: {}", self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

const KNOWN: &[(&str, &[&str])] = &[
    ("family", &["kind", "polynomial", "box", "q1", "q2"]),
    ("function", &["name"]),
    (
        "density",
        &["rule", "kappa", "lambda1", "lambda2", "b", "k"],
    ),
    (
        "model",
        &[
            "theta",
            "xi",
            "alpha",
            "b_tilde",
            "mass",
            "mass_coeff",
            "mass_exponent",
        ],
    ),
    ("grid", &["t"]),
    (
        "limits",
        &["primes", "d_limit", "density_primes", "exponents"],
    ),
    (
        "growth",
        &["a", "epsilon", "c", "sample", "omega_limit", "m_limit"],
    ),
    ("sieve", &["kappa", "y", "z", "side", "beta", "n_max"]),
    (
        "lemma",
        &[
            "f",
            "g",
            "c0",
            "c1",
            "c2",
            "c3",
            "c",
            "c_prime",
            "epsilon",
            "beta0",
            "varpi",
            "psi",
            "upsilon",
            "nu1",
            "a_max",
            "g_check_limit",
            "series",
            "x",
            "a",
            "coprime_to",
            "beta",
            "v_epsilon",
            "alpha2",
            "alpha3",
        ],
    ),
    ("output", &["path"]),
];

#[derive(Debug, Clone)]
struct Entry {
    value: String,
    line: usize,
}

#[derive(Debug, Default)]
pub struct Config {
    sections: BTreeMap<String, BTreeMap<String, Entry>>,
    used: RefCell<BTreeMap<String, String>>,
}

impl Config {
    pub fn parse(src: &str) -> Result<Self, ConfigError> {
        let mut sections: BTreeMap<String, BTreeMap<String, Entry>> = BTreeMap::new();
        let mut current: Option<String> = None;
        for (i, raw) in src.lines().enumerate() {
            let line = i + 1;
            let text = strip_comment(raw).trim();
            if text.is_empty() || text.starts_with('#') || text.starts_with(';') {
                continue;
            }
            if let Some(rest) = text.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| ConfigError::at(line, "unterminated section header"))?
                    .trim();
                if !KNOWN.iter().any(|(s, _)| *s == name) {
                    return Err(ConfigError::at(line, format!("unknown section [{name}]")));
                }
                sections.entry(name.to_string()).or_default();
                current = Some(name.to_string());
                continue;
            }
            let (key, value) = text.split_once('=').ok_or_else(|| {
                ConfigError::at(line, format!("expected `key = value`, found `{text}`"))
            })?;
            let (key, value) = (key.trim(), value.trim());
            let section = current.as_ref().ok_or_else(|| {
                ConfigError::at(line, format!("key `{key}` appears before any section"))
            })?;
            let keys = KNOWN.iter().find(|(s, _)| s == section).unwrap().1;
            if !keys.contains(&key) {
                return Err(ConfigError::at(
                    line,
                    format!("unknown key `{key}` in [{section}]"),
                ));
            }
            let table = sections.get_mut(section).unwrap();
            if table.contains_key(key) {
                return Err(ConfigError::at(
                    line,
                    format!("duplicate key `{key}` in [{section}]"),
                ));
            }
            table.insert(
                key.to_string(),
                Entry {
                    value: value.to_string(),
                    line,
                },
            );
        }
        Ok(Config {
            sections,
            used: RefCell::new(BTreeMap::new()),
        })
    }

    fn entry(&self, section: &str, key: &str) -> Option<&Entry> {
        self.sections.get(section).and_then(|s| s.get(key))
    }

    fn record(&self, section: &str, key: &str, value: String) {
        self.used
            .borrow_mut()
            .insert(format!("{section}.{key}"), value);
    }

    /// Every parameter read so far, as `section.key=value` in sorted order.
    pub fn used_parameters(&self) -> Vec<(String, String)> {
        self.used
            .borrow()
            .iter()
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect()
    }

    pub fn string(&self, section: &str, key: &str, default: &str) -> String {
        let v = self
            .entry(section, key)
            .map_or(default, |e| e.value.as_str())
            .to_string();
        self.record(section, key, v.clone());
        v
    }

    pub fn optional_string(&self, section: &str, key: &str) -> Option<String> {
        let v = self.entry(section, key).map(|e| e.value.clone());
        if let Some(v) = &v {
            self.record(section, key, v.clone());
        }
        v
    }

    pub fn real(&self, section: &str, key: &str, default: f64) -> Result<f64, ConfigError> {
        let v = match self.entry(section, key) {
            Some(e) => parse_real(&e.value)
                .map_err(|m| ConfigError::at(e.line, format!("[{section}] {key}: {m}")))?,
            None => default,
        };
        self.record(section, key, v.to_string());
        Ok(v)
    }

    pub fn optional_real(&self, section: &str, key: &str) -> Result<Option<f64>, ConfigError> {
        match self.entry(section, key) {
            Some(_) => self.real(section, key, 0.0).map(Some),
            None => Ok(None),
        }
    }

    pub fn integer(&self, section: &str, key: &str, default: u64) -> Result<u64, ConfigError> {
        let v = match self.entry(section, key) {
            Some(e) => parse_integer(&e.value)
                .map_err(|m| ConfigError::at(e.line, format!("[{section}] {key}: {m}")))?,
            None => default,
        };
        self.record(section, key, v.to_string());
        Ok(v)
    }

    pub fn reals(&self, section: &str, key: &str) -> Result<Option<Vec<f64>>, ConfigError> {
        let Some(e) = self.entry(section, key) else {
            return Ok(None);
        };
        let values = e
            .value
            .split(',')
            .map(|s| parse_real(s.trim()))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|m| ConfigError::at(e.line, format!("[{section}] {key}: {m}")))?;
        self.record(section, key, join(&values));
        Ok(Some(values))
    }

    /// Line number of a key, used to point domain failures back at the file.
    fn line_of(&self, section: &str, key: &str) -> Option<usize> {
        self.entry(section, key).map(|e| e.line)
    }

    fn fail(&self, section: &str, key: &str, message: impl fmt::Display) -> ConfigError {
        ConfigError {
            line: self.line_of(section, key),
            message: format!("[{section}] {key}: {message}"),
        }
    }

    /// The `[grid] t` list, required to be nonempty and strictly increasing.
    pub fn grid(&self) -> Result<Vec<f64>, ConfigError> {
        let grid = self
            .reals("grid", "t")?
            .ok_or_else(|| ConfigError::new("missing `t` in [grid]"))?;
        if grid.is_empty() {
            return Err(self.fail("grid", "t", "empty grid"));
        }
        if grid.iter().any(|t| !(*t > 0.0)) {
            return Err(self.fail("grid", "t", "grid points must be positive"));
        }
        if grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(self.fail("grid", "t", "grid must be strictly increasing"));
        }
        Ok(grid)
    }

    pub fn density_params(&self) -> Result<DensityParams, ConfigError> {
        let kappa = self.real("density", "kappa", 1.0)?;
        let lambda1 = self.real("density", "lambda1", 1.0)?;
        let lambda2 = self.real("density", "lambda2", 0.0)?;
        let b = self.real("density", "b", 1.0)?;
        let k = self.real("density", "k", 1.0)?;
        DensityParams::new(kappa, lambda1, lambda2, b, k)
            .map_err(|e| self.fail("density", "kappa", e))
    }

    fn polynomial(&self, key: &str) -> Result<Option<Polynomial>, ConfigError> {
        match self.optional_string("family", key) {
            Some(src) => Polynomial::parse(&src)
                .map(Some)
                .map_err(|e| self.fail("family", key, e)),
            None => Ok(None),
        }
    }

    pub fn density(&self) -> Result<DensityFunction, ConfigError> {
        let params = self.density_params()?;
        let rule = self.string("density", "rule", "reciprocal");
        match rule.as_str() {
            "reciprocal" => {
                DensityFunction::reciprocal(params).map_err(|e| self.fail("density", "rule", e))
            }
            "roots" => {
                let q = self.polynomial("polynomial")?.ok_or_else(|| {
                    self.fail("density", "rule", "`roots` needs [family] polynomial")
                })?;
                root_density(&q, params).map_err(|e| self.fail("density", "rule", e))
            }
            other => Err(self.fail(
                "density",
                "rule",
                format!("unknown rule `{other}` (expected reciprocal or roots)"),
            )),
        }
    }

    pub fn model(&self) -> Result<EquidistModel, ConfigError> {
        let h = self.density()?;
        let theta = self.real("model", "theta", 0.5)?;
        let xi = self.real("model", "xi", 0.9)?;
        let alpha = self.real("model", "alpha", 1.0)?;
        let b_tilde = self.real("model", "b_tilde", 1.0)?;
        let mass = match self.string("model", "mass", "total").as_str() {
            "total" => Mass::TotalWeight,
            "T" | "t" => Mass::T,
            "power" => Mass::Power {
                coeff: self.real("model", "mass_coeff", 1.0)?,
                exponent: self.real("model", "mass_exponent", 1.0)?,
            },
            other => {
                return Err(self.fail(
                    "model",
                    "mass",
                    format!("unknown mass `{other}` (expected total, T or power)"),
                ))
            }
        };
        EquidistModel::new(h, mass, theta, xi, alpha, b_tilde).map_err(|e| {
            let key = match e.to_string() {
                s if s.contains("theta") => "theta",
                s if s.contains("xi") => "xi",
                s if s.contains("alpha") => "alpha",
                s if s.contains("B_tilde") => "b_tilde",
                _ => "mass",
            };
            self.fail("model", key, e)
        })
    }

    pub fn family(&self) -> Result<WeightedFamily, ConfigError> {
        let model = self.model()?;
        match self.string("family", "kind", "identity").as_str() {
            "identity" => Ok(WeightedFamily::identity(model)),
            "polynomial" => {
                let q = self.polynomial("polynomial")?.ok_or_else(|| {
                    self.fail("family", "kind", "polynomial family needs `polynomial`")
                })?;
                let spec = self.string("family", "box", "0:1");
                let bounds = spec
                    .split(',')
                    .map(|side| {
                        let (lo, hi) = side.split_once(':').ok_or("box sides are written lo:hi")?;
                        Ok::<_, String>((parse_real(lo.trim())?, parse_real(hi.trim())?))
                    })
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|m| self.fail("family", "box", m))?;
                WeightedFamily::polynomial_box(q, bounds, model)
                    .map_err(|e| self.fail("family", "polynomial", e))
            }
            "variety" => {
                let q1 = self
                    .polynomial("q1")?
                    .ok_or_else(|| self.fail("family", "kind", "variety needs q1"))?;
                let q2 = self
                    .polynomial("q2")?
                    .ok_or_else(|| self.fail("family", "kind", "variety needs q2"))?;
                WeightedFamily::variety(q1, q2, model).map_err(|e| self.fail("family", "q1", e))
            }
            other => Err(self.fail(
                "family",
                "kind",
                format!("unknown family `{other}` (expected identity, polynomial or variety)"),
            )),
        }
    }

    /// Function named by `key` in `section`, in the syntax of [`parse_function`].
    pub fn function(
        &self,
        section: &str,
        key: &str,
        default: &str,
    ) -> Result<ArithmeticFunction, ConfigError> {
        let spec = self.string(section, key, default);
        parse_function(&spec).map_err(|m| self.fail(section, key, m))
    }
}

/// `one`, `tau`, `mu2`, `standard`, `omega_power(A)` or `table(v1, v2, ...)`.
pub fn parse_function(spec: &str) -> Result<ArithmeticFunction, String> {
    let spec = spec.trim();
    let call = |name: &str| {
        spec.strip_prefix(name)
            .and_then(|r| r.trim().strip_prefix('('))
            .and_then(|r| r.strip_suffix(')'))
    };
    match spec {
        "one" => return Ok(ArithmeticFunction::one()),
        "tau" => return Ok(ArithmeticFunction::divisor_count()),
        "mu2" => return Ok(ArithmeticFunction::mu_squared()),
        "standard" => return Ok(standard_f()),
        _ => {}
    }
    if let Some(arg) = call("omega_power") {
        return Ok(ArithmeticFunction::big_omega_power(parse_real(arg.trim())?));
    }
    if let Some(args) = call("table") {
        let values = args
            .split(',')
            .map(|s| parse_real(s.trim()))
            .collect::<Result<Vec<_>, _>>()?;
        return ArithmeticFunction::exponent_table(spec, values).map_err(|e| e.to_string());
    }
    Err(format!("unknown function `{spec}` (expected one, tau, mu2, standard, omega_power(A) or table(...))"))
}

/// Drops a trailing comment introduced by whitespace followed by `#` or `;`.
fn strip_comment(line: &str) -> &str {
    let bytes = line.as_bytes();
    for i in 1..bytes.len() {
        if (bytes[i] == b'#' || bytes[i] == b';') && bytes[i - 1].is_ascii_whitespace() {
            return &line[..i];
        }
    }
    line
}

fn parse_real(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if v.is_nan() {
        return Err("NaN is not allowed".into());
    }
    Ok(v)
}

fn parse_integer(s: &str) -> Result<u64, String> {
    if let Ok(v) = s.parse::<u64>() {
        return Ok(v);
    }
    let v = parse_real(s)?;
    if v >= 0.0 && v.fract() == 0.0 && v < u64::MAX as f64 {
        Ok(v as u64)
    } else {
        Err(format!("`{s}` is not a nonnegative integer"))
    }
}

fn join(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections_and_comments() {
        let cfg =
            Config::parse("# demo\n[grid]\nt = 1e4, 1e5   # two points\n\n[model]\ntheta = 0.25\n")
                .unwrap();
        assert_eq!(cfg.grid().unwrap(), vec![1e4, 1e5]);
        assert_eq!(cfg.real("model", "theta", 0.5).unwrap(), 0.25);
        assert_eq!(cfg.real("model", "xi", 0.9).unwrap(), 0.9);
        let used = cfg.used_parameters();
        assert!(used.contains(&("model.xi".into(), "0.9".into())));
    }

    #[test]
    fn reports_line_numbers() {
        let err = Config::parse("[grid]\nt = 1\n[model]\nbogus = 3\n").unwrap_err();
        assert_eq!(err.line, Some(4));
        let err = Config::parse("[grid]\nt 1\n").unwrap_err();
        assert_eq!(err.line, Some(2));
        let cfg = Config::parse("[grid]\nt = 10, 10\n").unwrap();
        assert_eq!(cfg.grid().unwrap_err().line, Some(2));
    }

    #[test]
    fn theta_out_of_range_names_the_constraint() {
        let cfg = Config::parse("[model]\ntheta = 1.5\n").unwrap();
        let err = cfg.model().unwrap_err();
        assert_eq!(err.line, Some(2));
        assert!(err.message.contains("(0, 1)"), "{}", err.message);
    }

    #[test]
    fn function_specs() {
        assert_eq!(parse_function("tau").unwrap().name(), "tau");
        assert!(parse_function("omega_power(2)")
            .unwrap()
            .is_multiplicative());
        let t = parse_function("table(2, 3)").unwrap();
        assert_eq!(t.prime_power(5, 4), Some(3.0));
        assert!(parse_function("sigma").is_err());
    }
}
