use std::path::PathBuf;
use std::process::{Command, Output};

use sievebound::bounds::bound_report;
use sievebound::families::{EquidistModel, Mass, WeightedFamily};
use sievebound::multfn::ArithmeticFunction;
use sievebound::PrimeTables;

struct Scratch(PathBuf);

impl Scratch {
    fn new(tag: &str) -> Self {
        let dir = std::env::temp_dir().join(format!("sievebound-cli-{tag}-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        Scratch(dir)
    }

    fn config(&self, body: &str) -> PathBuf {
        let path = self.0.join("run.ini");
        std::fs::write(&path, body).unwrap();
        path
    }
}

impl Drop for Scratch {
    fn drop(&mut self) {
        std::fs::remove_dir_all(&self.0).ok();
    }
}

fn run(args: &[&str], config: &PathBuf) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sievebound"))
        .args(args)
        .arg("--config")
        .arg(config)
        .output()
        .unwrap()
}

fn csv_rows(stdout: &[u8]) -> (String, Vec<csv::StringRecord>) {
    let text = String::from_utf8(stdout.to_vec()).unwrap();
    let (meta, body) = text.split_once('\n').unwrap();
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(body.as_bytes());
    (
        meta.to_string(),
        reader.records().map(|r| r.unwrap()).collect(),
    )
}

#[test]
fn theta_outside_unit_interval_is_a_config_error() {
    let s = Scratch::new("theta");
    let out = run(
        &["bound"],
        &s.config("[model]\ntheta = 1\n[grid]\nt = 100\n"),
    );
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 2") && err.contains("(0, 1)"), "{err}");
}

#[test]
fn unknown_keys_report_their_line() {
    let s = Scratch::new("key");
    let out = run(
        &["bound"],
        &s.config("[grid]\nt = 100\n\n[model]\nthetta = 0.5\n"),
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 5"));
}

#[test]
fn domain_errors_exit_with_one() {
    let s = Scratch::new("domain");
    let out = run(
        &["lemma", "2.4"],
        &s.config("[lemma]\npsi = 100\nvarpi = 5\n[grid]\nt = 1000\n[limits]\nprimes = 1000\n"),
    );
    assert_eq!(
        out.status.code(),
        Some(1),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn trivial_sieve_has_only_the_unit_weight() {
    let s = Scratch::new("sieve");
    let out = run(
        &["sieve-verify"],
        &s.config("[sieve]\nz = 2\nn_max = 1000\n"),
    );
    assert!(out.status.success());
    let (meta, rows) = csv_rows(&out.stdout);
    assert!(meta.starts_with("# sievebound") && meta.contains("sieve.z=2"));
    assert_eq!(rows.len(), 2);
    for r in &rows {
        assert_eq!((&r[0], &r[1]), ("1", "1"));
    }
}

#[test]
fn bound_rows_reproduce_library_values() {
    let s = Scratch::new("bound");
    let out = run(
        &["bound"],
        &s.config("[model]\nmass = T\n[function]\nname = tau\n[grid]\nt = 1e3, 1e4, 1e5\n"),
    );
    assert!(out.status.success());
    let (meta, rows) = csv_rows(&out.stdout);
    assert!(meta.contains("model.mass=T") && meta.contains("function.name=tau"));
    assert_eq!(rows.len(), 3);
    let tables = PrimeTables::new(100_000).unwrap();
    let fam = WeightedFamily::identity(EquidistModel::identity_standard().with_mass(Mass::T));
    let tau = ArithmeticFunction::divisor_count();
    for r in &rows {
        let t: f64 = r[0].parse().unwrap();
        let rep = bound_report(&fam, &tau, t, &tables).unwrap();
        assert_eq!(&r[2], rep.lhs.to_string());
        assert_eq!(&r[3], rep.rhs_upper.to_string());
        assert_eq!(&r[4], rep.ratio_upper.to_string());
        assert_eq!(&r[6], rep.ratio_lower.unwrap().to_string());
        assert_eq!(&r[7], rep.cases[0].to_string());
    }
}

#[test]
fn other_subcommands_emit_their_schemas() {
    let s = Scratch::new("schemas");
    let cfg = s.config(
        "[model]\nmass = T\n[grid]\nt = 1e3, 1e4\n[limits]\nd_limit = 30\nprimes = 100000\ndensity_primes = 1000\n\
         [growth]\nsample = 500\nm_limit = 500\n[lemma]\npsi = 50\n",
    );
    let header = |args: &[&str]| {
        let out = run(args, &cfg);
        assert!(
            out.status.success(),
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        let text = String::from_utf8(out.stdout).unwrap();
        text.lines().nth(1).unwrap().to_string()
    };
    assert_eq!(header(&["equidist"]), "T,d,C_d,h_d_M,residual,score");
    assert_eq!(header(&["cases"]), "T,M,Z,case,count,contribution,share");
    assert_eq!(
        header(&["lemma", "2.4"]),
        "parameter,lhs,rhs_envelope,implied_constant,truncation_error"
    );
    assert_eq!(
        header(&["lemma", "2.10"]),
        "parameter,lhs,rhs_envelope,implied_constant,truncation_error"
    );
    assert_eq!(
        header(&["lemma", "2.3"]),
        "parameter,condition,passed,worst_slack,witness,violations"
    );
    assert_eq!(
        header(&["class-check"]),
        "check,condition,passed,worst_slack,witness,violations,checked_range"
    );
}

#[test]
fn output_flag_writes_identical_bytes() {
    let s = Scratch::new("output");
    let cfg = s.config("[grid]\nt = 1e3, 1e4\n");
    let path = s.0.join("out.csv");
    let out = Command::new(env!("CARGO_BIN_EXE_sievebound"))
        .args(["bound", "--threads", "2", "--output"])
        .arg(&path)
        .arg("--config")
        .arg(&cfg)
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(std::fs::read(&path).unwrap(), run(&["bound"], &cfg).stdout);
}
