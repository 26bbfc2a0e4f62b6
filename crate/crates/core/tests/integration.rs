use sievebound::bounds::{bound_report, bound_scan, lhs_sum, upper_bound_rhs};
use sievebound::families::{root_density, EquidistModel, Mass, Polynomial, WeightedFamily};
use sievebound::lemmas::{lemma24_tail, standard_f, EnvelopeParams, SeriesMode};
use sievebound::multfn::{
    check_density_class, default_density_grid, ArithmeticFunction, DensityFunction, DensityParams,
};
use sievebound::sieve::{build_weights, main_term_accuracy, Side};
use sievebound::PrimeTables;

fn largest_prime(mut n: u64) -> u64 {
    let mut best = 1;
    let mut p = 2;
    while p * p <= n {
        while n % p == 0 {
            best = p;
            n /= p;
        }
        p += 1;
    }
    best.max(n)
}

#[test]
fn reciprocal_density_slack_stays_below_one() {
    let tables = PrimeTables::new(1_000_000).unwrap();
    let params = DensityParams::new(1.0, 1.0, 0.0, 1.0, 2.0).unwrap();
    let h = DensityFunction::reciprocal(params).unwrap();
    let grid = default_density_grid(1_000_000);
    let report = check_density_class(&h, &tables, 1_000_000, 8, &grid).unwrap();
    assert!(report.passed());
    assert!(report.condition("product").unwrap().worst_slack <= 1.0);
    for c in &report.conditions {
        assert!(c.worst_slack <= 1.0 + 1e-12, "{c:?}");
    }
}

#[test]
fn sieve_accuracy_improves_with_sigma() {
    let tables = PrimeTables::new(10_000).unwrap();
    let errors: Vec<f64> = [1.0, 2.0, 3.0, 4.0, 5.0]
        .iter()
        .map(|&s| {
            let w = build_weights(1.0, 100f64.powf(s), 100.0, Side::Upper, &tables).unwrap();
            main_term_accuracy(&w, |p| 1.0 / p as f64)
                .unwrap()
                .relative_error
        })
        .collect();
    assert!(errors.windows(2).all(|w| w[1] <= w[0]), "{errors:?}");
}

#[test]
fn smooth_tail_partitions_the_series() {
    let tables = PrimeTables::new(100_000).unwrap();
    let f = standard_f();
    let g = ArithmeticFunction::divisor_count();
    let params = EnvelopeParams {
        c3: 1e6,
        psi: 30.0,
        upsilon: 5_000.0,
        a_max: 2_000_000,
        series: SeriesMode::Enumerate,
        ..Default::default()
    };
    let report = lemma24_tail(&f, &g, &params, &tables).unwrap();
    let total = report.parameters.iter().find(|p| p.0 == "H_Psi").unwrap().1;
    // head by trial division, including the (1 − F(p))⁻¹ factors for p > c₀
    let mut head = 0.0;
    for n in 1..=5_000u64 {
        if largest_prime(n) >= 30 {
            continue;
        }
        let fact = tables.factorize(n).unwrap();
        let mut term = f.eval(&fact) * g.eval(&fact);
        for &(p, _) in fact.factors() {
            if p as f64 > params.c0 {
                term /= 1.0 - f.prime_power(p, 1).unwrap();
            }
        }
        head += term;
    }
    assert!((report.lhs + head - total).abs() <= 1e-9 * total);
}

#[test]
fn scan_matches_pointwise_reports() {
    let tables = PrimeTables::new(1_000_000).unwrap();
    let fam = WeightedFamily::identity(EquidistModel::identity_standard().with_mass(Mass::T));
    let f = ArithmeticFunction::divisor_count();
    let grid = [1e3, 3e3, 1e4, 3e4];
    let scan = bound_scan(&fam, &f, &grid, &tables).unwrap();
    for (r, &t) in scan.iter().zip(&grid) {
        assert_eq!(r, &bound_report(&fam, &f, t, &tables).unwrap());
        let breakdown = lhs_sum(&fam, &f, t, &tables).unwrap();
        assert_eq!(r.lhs, breakdown.lhs);
        assert_eq!(r.rhs_upper, upper_bound_rhs(&fam, &f, t, &tables).unwrap());
    }
}

#[test]
fn quadratic_family_ratios_stay_bounded() {
    let tables = PrimeTables::new(1_000_000).unwrap();
    let q = Polynomial::parse("x^2 + 1").unwrap();
    let params = DensityParams::new(1.0, 1.0, 0.0, 1.0, 1.0).unwrap();
    let model = EquidistModel::new(
        root_density(&q, params).unwrap(),
        Mass::TotalWeight,
        0.5,
        0.9,
        1.0,
        1.0,
    )
    .unwrap();
    let fam = WeightedFamily::polynomial_box(q, vec![(0.0, 1.0)], model).unwrap();
    for f in [
        ArithmeticFunction::one(),
        ArithmeticFunction::divisor_count(),
    ] {
        let reports = bound_scan(&fam, &f, &[1e3, 1e4, 1e5], &tables).unwrap();
        for r in &reports {
            assert!(
                r.ratio_upper > 0.5 && r.ratio_upper < 20.0,
                "{} {r:?}",
                f.name()
            );
            assert!(r.ratio_lower.unwrap() > 0.5);
        }
        let q = reports[2].ratio_upper / reports[0].ratio_upper;
        assert!(q > 0.5 && q < 2.0);
    }
}
