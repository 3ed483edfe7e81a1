use legendre_core::nevanlinna::{
    counting_function, fmt_residual, height_characteristic, log_spaced, order_function, proximity_function,
    rationality_test, Divisor, ExhaustionConfig, OrderMetric, ProximityMetric, Verdict,
};
use legendre_core::sections::{SectionSpec, TorsionName};
use legendre_core::C64;

fn exp_lambda() -> SectionSpec {
    SectionSpec::exp_of(vec![C64::new(0.0, 0.0), C64::new(1.0, 0.0)])
}

#[test]
fn order_functions_of_two_metrics_are_comparable() {
    let exh = ExhaustionConfig::punctured_disk(2.0);
    let rs = log_spaced(2.5, 4.5, 4);
    let fs = order_function(&exp_lambda(), OrderMetric::FubiniStudyOnX { scale: 1.0 }, &exh, &rs).unwrap();
    let b = order_function(&exp_lambda(), OrderMetric::BettiOmega, &exh, &rs).unwrap();
    assert!(fs.is_nondecreasing() && b.is_nondecreasing());
    for (a, c) in fs.values.iter().zip(&b.values) {
        let ratio = a / c;
        assert!((1.5..2.5).contains(&ratio), "ratio {ratio}");
    }
}

#[test]
fn refining_quadrature_stays_within_reported_error() {
    let exh = ExhaustionConfig::punctured_disk(2.0);
    let mut fine = exh.clone();
    fine.quad.order = 8;
    fine.max_ds = 0.5 * exh.max_ds;
    let rs = log_spaced(2.5, 50.0, 5);
    let a = order_function(&exp_lambda(), OrderMetric::BettiOmega, &exh, &rs).unwrap();
    let b = order_function(&exp_lambda(), OrderMetric::BettiOmega, &fine, &rs).unwrap();
    for k in 0..rs.len() {
        assert!(
            (a.values[k] - b.values[k]).abs() <= a.quad_error[k].max(1e-14 * a.values[k]),
            "r = {}: {} vs {} (error {})",
            rs[k],
            a.values[k],
            b.values[k],
            a.quad_error[k]
        );
    }
}

#[test]
fn exp_meets_the_zero_section_ever_more_often() {
    let exh = ExhaustionConfig::punctured_disk(2.0);
    let rs = log_spaced(3.0, 40.0, 8);
    let n = counting_function(&exp_lambda(), &Divisor::ZeroSectionQ, &exh, &rs, None).unwrap();
    let n1 = counting_function(&exp_lambda(), &Divisor::ZeroSectionQ, &exh, &rs, Some(1)).unwrap();
    assert!(n.values.windows(2).all(|w| w[1] > w[0]));
    assert!(n1.values.iter().zip(&n.values).all(|(a, b)| a <= b));
    // growth of n(r)/log r
    let rate: Vec<f64> = n.values.iter().zip(&rs).map(|(v, r)| v / r.ln()).collect();
    assert!(rate.windows(2).all(|w| w[1] > w[0]));
}

#[test]
fn two_torsion_section_stays_away_from_q() {
    let exh = ExhaustionConfig::punctured_disk(2.0);
    let rs = log_spaced(3.0, 300.0, 6);
    let p3 = SectionSpec::torsion(TorsionName::P3);
    let n = counting_function(&p3, &Divisor::ZeroSectionQ, &exh, &rs, None).unwrap();
    assert!(n.values.iter().all(|v| *v == 0.0));
    let m = proximity_function(&p3, &Divisor::ZeroSectionQ, ProximityMetric::Neron, &exh, &rs).unwrap();
    let spread = m.values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    assert!(spread < 2.0 * 300f64.ln(), "{:?}", m.values);
    let fmt = fmt_residual(&p3, &Divisor::ZeroSectionQ, ProximityMetric::FubiniStudy, &exh, &rs[..3]).unwrap();
    assert!(fmt.max_deviation < 1e-8);
    assert!(fmt.ratio_bound < 5.0);
}

#[test]
fn proximity_of_a_constant_point_is_its_chordal_distance() {
    let exh = ExhaustionConfig::punctured_disk(2.0);
    let rs = [3.0, 6.0];
    let p1 = SectionSpec::torsion(TorsionName::P1);
    let m = proximity_function(&p1, &Divisor::XEquals { c: C64::new(5.0, 5.0) }, ProximityMetric::FubiniStudy, &exh, &rs)
        .unwrap();
    // x(P₁) = 0 everywhere: the chordal distance to x = c is constant
    let expected = 0.5 * (51.0f64 / 50.0).ln();
    for v in &m.values {
        assert!((v - expected).abs() < 1e-12, "{v} vs {expected}");
    }
}

#[test]
fn height_characteristic_separates_rational_from_transcendental() {
    let exh = ExhaustionConfig::affine_curve(2.0);
    let rs = log_spaced(10.0, 1000.0, 7);
    let exp = height_characteristic(&exp_lambda(), &exh, &rs).unwrap();
    assert!(exp.is_nondecreasing());
    assert_eq!(rationality_test(&exp).verdict, Verdict::TranscendentalLike);
    let p2 = height_characteristic(&SectionSpec::torsion(TorsionName::P2), &exh, &rs).unwrap();
    assert_eq!(rationality_test(&p2).verdict, Verdict::RationalLike);
    assert!(p2.values.iter().all(|v| *v == 0.0));
}

#[test]
fn series_serialize_to_csv() {
    let exh = ExhaustionConfig::punctured_disk(2.0);
    let s = order_function(&exp_lambda(), OrderMetric::BettiOmega, &exh, &[3.0, 4.0]).unwrap();
    let csv = s.to_csv();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "r,value,quad_error");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("3.000000000000e0,"));
}

#[test]
fn radii_must_exceed_the_inner_radius() {
    let exh = ExhaustionConfig::punctured_disk(2.0);
    assert!(order_function(&exp_lambda(), OrderMetric::BettiOmega, &exh, &[1.5, 3.0]).is_err());
    assert!(order_function(&exp_lambda(), OrderMetric::BettiOmega, &exh, &[4.0, 3.0]).is_err());
    let q = SectionSpec::torsion(TorsionName::Q);
    assert!(counting_function(&q, &Divisor::ZeroSectionQ, &exh, &[3.0], None).is_err());
}
