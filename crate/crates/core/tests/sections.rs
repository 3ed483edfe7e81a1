use legendre_core::betti::density_holomorphic;
use legendre_core::curve::{neg, on_curve, CurvePoint};
use legendre_core::periods::{period_basis, Lambda};
use legendre_core::sections::{local_section_expand, SectionSpec, TorsionName};
use legendre_core::C64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_lambda(rng: &mut ChaCha8Rng) -> C64 {
    loop {
        let l = C64::new(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
        if l.norm() > 0.05 && (l - 1.0).norm() > 0.05 && l.im.abs() > 1e-3 {
            return l;
        }
    }
}

#[test]
fn exponential_sections_land_on_the_curve() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let specs = [
        SectionSpec::exp_of(vec![C64::new(0.0, 0.0), C64::new(1.0, 0.0)]),
        SectionSpec::exp_of(vec![C64::new(0.3, -0.1), C64::new(0.0, 0.0), C64::new(1.0, 0.0)]),
    ];
    for _ in 0..100 {
        let lam = Lambda::new(random_lambda(&mut rng)).unwrap();
        let basis = period_basis(lam, None).unwrap();
        for spec in &specs {
            let p = spec.evaluate(lam, &basis).unwrap();
            assert!(on_curve(lam, &p).0, "{spec:?} at {}", lam.value());
        }
    }
}

#[test]
fn multiple_by_minus_one_is_negation() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let exp = SectionSpec::exp_of(vec![C64::new(0.0, 0.0), C64::new(1.0, 0.0)]);
    let minus = SectionSpec::Multiple {
        n: -1,
        of: Box::new(exp.clone()),
    };
    for _ in 0..50 {
        let lam = Lambda::new(random_lambda(&mut rng)).unwrap();
        let basis = period_basis(lam, None).unwrap();
        let p = exp.evaluate(lam, &basis).unwrap();
        let q = minus.evaluate(lam, &basis).unwrap();
        assert!(q.chart_distance(&neg(&p)) < 1e-9 * (1.0 + p.x().map_or(0.0, |x| x.norm())));
    }
}

#[test]
fn laurent_data_solves_the_curve_equation() {
    let phi = vec![C64::new(2.0, 0.5), C64::new(-1.0, 0.0), C64::new(0.25, 0.1)];
    let data = local_section_expand(&phi, 24).unwrap();
    let spec = SectionSpec::LocalPuncture { phi: phi.clone(), delta: 0.1 };
    for k in 0..12 {
        let l = C64::from_polar(0.02, 0.5 + k as f64);
        let (x, y) = data.eval(l);
        let lhs = y * y;
        let rhs = x * (x - 1.0) * (x - l);
        assert!((lhs - rhs).norm() < 1e-10 * rhs.norm(), "at {l}");
        let lam = Lambda::new(l).unwrap();
        let basis = period_basis(lam, None).unwrap();
        match spec.evaluate(lam, &basis).unwrap() {
            CurvePoint::Affine { x: ex, y: ey } => {
                assert!((ex - x).norm() < 1e-10 * x.norm());
                assert!((ey - y).norm() < 1e-8 * y.norm());
            }
            CurvePoint::Infinity => panic!("local section at infinity"),
        }
    }
}

#[test]
fn torsion_sections_are_constant_points() {
    let lam = Lambda::new(C64::new(2.5, 1.5)).unwrap();
    let basis = period_basis(lam, None).unwrap();
    let p3 = SectionSpec::torsion(TorsionName::P3).evaluate(lam, &basis).unwrap();
    assert_eq!(p3, CurvePoint::affine(lam.value(), C64::new(0.0, 0.0)));
    let q = SectionSpec::torsion(TorsionName::Q).evaluate(lam, &basis).unwrap();
    assert!(q.is_infinity());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]
    #[test]
    fn multiplication_scales_the_pulled_back_form(re in -3.0f64..4.0, im in 0.2f64..3.0, n in 2i64..4) {
        let lam = Lambda::new(C64::new(re, im)).unwrap();
        for base in [SectionSpec::masser(), SectionSpec::exp_of(vec![C64::new(0.1, 0.0), C64::new(1.0, 0.0)])] {
            let d1 = density_holomorphic(&base, lam).unwrap();
            let dn = density_holomorphic(&SectionSpec::Multiple { n, of: Box::new(base.clone()) }, lam).unwrap();
            let expected = (n * n) as f64 * d1;
            prop_assert!((dn - expected).abs() <= 1e-6 * expected.max(1e-12), "{:?}: {} vs {}", base, dn, expected);
        }
    }
}
