use std::f64::consts::PI;

use legendre_core::periods::{
    agm_lattice, lattice_volume, period_basis, same_lattice, Lambda, PUNCTURE_EXCLUSION,
};
use legendre_core::C64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `∫₀^{π/2} 2 dφ / √(a + b sin²φ)` by the trapezoid rule; the integrand is smooth and even
/// about both ends, so the rule converges geometrically.
fn smooth_period(a: f64, b: f64) -> f64 {
    let n = 400;
    let h = 0.5 * PI / n as f64;
    (0..=n)
        .map(|k| {
            let phi = k as f64 * h;
            let w = if k == 0 || k == n { 0.5 } else { 1.0 };
            w * 2.0 / (a + b * phi.sin().powi(2)).sqrt()
        })
        .sum::<f64>()
        * h
}

#[test]
fn real_cycle_integrals_at_one_tenth() {
    // ∫₁^∞ dx/y with x = 1/sin²φ, and ∫_λ^1 dx/|y| with x = λ + (1-λ)sin²φ
    let l = 0.1;
    let rho1 = smooth_period(1.0, -l);
    let rho2 = smooth_period(l, 1.0 - l);
    let b = period_basis(Lambda::real(l).unwrap(), None).unwrap();
    assert!((b.rho1 - C64::new(rho1, 0.0)).norm() < 1e-10, "{} vs {rho1}", b.rho1);
    assert!((b.rho2 - C64::new(0.0, rho2)).norm() < 1e-10, "{} vs {rho2}", b.rho2);
}

#[test]
fn out_and_back_returns_the_base_lattice() {
    let far = C64::new(0.5, 10.0);
    let path = vec![C64::new(0.5, 0.0), far, C64::new(0.5, 1e-3)];
    let back = period_basis(Lambda::new(C64::new(0.5, 1e-3)).unwrap(), Some(&path)).unwrap();
    let direct = period_basis(Lambda::new(C64::new(0.5, 1e-3)).unwrap(), None).unwrap();
    assert!((back.rho1 - direct.rho1).norm() < 1e-10);
    assert!((back.rho2 - direct.rho2).norm() < 1e-10);
}

fn loop_around(center: f64) -> Vec<C64> {
    let r = 0.25;
    let start = C64::new(0.5, 0.0);
    let mut p = vec![start];
    let toward = if center < 0.5 { -1.0 } else { 1.0 };
    let a = C64::new(center - toward * r, 0.0);
    p.push(a);
    for k in 1..=16 {
        let th = 2.0 * PI * k as f64 / 16.0;
        p.push(C64::new(center, 0.0) + (a - C64::new(center, 0.0)) * C64::from_polar(1.0, th));
    }
    p.push(start);
    p
}

#[test]
fn monodromy_lies_in_the_level_two_group() {
    let base = period_basis(Lambda::real(0.5).unwrap(), None).unwrap();
    for c in [0.0, 1.0] {
        let b = period_basis(Lambda::real(0.5).unwrap(), Some(&loop_around(c))).unwrap();
        let m = same_lattice((base.rho1, base.rho2), (b.rho1, b.rho2), 1e-9).expect("same lattice");
        assert_ne!(m, [[1, 0], [0, 1]], "loop around {c} acts trivially");
        assert_eq!(m[0][0].rem_euclid(2), 1);
        assert_eq!(m[0][1].rem_euclid(2), 0);
        assert_eq!(m[1][0].rem_euclid(2), 0);
        assert_eq!(m[1][1].rem_euclid(2), 1);
        assert_eq!(m[0][0] * m[1][1] - m[0][1] * m[1][0], 1);
    }
}

#[test]
fn homotopic_paths_agree() {
    let target = C64::new(3.0, 2.0);
    let lam = Lambda::new(target).unwrap();
    let a = vec![C64::new(0.5, 0.0), C64::new(0.5, 1.5), target];
    let b = vec![C64::new(0.5, 0.0), C64::new(2.0, 0.6), C64::new(4.0, 3.0), target];
    let pa = period_basis(lam, Some(&a)).unwrap();
    let pb = period_basis(lam, Some(&b)).unwrap();
    assert!((pa.rho1 - pb.rho1).norm() < 1e-10);
    assert!((pa.rho2 - pb.rho2).norm() < 1e-10);
}

#[test]
fn lattice_volume_symmetries() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..40 {
        let l = C64::new(rng.gen_range(-3.0..4.0), rng.gen_range(0.05..3.0));
        let v = |z: C64| lattice_volume(&period_basis(Lambda::new(z).unwrap(), None).unwrap()).volume;
        let (a, b, c) = (v(l), v(C64::new(1.0, 0.0) - l), v(l.conj()));
        assert!((a - b).abs() < 1e-9 * a, "V(λ) = {a}, V(1-λ) = {b} at {l}");
        assert!((a - c).abs() < 1e-9 * a, "V(λ) = {a}, V(conj λ) = {c} at {l}");
    }
}

#[test]
fn volume_is_positive_at_random_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut n = 0;
    while n < 1000 {
        let r = 10f64.powf(rng.gen_range(-2.0..1.0));
        let l = C64::from_polar(r, rng.gen_range(-PI..PI));
        if l.norm() < 1e-2 || (l - 1.0).norm() < 1e-2 {
            continue;
        }
        let b = period_basis(Lambda::new(l).unwrap(), None).unwrap();
        assert!(b.tau.im > 0.0 && lattice_volume(&b).volume > 0.0, "at {l}");
        n += 1;
    }
}

#[test]
fn agm_lattice_is_the_continued_lattice() {
    for l in [
        C64::new(0.1, 0.0),
        C64::new(0.3, 0.4),
        C64::new(-2.0, 0.5),
        C64::new(0.9, -0.2),
        C64::new(5.0, 3.0),
    ] {
        let lam = Lambda::new(l).unwrap();
        let b = period_basis(lam, None).unwrap();
        let a = agm_lattice(lam).unwrap();
        assert!(same_lattice((b.rho1, b.rho2), a, 1e-10).is_some(), "at {l}");
    }
}

#[test]
fn near_punctures_are_rejected() {
    for p in [0.0, 1.0] {
        let l = C64::new(p + 0.5 * PUNCTURE_EXCLUSION, 0.0);
        assert!(Lambda::new(l).is_err());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]
    #[test]
    fn continuation_respects_conjugation(re in -4.0f64..5.0, im in 0.05f64..4.0) {
        let l = C64::new(re, im);
        let up = period_basis(Lambda::new(l).unwrap(), None).unwrap();
        let down = period_basis(Lambda::new(l.conj()).unwrap(), None).unwrap();
        let conj = (down.rho1.conj(), -down.rho2.conj());
        prop_assert!(same_lattice((up.rho1, up.rho2), conj, 1e-9).is_some());
    }
}
