use legendre_core::curve::{add, mul_n, neg, on_curve, CurvePoint, FiberLattice};
use legendre_core::periods::{lattice_coordinates, period_basis, Lambda};
use legendre_core::C64;
use proptest::prelude::*;

fn lattice(re: f64, im: f64) -> (Lambda, FiberLattice) {
    let lam = Lambda::new(C64::new(re, im)).unwrap();
    let b = period_basis(lam, None).unwrap();
    (lam, FiberLattice::from_basis(&b).unwrap())
}

fn point(lat: &FiberLattice, s: f64, t: f64) -> (C64, CurvePoint) {
    let (w1, w2, _) = lat.reduced();
    let z = w1 * s + w2 * t;
    (z, lat.exp(z))
}

/// Relative distance of two affine points, scaled by their size.
fn close(a: &CurvePoint, b: &CurvePoint, tol: f64) -> bool {
    match (a, b) {
        (CurvePoint::Infinity, CurvePoint::Infinity) => true,
        (CurvePoint::Affine { x, y }, CurvePoint::Affine { x: u, y: v }) => {
            let scale = 1.0 + x.norm() + y.norm();
            (x - u).norm() + (y - v).norm() <= tol * scale * scale
        }
        _ => false,
    }
}

fn lambda_strategy() -> impl Strategy<Value = (f64, f64)> {
    (-3.0f64..4.0, 0.1f64..3.0).prop_map(|(re, im)| (re, if re > 0.3 && re < 0.7 { im + 0.2 } else { im }))
}

fn betti_strategy() -> impl Strategy<Value = (f64, f64)> {
    (0.05f64..0.95, 0.05f64..0.95)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn group_law_axioms(l in lambda_strategy(), a in betti_strategy(), b in betti_strategy(), c in betti_strategy()) {
        let (lam, lat) = lattice(l.0, l.1);
        let (_, p) = point(&lat, a.0, a.1);
        let (_, q) = point(&lat, b.0, b.1);
        let (_, r) = point(&lat, c.0, c.1);
        prop_assert!(on_curve(lam, &p).0);
        prop_assert!(close(&add(lam, &p, &q), &add(lam, &q, &p), 1e-12));
        prop_assert!(add(lam, &p, &neg(&p)).is_infinity());
        prop_assert_eq!(add(lam, &p, &CurvePoint::Infinity), p);
        let left = add(lam, &add(lam, &p, &q), &r);
        let right = add(lam, &p, &add(lam, &q, &r));
        prop_assert!(close(&left, &right, 1e-7), "{:?} vs {:?}", left, right);
    }

    #[test]
    fn exp_is_a_homomorphism(l in lambda_strategy(), a in betti_strategy(), b in betti_strategy()) {
        let (lam, lat) = lattice(l.0, l.1);
        let (z1, p) = point(&lat, a.0, a.1);
        let (z2, q) = point(&lat, b.0, b.1);
        let sum = lat.exp(z1 + z2);
        prop_assume!(!sum.is_infinity());
        prop_assert!(close(&add(lam, &p, &q), &sum, 1e-8));
        prop_assert!(close(&mul_n(lam, 3, &p), &lat.exp(z1 * 3.0), 1e-7));
    }

    #[test]
    fn log_inverts_exp(l in lambda_strategy(), a in betti_strategy()) {
        let (_, lat) = lattice(l.0, l.1);
        let (z, p) = point(&lat, a.0, a.1);
        let back = lat.log(&p).unwrap();
        let (w1, w2, _) = lat.reduced();
        let (s, t) = lattice_coordinates(w1, w2, back - z);
        prop_assert!((s - s.round()).abs() < 1e-9 && (t - t.round()).abs() < 1e-9);
    }
}

/// `G₂ = Σₙ Σₘ' (m ω₁ + n ω₂)⁻²` summed over `m` first, with an integral tail for `|m| > M`.
fn eisenstein_g2(w1: C64, w2: C64) -> C64 {
    let tau = w2 / w1;
    let m_max = 4000i64;
    let mut total = C64::new(0.0, 0.0);
    for n in -12i64..=12 {
        let c = tau * n as f64;
        let mut row = C64::new(0.0, 0.0);
        for m in -m_max..=m_max {
            if n == 0 && m == 0 {
                continue;
            }
            row += (c + m as f64).powi(-2);
        }
        let edge = m_max as f64 + 0.5;
        row += (c + edge).inv() - (c - edge).inv();
        total += row;
    }
    total / (w1 * w1)
}

#[test]
fn quasi_period_matches_lattice_sum() {
    for (re, im) in [(0.5, 0.0), (0.2, 0.3), (-1.5, 1.0), (3.0, 2.0)] {
        let (_, lat) = lattice(re, im);
        let (w1, w2, _) = lat.reduced();
        let oracle = w1 * eisenstein_g2(w1, w2);
        let lat_b = FiberLattice::new(C64::new(re, im), w1, w2).unwrap();
        let eta = lat_b.quasi_periods().eta1;
        assert!((eta - oracle).norm() < 1e-8 * oracle.norm().max(1.0), "{eta} vs {oracle} at {re}+{im}i");
        let legendre = lat_b.quasi_periods().legendre_relation(w1, w2);
        assert!((legendre - C64::new(0.0, 2.0 * std::f64::consts::PI)).norm() < 1e-10);
    }
}
