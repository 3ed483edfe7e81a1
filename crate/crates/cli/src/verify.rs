//! The invariant suite behind `verify-all`. Each check draws from its own seeded stream, so the
//! report depends only on the seed.

use std::f64::consts::PI;
use std::sync::OnceLock;

use legendre_core::betti::{density_holomorphic_at, lie_derivative, pullback_density, stencil_limit, LocalFrame};
use legendre_core::curve::{add, neg, on_curve, two_torsion_points, CurvePoint, FiberLattice};
use legendre_core::heights::{
    neron_tate_height, scheme_height, torsion_count_height, CountConfig, Family, HeightConfig, HeightReport,
};
use legendre_core::nevanlinna::{
    counting_function, fmt_residual, height_characteristic, log_spaced, order_function, Divisor,
    ExhaustionConfig, OrderMetric, ProximityMetric,
};
use legendre_core::periods::{lattice_coordinates, lattice_volume, period_basis, same_lattice, Lambda, PeriodBasis};
use legendre_core::sections::{SectionSpec, Side, TorsionName};
use legendre_core::{Result, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub module: &'static str,
    pub invariant: &'static str,
    pub passed: bool,
    pub detail: String,
}

type Probe = fn(&mut ChaCha8Rng) -> Result<(bool, String)>;

const CHECKS: [(&str, &str, Probe); 23] = [
    ("periods", "monodromy", monodromy),
    ("periods", "lattice well-definedness", lattice_well_defined),
    ("periods", "symmetry", volume_symmetry),
    ("periods", "positivity", positivity),
    ("curve", "group axioms", group_axioms),
    ("curve", "exp/log round trip", round_trip),
    ("curve", "homomorphism", homomorphism),
    ("curve", "two-torsion half periods", two_torsion),
    ("sections", "on curve", sections_on_curve),
    ("sections", "masser squared consistency", masser_consistency),
    ("sections", "exp negation", exp_negation),
    ("betti", "finite differences vs holomorphic stencil", density_routes),
    ("betti", "translation invariance", translation_invariance),
    ("betti", "path independence", path_independence),
    ("heights", "torsion vanishing", torsion_vanishing),
    ("heights", "quadratic under multiplication", quadratic_height),
    ("heights", "cross-estimator agreement", cross_estimator),
    ("heights", "constant-tau scheme height", constant_tau),
    ("nevanlinna", "monotonicity", monotonicity),
    ("nevanlinna", "truncation", truncation),
    ("nevanlinna", "metric comparison", metric_comparison),
    ("nevanlinna", "FMT closure", fmt_closure),
    ("nevanlinna", "quadrature convergence", quadrature_convergence),
];

pub fn run_all(seed: u64) -> Vec<Check> {
    CHECKS
        .iter()
        .enumerate()
        .map(|(k, (module, invariant, probe))| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            let (passed, detail) = match probe(&mut rng) {
                Ok(r) => r,
                Err(e) => (false, format!("error: {e}")),
            };
            Check {
                module,
                invariant,
                passed,
                detail,
            }
        })
        .collect()
}

/// Relative spread of the two half-range slopes.
pub fn slope_spread((a, b): (f64, f64)) -> f64 {
    let m = a.abs().max(b.abs());
    if m <= 1e-9 {
        0.0
    } else {
        (a - b).abs() / m
    }
}

fn exp_lambda() -> SectionSpec {
    SectionSpec::exp_of(vec![C64::new(0.0, 0.0), C64::new(1.0, 0.0)])
}

fn puncture_distance(l: C64) -> f64 {
    l.norm().min((l - 1.0).norm())
}

/// λ with `lo ≤ |λ| ≤ hi`, at least `gap` from both punctures.
fn sample_lambda(rng: &mut ChaCha8Rng, lo: f64, hi: f64, gap: f64) -> C64 {
    loop {
        let r = (rng.gen_range(lo.ln()..hi.ln())).exp();
        let l = C64::from_polar(r, rng.gen_range(-PI..PI));
        if puncture_distance(l) >= gap {
            return l;
        }
    }
}

fn basis_at(l: C64) -> Result<(Lambda, PeriodBasis)> {
    let lam = Lambda::new(l)?;
    Ok((lam, period_basis(lam, None)?))
}

fn lattice_at(l: C64) -> Result<(Lambda, FiberLattice)> {
    let (lam, b) = basis_at(l)?;
    Ok((lam, FiberLattice::from_basis(&b)?))
}

/// A path from the base point to `l` through the upper half plane, away from the default one.
fn detour(l: C64) -> Vec<C64> {
    let top = C64::new(0.5, 2.0 + l.norm());
    let mut p = vec![C64::new(0.5, 0.0), top];
    if l.im < 0.0 {
        p.push(C64::new(-1.0 - l.norm(), 0.0));
    }
    p.push(l);
    p
}

fn loop_around(center: f64) -> Vec<C64> {
    let r = 0.25;
    let start = C64::new(0.5, 0.0);
    let a = C64::new(center + if center < 0.5 { r } else { -r }, 0.0);
    let c = C64::new(center, 0.0);
    let mut p = vec![start, a];
    p.extend((1..=16).map(|k| c + (a - c) * C64::from_polar(1.0, 2.0 * PI * k as f64 / 16.0)));
    p.push(start);
    p
}

fn monodromy(_: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let base = period_basis(Lambda::real(0.5)?, None)?;
    let mut mats = Vec::new();
    for c in [0.0, 1.0] {
        let b = period_basis(Lambda::real(0.5)?, Some(&loop_around(c)))?;
        match same_lattice((base.rho1, base.rho2), (b.rho1, b.rho2), 1e-9) {
            Some(m) if m[0][0] * m[1][1] - m[0][1] * m[1][0] == 1 && m != [[1, 0], [0, 1]] => mats.push(m),
            other => return Ok((false, format!("loop around {c}: matrix {other:?}"))),
        }
    }
    Ok((true, format!("around 0: {:?}, around 1: {:?}", mats[0], mats[1])))
}

fn lattice_well_defined(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for _ in 0..8 {
        let l = sample_lambda(rng, 0.1, 6.0, 0.1);
        let lam = Lambda::new(l)?;
        let a = period_basis(lam, None)?;
        let b = period_basis(lam, Some(&detour(l)))?;
        if same_lattice((a.rho1, a.rho2), (b.rho1, b.rho2), 1e-9).is_none() {
            return Ok((false, format!("lattices differ at {l}")));
        }
        let (va, vb) = (lattice_volume(&a).volume, lattice_volume(&b).volume);
        worst = worst.max((va - vb).abs() / va);
    }
    Ok((worst < 1e-9, format!("max relative volume gap {worst:.3e}")))
}

fn volume_symmetry(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let x = rng.gen_range(0.01..0.99);
        let v = |t: f64| -> Result<f64> { Ok(lattice_volume(&period_basis(Lambda::real(t)?, None)?).volume) };
        let (a, b) = (v(x)?, v(1.0 - x)?);
        worst = worst.max((a - b).abs() / a);
    }
    Ok((worst < 1e-9, format!("max relative gap of V(λ), V(1-λ): {worst:.3e}")))
}

fn positivity(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let mut min_im: f64 = f64::INFINITY;
    let mut min_v: f64 = f64::INFINITY;
    for _ in 0..1000 {
        let (_, b) = basis_at(sample_lambda(rng, 0.01, 10.0, 0.01))?;
        min_im = min_im.min(b.tau.im);
        min_v = min_v.min(lattice_volume(&b).volume);
    }
    Ok((min_im > 0.0 && min_v > 0.0, format!("min Im τ {min_im:.6e}, min V {min_v:.6e}")))
}

/// A point with Betti coordinates drawn away from the 2-torsion grid.
fn sample_point(rng: &mut ChaCha8Rng, lat: &FiberLattice) -> (C64, CurvePoint) {
    let (w1, w2, _) = lat.reduced();
    let z = w1 * rng.gen_range(0.05..0.45) + w2 * rng.gen_range(0.05..0.95);
    (z, lat.exp(z))
}

fn group_axioms(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let (lam, lat) = lattice_at(sample_lambda(rng, 0.05, 8.0, 0.05))?;
        for _ in 0..10 {
            let (_, p) = sample_point(rng, &lat);
            let (_, q) = sample_point(rng, &lat);
            let (_, r) = sample_point(rng, &lat);
            let assoc = add(lam, &add(lam, &p, &q), &r).chart_distance(&add(lam, &p, &add(lam, &q, &r)));
            let comm = add(lam, &p, &q).chart_distance(&add(lam, &q, &p));
            if !add(lam, &p, &neg(&p)).is_infinity() {
                return Ok((false, format!("p + (-p) is not Q over {}", lam.value())));
            }
            worst = worst.max(assoc).max(comm);
        }
    }
    Ok((worst < 1e-8, format!("max associativity/commutativity gap {worst:.3e}")))
}

fn lattice_gap(lat: &FiberLattice, d: C64) -> f64 {
    let (w1, w2, _) = lat.reduced();
    let (s, t) = lattice_coordinates(w1, w2, d);
    (w1 * (s - s.round()) + w2 * (t - t.round())).norm() / w1.norm()
}

fn round_trip(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let (mut worst_z, mut worst_p): (f64, f64) = (0.0, 0.0);
    for _ in 0..20 {
        let (_, lat) = lattice_at(sample_lambda(rng, 0.05, 8.0, 0.05))?;
        let (w1, w2, _) = lat.reduced();
        for _ in 0..200 {
            let z = w1 * rng.gen_range(0.0..1.0) + w2 * rng.gen_range(0.0..1.0);
            let p = lat.exp(z);
            if p.is_infinity() {
                continue;
            }
            worst_z = worst_z.max(lattice_gap(&lat, lat.log(&p)? - z));
            worst_p = worst_p.max(lat.exp(lat.log(&p)?).chart_distance(&p));
        }
    }
    Ok((
        worst_z < 1e-8 && worst_p < 1e-8,
        format!("max log∘exp gap {worst_z:.3e}, max exp∘log gap {worst_p:.3e}"),
    ))
}

fn homomorphism(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let (lam, lat) = lattice_at(sample_lambda(rng, 0.05, 8.0, 0.05))?;
        for _ in 0..10 {
            let (z1, p) = sample_point(rng, &lat);
            let (z2, q) = sample_point(rng, &lat);
            let s = add(lam, &p, &q);
            if s.is_infinity() {
                continue;
            }
            worst = worst.max(lattice_gap(&lat, lat.log(&s)? - z1 - z2));
        }
    }
    Ok((worst < 1e-8, format!("max gap of log(p+q) - log p - log q {worst:.3e}")))
}

fn two_torsion(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let (lam, lat) = lattice_at(sample_lambda(rng, 0.05, 8.0, 0.05))?;
        let images: Vec<CurvePoint> = lat.half_periods().iter().map(|&h| lat.exp(h)).collect();
        for t in two_torsion_points(lam) {
            let d = images.iter().map(|p| p.chart_distance(&t)).fold(f64::INFINITY, f64::min);
            worst = worst.max(d);
        }
        for p in &images {
            let d = two_torsion_points(lam).iter().map(|t| p.chart_distance(t)).fold(f64::INFINITY, f64::min);
            worst = worst.max(d);
        }
    }
    Ok((worst < 1e-8, format!("max distance between the two sets {worst:.3e}")))
}

fn sample_specs() -> Vec<SectionSpec> {
    vec![
        SectionSpec::torsion(TorsionName::P1),
        SectionSpec::torsion(TorsionName::P2),
        SectionSpec::torsion(TorsionName::P3),
        SectionSpec::torsion(TorsionName::Q),
        SectionSpec::masser(),
        SectionSpec::RationalXY {
            x_num: vec![C64::new(0.0, 0.0), C64::new(1.0, 0.0)],
            x_den: vec![C64::new(1.0, 0.0)],
            y_num: vec![C64::new(0.0, 0.0)],
            y_den: vec![C64::new(1.0, 0.0)],
        },
        exp_lambda(),
        SectionSpec::exp_of(vec![C64::new(0.3, -0.1), C64::new(0.0, 0.0), C64::new(1.0, 0.0)]),
        SectionSpec::Multiple {
            n: 2,
            of: Box::new(SectionSpec::masser()),
        },
    ]
}

/// λ clear of the punctures and of the section's branch cut.
fn sample_for(rng: &mut ChaCha8Rng, spec: &SectionSpec) -> C64 {
    loop {
        let l = sample_lambda(rng, 0.05, 8.0, 0.05);
        if spec.cut().map_or(true, |c| l.re < c - 0.05 || l.im.abs() > 0.05) {
            return l;
        }
    }
}

fn sections_on_curve(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    let mut n = 0;
    for spec in sample_specs() {
        for _ in 0..50 {
            let (lam, b) = basis_at(sample_for(rng, &spec))?;
            let (on, res) = on_curve(lam, &spec.evaluate(lam, &b)?);
            if !on {
                return Ok((false, format!("{spec:?} leaves the curve at {}: {res:.3e}", lam.value())));
            }
            worst = worst.max(res);
            n += 1;
        }
    }
    let local = SectionSpec::LocalPuncture {
        phi: vec![C64::new(2.0, 0.5), C64::new(-1.0, 0.0), C64::new(0.25, 0.1)],
        delta: 0.1,
    };
    for _ in 0..50 {
        let l = C64::from_polar(rng.gen_range(0.005..0.05), rng.gen_range(-PI..PI));
        let (lam, b) = basis_at(l)?;
        let (on, res) = on_curve(lam, &local.evaluate(lam, &b)?);
        if !on {
            return Ok((false, format!("local section leaves the curve at {l}: {res:.3e}")));
        }
        worst = worst.max(res);
        n += 1;
    }
    Ok((true, format!("{n} evaluations, max residual {worst:.3e}")))
}

fn masser_consistency(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let spec = SectionSpec::masser();
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let (lam, b) = basis_at(sample_for(rng, &spec))?;
        match spec.evaluate(lam, &b)? {
            CurvePoint::Affine { x, y } if x == C64::new(2.0, 0.0) => {
                let target = 2.0 * (2.0 - lam.value());
                worst = worst.max((y * y - target).norm() / target.norm());
            }
            p => return Ok((false, format!("x ≠ 2 at {}: {p:?}", lam.value()))),
        }
    }
    Ok((worst < 1e-14, format!("x ≡ 2; max relative gap of y² and 2(2-λ) {worst:.3e}")))
}

fn exp_negation(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let phi: Vec<C64> = (0..3).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        let minus: Vec<C64> = phi.iter().map(|c| -c).collect();
        let (lam, b) = basis_at(sample_lambda(rng, 0.05, 8.0, 0.05))?;
        let p = SectionSpec::exp_of(phi).evaluate(lam, &b)?;
        let q = SectionSpec::exp_of(minus).evaluate(lam, &b)?;
        worst = worst.max(q.chart_distance(&neg(&p)));
    }
    Ok((worst < 1e-8, format!("max distance of exp(-φ) from -exp(φ) {worst:.3e}")))
}

fn density_specs() -> Vec<SectionSpec> {
    vec![
        SectionSpec::masser(),
        exp_lambda(),
        SectionSpec::exp_of(vec![C64::new(0.1, 0.2), C64::new(0.0, 0.0), C64::new(1.0, 0.0)]),
        SectionSpec::Multiple {
            n: 2,
            of: Box::new(exp_lambda()),
        },
    ]
}

fn density_routes(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let specs = density_specs();
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let spec = &specs[rng.gen_range(0..specs.len())];
        let l = sample_for(rng, spec);
        let (lam, b) = basis_at(l)?;
        let holo = density_holomorphic_at(spec, &b, l, Side::Upper, None)?.0;
        let fd = pullback_density(spec, lam, None)?.density;
        worst = worst.max((holo - fd).abs() / holo.abs().max(1e-300));
    }
    Ok((worst < 1e-6, format!("max relative gap {worst:.3e}")))
}

/// `z(λ)`, `z'(λ)` and the frame at `l`.
fn lie_jet(spec: &SectionSpec, b: &PeriodBasis, l: C64) -> Result<(LocalFrame, C64, C64)> {
    let frame = LocalFrame::new(b, l)?;
    let z = spec.lie_coordinate(frame.lambda, &frame.lattice, Side::Upper, None)?;
    let h = (1e-3 * (1.0 + l.norm())).min(0.5 * stencil_limit(spec, l)).min(0.5 * b.local_radius());
    let dz = lie_derivative(spec, b, &frame, z, Side::Upper, h)?;
    Ok((frame, z, dz))
}

fn translation_invariance(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let specs = density_specs();
    let mut worst: f64 = 0.0;
    for k in 0..40 {
        let spec = &specs[k % specs.len()];
        let l = sample_for(rng, spec);
        let (_, b) = basis_at(l)?;
        let (frame, z, dz) = lie_jet(spec, &b, l)?;
        let d0 = frame.density_from(z, dz);
        let half = [(0.5, 0.0), (0.0, 0.5), (0.5, 0.5)];
        let c = if k % 4 == 3 { (rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)) } else { half[k % 4] };
        let j = &frame.jet;
        let d1 = frame.density_from(z + j.rho1 * c.0 + j.rho2 * c.1, dz + j.drho1 * c.0 + j.drho2 * c.1);
        worst = worst.max((d1 - d0).abs() / d0.abs().max(1e-300));
    }
    Ok((worst < 1e-8, format!("max relative change under constant shifts {worst:.3e}")))
}

fn path_independence(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let specs = density_specs();
    let mut worst: f64 = 0.0;
    for k in 0..20 {
        let spec = &specs[k % specs.len()];
        let l = sample_for(rng, spec);
        let lam = Lambda::new(l)?;
        let a = period_basis(lam, None)?;
        let b = period_basis(lam, Some(&detour(l)))?;
        let da = density_holomorphic_at(spec, &a, l, Side::Upper, None)?.0;
        let db = density_holomorphic_at(spec, &b, l, Side::Upper, None)?.0;
        worst = worst.max((da - db).abs() / da.abs().max(1e-300));
    }
    Ok((worst < 1e-8, format!("max relative gap between continuation paths {worst:.3e}")))
}

fn torsion_vanishing(_: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for p in [TorsionName::P1, TorsionName::P2, TorsionName::P3, TorsionName::Q] {
        worst = worst.max(neron_tate_height(&SectionSpec::torsion(p), &HeightConfig::default())?.value.abs());
    }
    Ok((worst < 1e-8, format!("max |ĥ| over P1, P2, P3, Q: {worst:.3e}")))
}

/// Masser's height, shared by the height checks.
fn masser_height() -> Result<HeightReport> {
    static CELL: OnceLock<Result<HeightReport>> = OnceLock::new();
    CELL.get_or_init(|| neron_tate_height(&SectionSpec::masser(), &HeightConfig::default())).clone()
}

fn quadratic_height(_: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let one = masser_height()?;
    let two = neron_tate_height(
        &SectionSpec::Multiple {
            n: 2,
            of: Box::new(SectionSpec::masser()),
        },
        &HeightConfig::default(),
    )?;
    let gap = (two.value - 4.0 * one.value).abs();
    let bar = two.est_error + 4.0 * one.est_error;
    Ok((
        gap <= bar,
        format!("ĥ(2σ) = {:.6} vs 4ĥ(σ) = {:.6}, gap {gap:.3e} within {bar:.3e}", two.value, 4.0 * one.value),
    ))
}

fn cross_estimator(_: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let spec = SectionSpec::masser();
    let q = masser_height()?;
    let c = torsion_count_height(&spec, &CountConfig::default())?;
    let rel = (q.value - c.value).abs() / q.value;
    Ok((
        rel < 0.1 && q.value > 0.0 && c.value > 0.0,
        format!("quadrature {:.6}, torsion count {:.6}, relative gap {rel:.3e}", q.value, c.value),
    ))
}

fn constant_tau(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for _ in 0..5 {
        let tau = C64::new(rng.gen_range(-0.5..0.5), rng.gen_range(0.5..3.0));
        let r = scheme_height(Family::ConstantTau { tau }, &HeightConfig::default())?;
        for h in &r.heights {
            worst = worst.max(h.value.abs());
        }
    }
    Ok((worst < 1e-10, format!("max scheme height {worst:.3e}")))
}

fn nondecreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] >= w[0])
}

fn monotonicity(_: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let exh = ExhaustionConfig::punctured_disk(2.0);
    let rs = log_spaced(2.5, 20.0, 6);
    let t = order_function(&exp_lambda(), OrderMetric::BettiOmega, &exh, &rs)?;
    let n = counting_function(&exp_lambda(), &Divisor::ZeroSectionQ, &exh, &rs, None)?;
    let h = height_characteristic(&exp_lambda(), &ExhaustionConfig::affine_curve(2.0), &log_spaced(10.0, 1000.0, 5))?;
    let flags = [nondecreasing(&t.values), nondecreasing(&n.values), nondecreasing(&h.values)];
    Ok((
        flags.iter().all(|f| *f),
        format!("order {}, counting {}, height characteristic {}", flags[0], flags[1], flags[2]),
    ))
}

fn truncation(_: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let exh = ExhaustionConfig::punctured_disk(2.0);
    let rs = log_spaced(2.5, 20.0, 6);
    let spec = exp_lambda();
    let full = counting_function(&spec, &Divisor::ZeroSectionQ, &exh, &rs, None)?;
    let n1 = counting_function(&spec, &Divisor::ZeroSectionQ, &exh, &rs, Some(1))?;
    let n2 = counting_function(&spec, &Divisor::ZeroSectionQ, &exh, &rs, Some(2))?;
    let ok = (0..rs.len()).all(|k| n1.values[k] <= n2.values[k] && n2.values[k] <= full.values[k]);
    let last = rs.len() - 1;
    Ok((
        ok,
        format!(
            "at r = {:.3}: N1 = {:.6}, N2 = {:.6}, N = {:.6}",
            rs[last], n1.values[last], n2.values[last], full.values[last]
        ),
    ))
}

fn metric_comparison(_: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let exh = ExhaustionConfig::punctured_disk(2.0);
    let rs = log_spaced(2.5, 4.5, 4);
    let fs = order_function(&exp_lambda(), OrderMetric::FubiniStudyOnX { scale: 1.0 }, &exh, &rs)?;
    let b = order_function(&exp_lambda(), OrderMetric::BettiOmega, &exh, &rs)?;
    let ratios: Vec<f64> = fs.values.iter().zip(&b.values).map(|(a, c)| a / c).collect();
    let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = ratios.iter().cloned().fold(0.0, f64::max);
    Ok((
        lo > 0.0 && hi / lo < 2.0,
        format!("T_FS/T_Betti between {lo:.6} and {hi:.6}"),
    ))
}

fn fmt_closure(_: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let exh = ExhaustionConfig::punctured_disk(2.0);
    let rs = log_spaced(2.5, 12.0, 6);
    let c = Divisor::XEquals { c: C64::new(3.3, 0.2) };
    let cases = [
        ("exp(λ), Q, Néron", exp_lambda(), Divisor::ZeroSectionQ, ProximityMetric::Neron),
        ("P3, Q, Néron", SectionSpec::torsion(TorsionName::P3), Divisor::ZeroSectionQ, ProximityMetric::Neron),
        ("P3, x = c, FS", SectionSpec::torsion(TorsionName::P3), c, ProximityMetric::FubiniStudy),
    ];
    let mut parts = Vec::new();
    let mut ok = true;
    let near = log_spaced(2.5, 5.0, 4);
    let cases = cases.into_iter().map(|(n, s, d, m)| (n, s, d, m, &rs[..])).chain([(
        "exp(λ), x = c, FS",
        exp_lambda(),
        c,
        ProximityMetric::FubiniStudy,
        &near[..],
    )]);
    for (name, spec, d, m, radii) in cases {
        let r = fmt_residual(&spec, &d, m, &exh, radii)?;
        let pass = r.ratio_bound.is_finite() && r.max_deviation < 1e-6 && slope_spread(r.half_slopes) <= 0.25;
        ok &= pass;
        parts.push(format!("{name}: slope {:.6}, deviation {:.3e}", r.slope, r.max_deviation));
    }
    Ok((ok, parts.join("; ")))
}

fn quadrature_convergence(_: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let exh = ExhaustionConfig::punctured_disk(2.0);
    let mut fine = exh.clone();
    fine.quad.order = 8;
    fine.max_ds = 0.5 * exh.max_ds;
    let rs = log_spaced(2.5, 50.0, 5);
    let a = order_function(&exp_lambda(), OrderMetric::BettiOmega, &exh, &rs)?;
    let b = order_function(&exp_lambda(), OrderMetric::BettiOmega, &fine, &rs)?;
    let mut worst: f64 = 0.0;
    for k in 0..rs.len() {
        let bound = a.quad_error[k].max(1e-14 * a.values[k]);
        worst = worst.max((a.values[k] - b.values[k]).abs() / bound);
    }
    Ok((worst <= 1.0, format!("max change over reported error {worst:.3e}")))
}
