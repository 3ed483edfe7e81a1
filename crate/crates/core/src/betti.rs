//! Betti coordinates and the pullback of the fiberwise area form `ω = dβ₁∧dβ₂`.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::curve::{self, CurvePoint, FiberLattice};
use crate::error::{Error, Result};
use crate::periods::{lattice_coordinates, period_basis, puncture_distance, Lambda, PeriodBasis, PeriodJet};
use crate::sections::{SectionSpec, Side, TorsionName};

const I: C64 = C64::new(0.0, 1.0);

/// Real coordinates of an elliptic logarithm in the period basis, reduced to `[0, 1)²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BettiPair {
    pub b1: f64,
    pub b2: f64,
}

impl BettiPair {
    pub fn reduced(b1: f64, b2: f64) -> Self {
        let r = |v: f64| {
            let f = v - v.floor();
            if f >= 1.0 {
                0.0
            } else {
                f
            }
        };
        BettiPair { b1: r(b1), b2: r(b2) }
    }

    /// Distance on the torus `ℝ²/ℤ²`.
    pub fn torus_distance(&self, other: &BettiPair) -> f64 {
        let d = |a: f64, b: f64| {
            let t = a - b;
            (t - t.round()).abs()
        };
        d(self.b1, other.b1).hypot(d(self.b2, other.b2))
    }
}

/// Coefficient of `σ*ω` against `du∧dv` for `λ = u + iv`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PullbackDensity {
    pub density: f64,
    pub est_error: f64,
}

pub fn betti_coords(lambda: Lambda, p: &CurvePoint, basis: &PeriodBasis) -> Result<BettiPair> {
    let det = basis.covolume();
    if det.abs() < 1e-14 * basis.rho1.norm_sqr() {
        return Err(Error::numeric("betti coordinates", format!("degenerate period matrix, det = {det:e}")));
    }
    let z = curve::elliptic_log(lambda, p, basis)?;
    let (b1, b2) = lattice_coordinates(basis.rho1, basis.rho2, z);
    Ok(BettiPair::reduced(b1, b2))
}

/// Periods, lattice and an admissible stencil scale at a point near a basis.
#[derive(Debug, Clone)]
pub struct LocalFrame {
    pub lambda: Lambda,
    pub jet: PeriodJet,
    pub lattice: FiberLattice,
}

impl LocalFrame {
    pub fn new(basis: &PeriodBasis, l: C64) -> Result<Self> {
        let lambda = Lambda::new(l)?;
        let jet = basis.jet_at(l)?;
        let lattice = FiberLattice::from_jet(l, &jet)?;
        Ok(LocalFrame { lambda, jet, lattice })
    }

    pub fn betti(&self, z: C64) -> (f64, f64) {
        lattice_coordinates(self.jet.rho1, self.jet.rho2, z)
    }

    /// `|w|²/Im(ρ̄₁ρ₂)` with `w = z' - β₁ρ₁' - β₂ρ₂'`.
    pub fn density_from(&self, z: C64, dz: C64) -> f64 {
        let (b1, b2) = self.betti(z);
        let w = dz - self.jet.drho1 * b1 - self.jet.drho2 * b2;
        w.norm_sqr() / self.jet.covolume()
    }
}

/// Largest stencil half-width that keeps clear of punctures and branch points.
pub fn stencil_limit(spec: &SectionSpec, l: C64) -> f64 {
    let mut d = puncture_distance(l);
    if let Some(c) = spec.cut() {
        d = d.min((l - c).norm());
    }
    0.25 * d
}

/// `z'(λ)` for a section, exact where the Lie coordinate is known in closed form.
pub fn lie_derivative(
    spec: &SectionSpec,
    basis: &PeriodBasis,
    center: &LocalFrame,
    z0: C64,
    side: Side,
    h: f64,
) -> Result<C64> {
    match spec {
        SectionSpec::NamedTorsion { .. } => {
            // a fixed half-integer combination of the periods
            let (b1, b2) = center.betti(z0);
            Ok(center.jet.drho1 * b1.round_ties_even_half() + center.jet.drho2 * b2.round_ties_even_half())
        }
        SectionSpec::TranscendentalExp { phi } => Ok(crate::sections::poly_eval(phi, center.lambda.value()).1),
        SectionSpec::Multiple { n, of } => {
            Ok(lie_derivative(of, basis, center, z0 / *n as f64, side, h)? * *n as f64)
        }
        _ => {
            let l = center.lambda.value();
            let mut f = [C64::new(0.0, 0.0); 4];
            let offsets = [C64::new(h, 0.0), C64::new(-h, 0.0), I * h, -I * h];
            for (k, d) in offsets.iter().enumerate() {
                let frame = LocalFrame::new(basis, l + d)?;
                f[k] = spec.lie_coordinate(frame.lambda, &frame.lattice, side, Some(z0))?;
            }
            Ok((f[0] - f[1] - I * f[2] + I * f[3]) / (4.0 * h))
        }
    }
}

trait HalfRound {
    fn round_ties_even_half(self) -> f64;
}

impl HalfRound for f64 {
    fn round_ties_even_half(self) -> f64 {
        (self * 2.0).round() / 2.0
    }
}

/// Density of `σ*ω` from the holomorphic Lie derivative, with `basis` valid near `l`.
///
/// This is the second, independent route to the density; it agrees with the finite-difference
/// Jacobian of the Betti coordinates.
pub fn density_holomorphic_at(
    spec: &SectionSpec,
    basis: &PeriodBasis,
    l: C64,
    side: Side,
    seed: Option<C64>,
) -> Result<(f64, C64)> {
    let center = LocalFrame::new(basis, l)?;
    let z0 = spec.lie_coordinate(center.lambda, &center.lattice, side, seed)?;
    let h = (1e-3 * (1.0 + l.norm())).min(0.5 * stencil_limit(spec, l)).min(0.5 * basis.local_radius());
    let dz = lie_derivative(spec, basis, &center, z0, side, h)?;
    Ok((center.density_from(z0, dz), z0))
}

pub fn density_holomorphic(spec: &SectionSpec, lambda: Lambda) -> Result<f64> {
    let basis = period_basis(lambda, None)?;
    Ok(density_holomorphic_at(spec, &basis, lambda.value(), Side::Upper, None)?.0)
}

fn jacobian_at(
    spec: &SectionSpec,
    basis: &PeriodBasis,
    l: C64,
    z0: C64,
    side: Side,
    h: f64,
) -> Result<f64> {
    let mut b = [(0.0, 0.0); 4];
    for (k, d) in [C64::new(h, 0.0), C64::new(-h, 0.0), C64::new(0.0, h), C64::new(0.0, -h)]
        .iter()
        .enumerate()
    {
        let frame = LocalFrame::new(basis, l + d)?;
        let p = spec.evaluate_on(frame.lambda, &frame.lattice, side);
        if let Ok(CurvePoint::Infinity) = p {
            return Err(Error::numeric(
                "pullback density",
                format!("stencil point {} meets the zero section; shrink h", l + d),
            ));
        }
        let z = spec.lie_coordinate(frame.lambda, &frame.lattice, side, Some(z0))?;
        b[k] = frame.betti(z);
    }
    // Lifts are continuous through the seed; residual integer jumps are removed here.
    let unwrap = |a: f64, c: f64| a - (a - c).round();
    let du1 = (unwrap(b[0].0, b[1].0) - b[1].0) / (2.0 * h);
    let du2 = (unwrap(b[0].1, b[1].1) - b[1].1) / (2.0 * h);
    let dv1 = (unwrap(b[2].0, b[3].0) - b[3].0) / (2.0 * h);
    let dv2 = (unwrap(b[2].1, b[3].1) - b[3].1) / (2.0 * h);
    Ok(du1 * dv2 - dv1 * du2)
}

/// Jacobian of the Betti coordinates of `spec` at `l` by central differences with a Richardson
/// correction; `basis` must be valid near `l`.
pub fn pullback_density_at(
    spec: &SectionSpec,
    basis: &PeriodBasis,
    l: C64,
    h: f64,
    side: Side,
) -> Result<PullbackDensity> {
    if let SectionSpec::NamedTorsion { point: TorsionName::Q } = spec {
        return Ok(PullbackDensity { density: 0.0, est_error: 0.0 });
    }
    let center = LocalFrame::new(basis, l)?;
    let z0 = spec.lie_coordinate(center.lambda, &center.lattice, side, None)?;
    if let Ok(CurvePoint::Infinity) = spec.evaluate_on(center.lambda, &center.lattice, side) {
        return Err(Error::numeric("pullback density", format!("the section meets Q at {l}")));
    }
    let limit = stencil_limit(spec, l).min(0.5 * basis.local_radius());
    let h = h.min(0.5 * limit);
    let j1 = jacobian_at(spec, basis, l, z0, side, h)?;
    let j2 = jacobian_at(spec, basis, l, z0, side, 2.0 * h)?;
    let density = (4.0 * j1 - j2) / 3.0;
    Ok(PullbackDensity {
        density,
        est_error: (j1 - j2).abs() / 3.0 + 1e-15 * density.abs() / (h * h),
    })
}

pub fn default_step(l: C64) -> f64 {
    1e-5 * (1.0 + l.norm())
}

pub fn pullback_density(spec: &SectionSpec, lambda: Lambda, h: Option<f64>) -> Result<PullbackDensity> {
    let basis = period_basis(lambda, None)?;
    let l = lambda.value();
    pullback_density_at(spec, &basis, l, h.unwrap_or_else(|| default_step(l)), Side::Upper)
}

/// Outcome of the fiber-integral chart check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiberIntegral {
    pub value: f64,
    pub grid_n: usize,
    /// Largest torus distance between a grid point and its exp/log round trip.
    pub max_round_trip: f64,
    pub collisions: usize,
}

/// Integral of `ω` over the fiber, with the exp/log chart verified on an `n × n` Betti grid.
pub fn fiber_integral(lambda: Lambda, grid_n: usize) -> Result<FiberIntegral> {
    if grid_n < 16 {
        return Err(Error::Input(format!("grid_n = {grid_n} must be at least 16")));
    }
    let basis = period_basis(lambda, None)?;
    let lat = FiberLattice::from_basis(&basis)?;
    let n = grid_n as f64;
    let mut worst: f64 = 0.0;
    let mut collisions = 0;
    for i in 0..grid_n {
        for j in 0..grid_n {
            let target = BettiPair::reduced((i as f64 + 0.5) / n, (j as f64 + 0.5) / n);
            let z = basis.rho1 * target.b1 + basis.rho2 * target.b2;
            let p = lat.exp(z);
            let back = lat.log(&p)?;
            let (b1, b2) = lattice_coordinates(basis.rho1, basis.rho2, back);
            let d = BettiPair::reduced(b1, b2).torus_distance(&target);
            worst = worst.max(d);
            // another grid point would be at least 1/n away
            if d > 0.25 / n {
                collisions += 1;
            }
        }
    }
    if collisions > 0 {
        return Err(Error::numeric(
            "fiber integral",
            format!("{collisions} grid points failed the chart round trip (max error {worst:.3e})"),
        ));
    }
    Ok(FiberIntegral {
        value: 1.0,
        grid_n,
        max_round_trip: worst,
        collisions,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MultiplicationCheck {
    pub n: i64,
    pub ratio: f64,
    /// Torus distance between `β([n]p)` and `n·β(p)`.
    pub coordinate_error: f64,
}

/// Verifies that `[n]` acts as `β ↦ nβ` at `p` and measures its Jacobian on a small Betti
/// parallelogram.
pub fn multiplication_pullback_check(n: i64, lambda: Lambda, p: &CurvePoint) -> Result<MultiplicationCheck> {
    if n < 1 {
        return Err(Error::Input(format!("n = {n} must be positive")));
    }
    let basis = period_basis(lambda, None)?;
    let lat = FiberLattice::from_basis(&basis)?;
    let z = lat.log(p)?;
    let beta = |q: &CurvePoint| -> Result<(f64, f64)> {
        let w = lat.log(q)?;
        Ok(lattice_coordinates(basis.rho1, basis.rho2, w))
    };
    let (b1, b2) = lattice_coordinates(basis.rho1, basis.rho2, z);
    let np = curve::mul_n(lambda, n, p);
    let (c1, c2) = beta(&np)?;
    let expected = BettiPair::reduced(b1 * n as f64, b2 * n as f64);
    let coordinate_error = BettiPair::reduced(c1, c2).torus_distance(&expected);

    let eps = 1e-4 / n as f64;
    let corner = |d1: f64, d2: f64| -> Result<(f64, f64)> {
        let q = lat.exp(z + basis.rho1 * d1 + basis.rho2 * d2);
        let (u1, u2) = beta(&curve::mul_n(lambda, n, &q))?;
        Ok((u1 - (u1 - c1).round(), u2 - (u2 - c2).round()))
    };
    let o = corner(0.0, 0.0)?;
    let a = corner(eps, 0.0)?;
    let b = corner(0.0, eps)?;
    let det = (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0);
    Ok(MultiplicationCheck {
        n,
        ratio: det / (eps * eps),
        coordinate_error,
    })
}

/// Proportionality between `dd^c Re(zη(z))` along a section's graph and `σ*ω`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialFit {
    pub samples: Vec<(C64, f64, f64)>,
    /// Least-squares constant `c` in `dd^c F ≈ c·density`.
    pub constant: f64,
    /// Largest relative deviation of a sample ratio from `constant`.
    pub spread: f64,
}

/// `Re(z η(z))` along the section, with `z` and the periods continued from the center.
fn graph_potential(spec: &SectionSpec, basis: &PeriodBasis, l: C64, z0: C64, side: Side) -> Result<f64> {
    let frame = LocalFrame::new(basis, l)?;
    let z = spec.lie_coordinate(frame.lambda, &frame.lattice, side, Some(z0))?;
    let (b1, b2) = frame.betti(z);
    let qp = frame.lattice.quasi_periods();
    let eta = qp.eta1 * b1 + qp.eta2 * b2;
    Ok((z * eta).re)
}

/// `dd^c F` (as `ΔF/(4π)`) of the graph potential at each sample, against the pullback density.
pub fn potential_check(spec: &SectionSpec, lambdas: &[Lambda]) -> Result<PotentialFit> {
    let mut samples = Vec::new();
    for &lam in lambdas {
        let l = lam.value();
        let basis = period_basis(lam, None)?;
        let center = LocalFrame::new(&basis, l)?;
        let z0 = spec.lie_coordinate(lam, &center.lattice, Side::Upper, None)?;
        let dens = pullback_density_at(spec, &basis, l, default_step(l), Side::Upper)?.density;
        let h = (2e-3 * (1.0 + l.norm())).min(0.5 * stencil_limit(spec, l));
        let f = |d: C64| graph_potential(spec, &basis, l + d, z0, Side::Upper);
        // fourth-order five-point Laplacian on two scales
        let lap = |h: f64| -> Result<f64> {
            let c = f(C64::new(0.0, 0.0))?;
            let mut s1 = 0.0;
            let mut s2 = 0.0;
            for d in [C64::new(1.0, 0.0), C64::new(-1.0, 0.0), I, -I] {
                s1 += f(d * h)?;
                s2 += f(d * 2.0 * h)?;
            }
            Ok((16.0 * (s1 - 4.0 * c) - (s2 - 4.0 * c)) / (12.0 * h * h))
        };
        let ddc = lap(h)? / (4.0 * PI);
        samples.push((l, ddc, dens));
    }
    let num: f64 = samples.iter().map(|s| s.1 * s.2).sum();
    let den: f64 = samples.iter().map(|s| s.2 * s.2).sum();
    let constant = if den > 0.0 { num / den } else { 0.0 };
    let spread = samples
        .iter()
        .filter(|s| s.2.abs() > 1e-14)
        .map(|s| ((s.1 / s.2) - constant).abs() / constant.abs().max(1e-300))
        .fold(0.0, f64::max);
    Ok(PotentialFit {
        samples,
        constant,
        spread,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lam(re: f64, im: f64) -> Lambda {
        Lambda::new(C64::new(re, im)).unwrap()
    }

    #[test]
    fn coordinates_of_special_points() {
        let l = lam(0.3, 0.8);
        let b = period_basis(l, None).unwrap();
        assert_eq!(betti_coords(l, &CurvePoint::Infinity, &b).unwrap(), BettiPair { b1: 0.0, b2: 0.0 });
        for p in curve::two_torsion_points(l) {
            let c = betti_coords(l, &p, &b).unwrap();
            for v in [c.b1, c.b2] {
                assert!((2.0 * v - (2.0 * v).round()).abs() < 1e-10);
            }
            assert!(c.b1.max(c.b2) > 0.25);
        }
        let lat = FiberLattice::from_basis(&b).unwrap();
        let p = lat.exp(b.rho1 * 0.25 + b.rho2 * 0.75);
        let c = betti_coords(l, &p, &b).unwrap();
        assert!((c.b1 - 0.25).abs() < 1e-9 && (c.b2 - 0.75).abs() < 1e-9);
    }

    #[test]
    fn torsion_density_vanishes() {
        for t in [TorsionName::P3, TorsionName::Q] {
            let d = pullback_density(&SectionSpec::torsion(t), lam(-0.4, 1.2), None).unwrap();
            assert!(d.density.abs() < 1e-9, "{t:?}: {d:?}");
        }
    }

    #[test]
    fn finite_differences_match_holomorphic_route() {
        let spec = SectionSpec::masser();
        for l in [lam(-1.0, 0.0), lam(0.4, 0.9), lam(3.0, -2.0)] {
            let fd = pullback_density(&spec, l, None).unwrap();
            let hol = density_holomorphic(&spec, l).unwrap();
            assert!((fd.density - hol).abs() < 1e-6 * hol, "{fd:?} vs {hol}");
        }
        let e = SectionSpec::exp_of(vec![C64::new(0.0, 0.0), C64::new(1.0, 0.0)]);
        let l = lam(2.0, 1.0);
        let fd = pullback_density(&e, l, None).unwrap();
        let hol = density_holomorphic(&e, l).unwrap();
        assert!((fd.density - hol).abs() < 1e-6 * hol);
    }

    #[test]
    fn fiber_integral_is_one() {
        let f = fiber_integral(lam(0.2, -0.7), 32).unwrap();
        assert_eq!(f.value, 1.0);
        assert!(f.max_round_trip < 1e-9);
        assert!(fiber_integral(lam(0.2, -0.7), 8).is_err());
    }

    #[test]
    fn multiplication_scales_jacobian() {
        let l = lam(1.5, 0.5);
        let b = period_basis(l, None).unwrap();
        let lat = FiberLattice::from_basis(&b).unwrap();
        let p = lat.exp(b.rho1 * 0.123 + b.rho2 * 0.321);
        for n in [1, 2, 3] {
            let c = multiplication_pullback_check(n, l, &p).unwrap();
            assert!((c.ratio - (n * n) as f64).abs() < 1e-6, "{c:?}");
            assert!(c.coordinate_error < 1e-9);
        }
    }
}
