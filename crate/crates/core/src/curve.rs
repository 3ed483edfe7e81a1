//! Arithmetic on a single Legendre fiber `E_λ : y² = x(x-1)(x-λ)`.
//!
//! The fiber exponential is the Weierstrass parameterization of the shifted cubic: with
//! `x = u + (1+λ)/3` and `y = w/2` the curve becomes `w² = 4u³ - g₂u - g₃`, and
//! `exp_λ(z) = (℘(z) + (1+λ)/3, ℘'(z)/2)` for the lattice spanned by the periods of `dx/(2y)`.
//! `℘` is evaluated through Jacobi theta functions on a reduced basis of the lattice.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::periods::{lattice_coordinates, Lambda, PeriodBasis, PeriodJet};

const I: C64 = C64::new(0.0, 1.0);

/// Relative tolerance for fiber membership.
pub const MEMBERSHIP_TOL: f64 = 1e-9;
/// Lie coordinates this close (relative to the lattice scale) to a period map to `Q`.
pub const LATTICE_SNAP: f64 = 1e-8;
/// Below this separation of x-coordinates the chord is treated as vertical or tangent.
pub const DEGENERATE_CHORD: f64 = 1e-12;

/// A point of the projective fiber; `Infinity` is the zero section `Q = (0:1:0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "tag")]
pub enum CurvePoint {
    Infinity,
    Affine { x: C64, y: C64 },
}

impl CurvePoint {
    pub fn affine(x: C64, y: C64) -> Self {
        CurvePoint::Affine { x, y }
    }

    pub fn is_infinity(&self) -> bool {
        matches!(self, CurvePoint::Infinity)
    }

    pub fn x(&self) -> Option<C64> {
        match *self {
            CurvePoint::Affine { x, .. } => Some(x),
            CurvePoint::Infinity => None,
        }
    }

    /// Distance in a chart that stays bounded near `Q`: affine coordinates when both points are
    /// moderate, `(x/y, 1/y)` otherwise.
    pub fn chart_distance(&self, other: &CurvePoint) -> f64 {
        let chart = |p: &CurvePoint| -> (C64, C64) {
            match *p {
                CurvePoint::Infinity => (C64::new(0.0, 0.0), C64::new(0.0, 0.0)),
                CurvePoint::Affine { x, y } => (x / y, 1.0 / y),
            }
        };
        match (self, other) {
            (CurvePoint::Affine { x: x1, y: y1 }, CurvePoint::Affine { x: x2, y: y2 })
                if x1.norm() < 1e3 && x2.norm() < 1e3 =>
            {
                let scale = 1.0 + x1.norm() + y1.norm();
                ((x1 - x2).norm() + (y1 - y2).norm()) / scale
            }
            _ => {
                let (a1, b1) = chart(self);
                let (a2, b2) = chart(other);
                (a1 - a2).norm() + (b1 - b2).norm()
            }
        }
    }
}

/// Value of `η_λ` on the basis periods, with `ζ(z + ρᵢ) = ζ(z) + ηᵢ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuasiPeriods {
    pub eta1: C64,
    pub eta2: C64,
}

impl QuasiPeriods {
    /// `η₁ρ₂ - η₂ρ₁`, equal to `2πi` for a positively oriented basis.
    pub fn legendre_relation(&self, rho1: C64, rho2: C64) -> C64 {
        self.eta1 * rho2 - self.eta2 * rho1
    }
}

/// Weierstrass invariants `(g₂, g₃)` of the shifted Legendre cubic.
pub fn weierstrass_invariants(lambda: C64) -> (C64, C64) {
    let g2 = (lambda * lambda - lambda + 1.0) * (4.0 / 3.0);
    let g3 = (lambda + 1.0) * (lambda - 2.0) * (2.0 * lambda - 1.0) * (4.0 / 27.0);
    (g2, g3)
}

#[inline]
fn cubic(lambda: C64, x: C64) -> C64 {
    x * (x - 1.0) * (x - lambda)
}

/// Whether `p` lies on `E_λ` to [`MEMBERSHIP_TOL`] relative, and the residual used.
pub fn on_curve(lambda: Lambda, p: &CurvePoint) -> (bool, f64) {
    match *p {
        CurvePoint::Infinity => (true, 0.0),
        CurvePoint::Affine { x, y } => {
            let l = lambda.value();
            let rhs = cubic(l, x);
            let scale = 1.0 + y.norm_sqr() + x.norm() * (x.norm() + 1.0) * (x.norm() + l.norm());
            let residual = (y * y - rhs).norm() / scale;
            (residual < MEMBERSHIP_TOL, residual)
        }
    }
}

pub fn neg(p: &CurvePoint) -> CurvePoint {
    match *p {
        CurvePoint::Infinity => CurvePoint::Infinity,
        CurvePoint::Affine { x, y } => CurvePoint::Affine { x, y: -y },
    }
}

/// Chord–tangent addition. The flag is set when the chord was nearly vertical and the result
/// lost precision to cancellation.
pub fn add_flagged(lambda: Lambda, p: &CurvePoint, q: &CurvePoint) -> (CurvePoint, bool) {
    let l = lambda.value();
    let (x1, y1, x2, y2) = match (*p, *q) {
        (CurvePoint::Infinity, _) => return (*q, false),
        (_, CurvePoint::Infinity) => return (*p, false),
        (CurvePoint::Affine { x: x1, y: y1 }, CurvePoint::Affine { x: x2, y: y2 }) => {
            (x1, y1, x2, y2)
        }
    };
    let scale = 1.0 + x1.norm().max(x2.norm());
    let mut flagged = false;
    let slope = if (x1 - x2).norm() < DEGENERATE_CHORD * scale {
        let yscale = 1.0 + y1.norm().max(y2.norm());
        if (y1 + y2).norm() < 1e-9 * yscale {
            return (CurvePoint::Infinity, false);
        }
        if (y1 - y2).norm() > 1e-9 * yscale {
            flagged = true;
        }
        // tangent
        let y = (y1 + y2) * 0.5;
        let x = (x1 + x2) * 0.5;
        (3.0 * x * x - 2.0 * (1.0 + l) * x + l) / (2.0 * y)
    } else {
        (y2 - y1) / (x2 - x1)
    };
    if !slope.re.is_finite() || !slope.im.is_finite() {
        return (CurvePoint::Infinity, flagged);
    }
    let x3 = slope * slope + (1.0 + l) - x1 - x2;
    let y3 = -(y1 + slope * (x3 - x1));
    (CurvePoint::Affine { x: x3, y: y3 }, flagged)
}

pub fn add(lambda: Lambda, p: &CurvePoint, q: &CurvePoint) -> CurvePoint {
    add_flagged(lambda, p, q).0
}

pub fn double(lambda: Lambda, p: &CurvePoint) -> CurvePoint {
    match *p {
        CurvePoint::Infinity => CurvePoint::Infinity,
        CurvePoint::Affine { y, .. } if y.norm() == 0.0 => CurvePoint::Infinity,
        _ => add(lambda, p, p),
    }
}

/// `[n]p` by double-and-add.
pub fn mul_n(lambda: Lambda, n: i64, p: &CurvePoint) -> CurvePoint {
    let base = if n < 0 { neg(p) } else { *p };
    let mut k = n.unsigned_abs();
    let mut acc = CurvePoint::Infinity;
    let mut run = base;
    while k > 0 {
        if k & 1 == 1 {
            acc = add(lambda, &acc, &run);
        }
        k >>= 1;
        if k > 0 {
            run = double(lambda, &run);
        }
    }
    acc
}

/// The three points of order two, `P₁ = (0,0)`, `P₂ = (1,0)`, `P₃ = (λ,0)`.
pub fn two_torsion_points(lambda: Lambda) -> [CurvePoint; 3] {
    let zero = C64::new(0.0, 0.0);
    [
        CurvePoint::affine(zero, zero),
        CurvePoint::affine(C64::new(1.0, 0.0), zero),
        CurvePoint::affine(lambda.value(), zero),
    ]
}

/// A period lattice in reduced form, with everything needed to evaluate `℘`, `ζ`-quasi-periods
/// and `σ` quickly.
#[derive(Debug, Clone)]
pub struct FiberLattice {
    lambda: C64,
    /// The caller's basis.
    pub rho1: C64,
    pub rho2: C64,
    /// Reduced basis `(w1, w2) = M·(ρ₁, ρ₂)` with `w2/w1` in the standard fundamental domain.
    w1: C64,
    w2: C64,
    m: [[i64; 2]; 2],
    tau: C64,
    th2: C64,
    th3: C64,
    th4: C64,
    g2: C64,
    g3: C64,
    eta_w1: C64,
    eta_w2: C64,
}

fn theta_all(v: C64, tau: C64) -> [C64; 4] {
    // returns [θ1, θ2, θ3, θ4](v | τ)
    let mut t1 = C64::new(0.0, 0.0);
    let mut t2 = C64::new(0.0, 0.0);
    let mut t3 = C64::new(1.0, 0.0);
    let mut t4 = C64::new(1.0, 0.0);
    for n in 0..40usize {
        let nh = n as f64 + 0.5;
        let qh = (I * PI * tau * (nh * nh)).exp();
        let arg = v * (2.0 * n as f64 + 1.0);
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        let a1 = qh * arg.sin() * (2.0 * sign);
        let a2 = qh * arg.cos() * 2.0;
        t1 += a1;
        t2 += a2;
        let mut small = a1.norm() + a2.norm() < 1e-18 * (t1.norm() + t2.norm());
        if n >= 1 {
            let nf = n as f64;
            let qn = (I * PI * tau * (nf * nf)).exp();
            let c = (v * (2.0 * nf)).cos() * qn * 2.0;
            t3 += c;
            t4 += c * sign;
            small &= c.norm() < 1e-18 * t3.norm().max(t4.norm());
        }
        if small && n >= 2 {
            break;
        }
    }
    [t1, t2, t3, t4]
}

impl FiberLattice {
    pub fn new(lambda: C64, rho1: C64, rho2: C64) -> Result<Self> {
        let tau0 = rho2 / rho1;
        if !(tau0.im > 0.0) {
            return Err(Error::numeric(
                "lattice reduction",
                format!("tau = {tau0} is not in the upper half plane"),
            ));
        }
        let (mut a, mut b) = (rho1, rho2);
        let mut m = [[1i64, 0], [0, 1]];
        for _ in 0..200 {
            let t = b / a;
            let n = t.re.round();
            if n != 0.0 {
                b -= a * n;
                let ni = n as i64;
                m[1][0] -= ni * m[0][0];
                m[1][1] -= ni * m[0][1];
            }
            if (b / a).norm() < 1.0 - 1e-14 {
                let (na, nb) = (b, -a);
                a = na;
                b = nb;
                m = [m[1], [-m[0][0], -m[0][1]]];
            } else {
                break;
            }
        }
        let tau = b / a;
        let [_, th2, th3, th4] = theta_all(C64::new(0.0, 0.0), tau);
        let (g2, g3) = weierstrass_invariants(lambda);
        let e2 = eisenstein_e2(tau);
        let eta_w1 = PI * PI * e2 / (3.0 * a);
        let eta_w2 = (eta_w1 * b - 2.0 * PI * I) / a;
        Ok(FiberLattice {
            lambda,
            rho1,
            rho2,
            w1: a,
            w2: b,
            m,
            tau,
            th2,
            th3,
            th4,
            g2,
            g3,
            eta_w1,
            eta_w2,
        })
    }

    pub fn from_basis(basis: &PeriodBasis) -> Result<Self> {
        FiberLattice::new(basis.base_lambda.value(), basis.rho1, basis.rho2)
    }

    pub fn from_jet(lambda: C64, jet: &PeriodJet) -> Result<Self> {
        FiberLattice::new(lambda, jet.rho1, jet.rho2)
    }

    pub fn lambda(&self) -> C64 {
        self.lambda
    }

    /// The reduced basis and the modulus in the fundamental domain.
    pub fn reduced(&self) -> (C64, C64, C64) {
        (self.w1, self.w2, self.tau)
    }

    /// Real coordinates of `z` in the caller's basis `(ρ₁, ρ₂)`.
    pub fn coordinates(&self, z: C64) -> (f64, f64) {
        lattice_coordinates(self.rho1, self.rho2, z)
    }

    /// `z` minus the nearest lattice point (in reduced coordinates).
    pub fn reduce(&self, z: C64) -> C64 {
        let (s, t) = lattice_coordinates(self.w1, self.w2, z);
        z - self.w1 * s.round() - self.w2 * t.round()
    }

    /// Reduces `z` into the fundamental parallelogram `{sρ₁ + tρ₂ : s, t ∈ [0, 1)}`.
    pub fn to_parallelogram(&self, z: C64) -> C64 {
        let (s, t) = self.coordinates(z);
        let (mut fs, mut ft) = (s - s.floor(), t - t.floor());
        if fs >= 1.0 {
            fs = 0.0;
        }
        if ft >= 1.0 {
            ft = 0.0;
        }
        self.rho1 * fs + self.rho2 * ft
    }

    fn scale(&self) -> f64 {
        self.w1.norm()
    }

    /// `(℘(z), ℘'(z))`; `z` must not be a lattice point.
    pub fn wp(&self, z: C64) -> (C64, C64) {
        let z = self.reduce(z);
        let k = PI / self.w1;
        let v = z * k;
        let [t1, t2, t3, t4] = theta_all(v, self.tau);
        let (a2, a3, a4) = (self.th2, self.th3, self.th4);
        let r = a2 * a3 * t4 / t1;
        let p = k * k * (r * r - (a2.powi(4) + a3.powi(4)) / 3.0);
        let a234 = a2 * a3 * a4;
        let dp = -2.0 * k * k * k * a234 * a234 * t2 * t3 * t4 / (t1 * t1 * t1);
        (p, dp)
    }

    /// `℘''(z) = 6℘² - g₂/2`.
    pub fn wp2(&self, p: C64) -> C64 {
        6.0 * p * p - self.g2 * 0.5
    }

    pub fn invariants(&self) -> (C64, C64) {
        (self.g2, self.g3)
    }

    pub fn exp(&self, z: C64) -> CurvePoint {
        let zr = self.reduce(z);
        if zr.norm() < LATTICE_SNAP * self.scale() {
            return CurvePoint::Infinity;
        }
        let (p, dp) = self.wp(zr);
        CurvePoint::Affine {
            x: p + (1.0 + self.lambda) / 3.0,
            y: dp * 0.5,
        }
    }

    /// Quasi-periods on the caller's basis.
    pub fn quasi_periods(&self) -> QuasiPeriods {
        // (w1, w2) = M (ρ1, ρ2)  =>  η(ρ) = M⁻¹ η(w)
        let [[a, b], [c, d]] = self.m;
        let det = (a * d - b * c) as f64;
        let (ew1, ew2) = (self.eta_w1, self.eta_w2);
        let eta1 = (ew1 * d as f64 - ew2 * b as f64) / det;
        let eta2 = (-ew1 * c as f64 + ew2 * a as f64) / det;
        QuasiPeriods { eta1, eta2 }
    }

    /// Coefficients `(a, b)` of the ℝ-linear map `η(z) = a z + b z̄` with `η(ρᵢ) = ηᵢ`.
    pub fn eta_linear(&self) -> (C64, f64) {
        let (w1, w2) = (self.w1, self.w2);
        let (e1, e2) = (self.eta_w1, self.eta_w2);
        let den = w1 * w2.conj() - w2 * w1.conj();
        let a = (e1 * w2.conj() - e2 * w1.conj()) / den;
        let b = (w1 * e2 - w2 * e1) / den;
        (a, b.re)
    }

    /// `Re(z·η(z))`, the potential of the Betti form along a fiber.
    pub fn potential(&self, z: C64) -> f64 {
        let (a, b) = self.eta_linear();
        (z * (a * z + b * z.conj())).re
    }

    /// Weierstrass `σ(z)`.
    pub fn sigma(&self, z: C64) -> C64 {
        let k = PI / self.w1;
        let v = z * k;
        let [t1, ..] = theta_all(v, self.tau);
        let d1 = self.th2 * self.th3 * self.th4;
        (self.eta_w1 * z * z / (2.0 * self.w1)).exp() * t1 / (d1 * k)
    }

    /// `log ‖s_Q‖² = log|σ(z)|² - Re(z η(z))`, a lattice-periodic function on the fiber with a
    /// logarithmic pole at `Q` and Laplacian equal to the Betti area form.
    pub fn log_norm_sq(&self, z: C64) -> f64 {
        let zr = self.reduce(z);
        let s = self.sigma(zr);
        2.0 * s.norm().ln() - self.potential(zr)
    }

    /// Half-periods `ω/2` matched to the 2-torsion points `P₁, P₂, P₃` in that order.
    pub fn half_periods(&self) -> [C64; 3] {
        let cands = [self.w1 * 0.5, self.w2 * 0.5, (self.w1 + self.w2) * 0.5];
        let s = (1.0 + self.lambda) / 3.0;
        let targets = [C64::new(0.0, 0.0), C64::new(1.0, 0.0), self.lambda];
        let xs: Vec<C64> = cands.iter().map(|&c| self.wp(c).0 + s).collect();
        let mut out = [C64::new(0.0, 0.0); 3];
        let mut used = [false; 3];
        for (i, t) in targets.iter().enumerate() {
            let mut best = 0;
            let mut bd = f64::INFINITY;
            for j in 0..3 {
                if !used[j] && (xs[j] - t).norm() < bd {
                    bd = (xs[j] - t).norm();
                    best = j;
                }
            }
            used[best] = true;
            out[i] = cands[best];
        }
        out
    }

    /// Elliptic logarithm of `p`, reduced to the fundamental parallelogram of `(ρ₁, ρ₂)`.
    pub fn log(&self, p: &CurvePoint) -> Result<C64> {
        let z = self.log_unreduced(p)?;
        Ok(self.to_parallelogram(z))
    }

    /// Elliptic logarithm near a known approximation `seed` (not reduced).
    pub fn log_near(&self, p: &CurvePoint, seed: C64) -> Result<C64> {
        if p.is_infinity() {
            let s = self.reduce(seed);
            return Ok(seed - s);
        }
        if let Some(z) = self.newton(p, seed) {
            return Ok(z);
        }
        let z = self.log_unreduced(p)?;
        // nearest lattice translate to the seed
        let d = self.reduce(seed - z);
        Ok(seed - d)
    }

    fn log_unreduced(&self, p: &CurvePoint) -> Result<C64> {
        let (x, y) = match *p {
            CurvePoint::Infinity => return Ok(C64::new(0.0, 0.0)),
            CurvePoint::Affine { x, y } => (x, y),
        };
        let lam = Lambda::new(self.lambda).map_err(|e| Error::numeric("elliptic log", e.to_string()))?;
        let halves = self.half_periods();
        let torsion = two_torsion_points(lam);
        let yscale = 1.0 + x.norm().powf(1.5);
        if y.norm() < 1e-14 * yscale {
            // a point of order two
            let mut best = 0;
            let mut bd = f64::INFINITY;
            for (i, t) in torsion.iter().enumerate() {
                let d = (t.x().unwrap() - x).norm();
                if d < bd {
                    bd = d;
                    best = i;
                }
            }
            return Ok(halves[best]);
        }
        // translate by the 2-torsion point that brings p closest to Q
        let mut reps = vec![(*p, C64::new(0.0, 0.0))];
        for (t, h) in torsion.iter().zip(halves.iter()) {
            reps.push((add(lam, p, t), *h));
        }
        let (rep, shift) = reps
            .iter()
            .copied()
            .max_by(|a, b| {
                let xa = a.0.x().map_or(f64::INFINITY, |v| v.norm());
                let xb = b.0.x().map_or(f64::INFINITY, |v| v.norm());
                xa.total_cmp(&xb)
            })
            .unwrap();
        let mut seeds = Vec::new();
        if let CurvePoint::Affine { x: rx, y: ry } = rep {
            seeds.push(-rx / ry);
            // -x/y ≈ z only near the origin; add coarse grid seeds as backup
        } else {
            return Ok(-shift);
        }
        let grid = 6;
        let mut cands: Vec<(f64, C64)> = Vec::new();
        for i in 0..grid {
            for j in 0..grid {
                let z = self.w1 * ((i as f64 + 0.5) / grid as f64 - 0.5)
                    + self.w2 * ((j as f64 + 0.5) / grid as f64 - 0.5);
                let q = self.exp(z);
                cands.push((q.chart_distance(&rep), z));
            }
        }
        cands.sort_by(|a, b| a.0.total_cmp(&b.0));
        seeds.extend(cands.iter().take(4).map(|c| c.1));
        for &s in &seeds {
            if let Some(z) = self.newton(&rep, s) {
                let z0 = z - shift;
                if let Some(zp) = self.newton(p, z0) {
                    return Ok(zp);
                }
                return Ok(z0);
            }
        }
        // quadrature of dx/(2y) from the best grid seed, then polish
        if let Some(z) = self.quadrature_log(&rep, cands[0].1) {
            let z0 = z - shift;
            if let Some(zp) = self.newton(p, z0) {
                return Ok(zp);
            }
        }
        Err(Error::numeric(
            "elliptic log",
            format!("Newton and quadrature failed for ({x}, {y}); seeds tried: {seeds:?}"),
        ))
    }

    /// Gauss–Newton on the point coordinates, in the chart `t = -x/y` near `Q`.
    fn newton(&self, p: &CurvePoint, seed: C64) -> Option<C64> {
        let (x, y) = match *p {
            CurvePoint::Infinity => return None,
            CurvePoint::Affine { x, y } => (x, y),
        };
        let s = (1.0 + self.lambda) / 3.0;
        let u = x - s;
        let w = 2.0 * y;
        let near_q = x.norm() > 1e2 * (1.0 + self.lambda.norm());
        let tp = -2.0 * u / w;
        let mut z = seed;
        let mut last_res = f64::INFINITY;
        for _ in 0..60 {
            if self.reduce(z).norm() < 1e-300 {
                return None;
            }
            let (pz, dpz) = self.wp(z);
            let ddp = self.wp2(pz);
            let (step, res) = if near_q {
                let t = -2.0 * pz / dpz;
                let dt = -2.0 + 2.0 * pz * ddp / (dpz * dpz);
                let r = tp - t;
                (r / dt, r.norm() / (1.0 + tp.norm()))
            } else {
                let r1 = u - pz;
                let r2 = w - dpz;
                let (a, b) = (dpz, ddp);
                let den = a.norm_sqr() + b.norm_sqr();
                let step = (a.conj() * r1 + b.conj() * r2) / den;
                let scale = 1.0 + u.norm() + w.norm();
                (step, (r1.norm() + r2.norm()) / scale)
            };
            if !step.re.is_finite() || !step.im.is_finite() {
                return None;
            }
            let limit = 0.25 * self.scale();
            let step = if step.norm() > limit { step * (limit / step.norm()) } else { step };
            z += step;
            if res < 1e-15 || step.norm() < 1e-15 * (1.0 + z.norm()) {
                let q = self.exp(z);
                return (q.chart_distance(p) < 1e-10).then_some(z);
            }
            if res > 10.0 * last_res && res > 1e-3 {
                return None;
            }
            last_res = last_res.min(res);
        }
        let q = self.exp(z);
        (q.chart_distance(p) < 1e-10).then_some(z)
    }

    /// `z₀ + ∫ dx/(2y)` along the straight x-segment from `exp(z₀)` to `p`, with `y` continued
    /// continuously from its value at `exp(z₀)`.
    fn quadrature_log(&self, p: &CurvePoint, z0: C64) -> Option<C64> {
        let (x1, y1) = match *p {
            CurvePoint::Affine { x, y } => (x, y),
            _ => return None,
        };
        let (x0, mut yprev) = match self.exp(z0) {
            CurvePoint::Affine { x, y } => (x, y),
            _ => return None,
        };
        let n = 4000;
        let mut z = z0;
        let dx = (x1 - x0) / n as f64;
        let branch = |x: C64, prev: C64| {
            let r = cubic(self.lambda, x).sqrt();
            if (r - prev).norm() <= (r + prev).norm() {
                r
            } else {
                -r
            }
        };
        for k in 0..n {
            let xa = x0 + dx * k as f64;
            let xm = xa + dx * 0.5;
            let xb = xa + dx;
            let ya = branch(xa, yprev);
            let ym = branch(xm, ya);
            let yb = branch(xb, ym);
            z += dx / 6.0 * (0.5 / ya + 2.0 / ym + 0.5 / yb);
            yprev = yb;
        }
        if (yprev + y1).norm() < (yprev - y1).norm() {
            return None;
        }
        z.re.is_finite().then_some(z)
    }
}

/// `E₂(τ) = 1 - 24 Σ n qⁿ/(1-qⁿ)` with `q = exp(2πiτ)`.
fn eisenstein_e2(tau: C64) -> C64 {
    let q = (2.0 * PI * I * tau).exp();
    let mut sum = C64::new(0.0, 0.0);
    let mut qn = C64::new(1.0, 0.0);
    for n in 1..200usize {
        qn *= q;
        let term = qn * n as f64 / (1.0 - qn);
        sum += term;
        if term.norm() < 1e-18 {
            break;
        }
    }
    1.0 - 24.0 * sum
}

pub fn elliptic_exp(lambda: Lambda, z: C64, basis: &PeriodBasis) -> Result<CurvePoint> {
    let lat = FiberLattice::new(lambda.value(), basis.rho1, basis.rho2)?;
    Ok(lat.exp(z))
}

pub fn elliptic_log(lambda: Lambda, p: &CurvePoint, basis: &PeriodBasis) -> Result<C64> {
    let lat = FiberLattice::new(lambda.value(), basis.rho1, basis.rho2)?;
    lat.log(p)
}

pub fn quasi_periods(lambda: Lambda, basis: &PeriodBasis) -> Result<QuasiPeriods> {
    let lat = FiberLattice::new(lambda.value(), basis.rho1, basis.rho2)?;
    Ok(lat.quasi_periods())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::periods::period_basis;

    fn setup(l: C64) -> (Lambda, PeriodBasis, FiberLattice) {
        let lam = Lambda::new(l).unwrap();
        let b = period_basis(lam, None).unwrap();
        let lat = FiberLattice::from_basis(&b).unwrap();
        (lam, b, lat)
    }

    #[test]
    fn membership_examples() {
        let lam = Lambda::real(3.0).unwrap();
        let zero = C64::new(0.0, 0.0);
        assert_eq!(on_curve(lam, &CurvePoint::affine(zero, zero)), (true, 0.0));
        assert!(on_curve(lam, &CurvePoint::Infinity).0);
        assert!(!on_curve(lam, &CurvePoint::affine(C64::new(2.0, 0.0), C64::new(1.0, 0.0))).0);
    }

    #[test]
    fn two_torsion_group_law() {
        let lam = Lambda::new(C64::new(0.3, 1.7)).unwrap();
        let [p1, p2, p3] = two_torsion_points(lam);
        assert!(add(lam, &p1, &p2).chart_distance(&p3) < 1e-15);
        assert_eq!(add(lam, &p1, &CurvePoint::Infinity), p1);
        assert!(mul_n(lam, 2, &p1).is_infinity());
    }

    #[test]
    fn invariants_match_the_shifted_cubic() {
        let l = C64::new(-0.7, 2.3);
        let (g2, g3) = weierstrass_invariants(l);
        let s = (1.0 + l) / 3.0;
        for u in [C64::new(0.3, 0.1), C64::new(-2.0, 1.0), C64::new(5.0, -4.0)] {
            let lhs = 4.0 * cubic(l, u + s);
            let rhs = 4.0 * u * u * u - g2 * u - g3;
            assert!((lhs - rhs).norm() < 1e-12 * (1.0 + lhs.norm()));
        }
    }

    #[test]
    fn exp_lands_on_curve_and_derivative_is_consistent() {
        let (lam, _, lat) = setup(C64::new(0.2, 0.6));
        let z = C64::new(0.37, 0.21);
        let p = lat.exp(z);
        assert!(on_curve(lam, &p).1 < 1e-12);
        let h = 1e-5;
        let fd = (lat.wp(z + h).0 - lat.wp(z - h).0) / (2.0 * h);
        assert!((fd - lat.wp(z).1).norm() < 1e-7 * fd.norm());
    }

    #[test]
    fn exp_is_periodic_and_zero_maps_to_q() {
        let (_, b, lat) = setup(C64::new(-3.0, 0.5));
        assert!(lat.exp(C64::new(0.0, 0.0)).is_infinity());
        assert!(lat.exp(b.rho1).is_infinity());
        assert!(lat.exp(b.rho2).is_infinity());
        let z = b.rho1 * 0.31 + b.rho2 * 0.77;
        let p = lat.exp(z);
        let q = lat.exp(z + b.rho1 * 2.0 - b.rho2 * 3.0);
        assert!(p.chart_distance(&q) < 1e-10);
    }

    #[test]
    fn half_period_is_two_torsion() {
        let (_, b, lat) = setup(C64::new(0.4, -0.3));
        match lat.exp(b.rho1 * 0.5) {
            CurvePoint::Affine { y, .. } => assert!(y.norm() < 1e-10),
            _ => panic!("half period mapped to Q"),
        }
    }

    #[test]
    fn log_round_trip() {
        let (_, b, lat) = setup(C64::new(2.5, -1.5));
        let z = b.rho1 * 0.3 + b.rho2 * 0.4;
        let p = lat.exp(z);
        let back = lat.log(&p).unwrap();
        assert!((back - z).norm() < 1e-10, "{back} vs {z}");
        assert_eq!(lat.log(&CurvePoint::Infinity).unwrap(), C64::new(0.0, 0.0));
    }

    #[test]
    fn log_of_torsion_point_is_half_period() {
        let (lam, b, lat) = setup(C64::new(0.6, 0.2));
        let p3 = two_torsion_points(lam)[2];
        let z = lat.log(&p3).unwrap();
        let (s, t) = lattice_coordinates(b.rho1, b.rho2, 2.0 * z);
        assert!((s - s.round()).abs() < 1e-10 && (t - t.round()).abs() < 1e-10);
    }

    #[test]
    fn log_near_torsion_points_keeps_precision() {
        let (_, b, lat) = setup(C64::new(0.6, 0.2));
        for h in [b.rho1 * 0.5, b.rho2 * 0.5, (b.rho1 + b.rho2) * 0.5] {
            let z = h + C64::new(1e-7, 3e-8);
            let back = lat.log(&lat.exp(z)).unwrap();
            let d = lat.reduce(back - z);
            assert!(d.norm() < 1e-12, "{d}");
        }
    }

    #[test]
    fn legendre_relation_holds() {
        for l in [C64::new(0.5, 0.0), C64::new(-4.0, 2.0), C64::new(0.01, 0.01)] {
            let (_, b, lat) = setup(l);
            let qp = lat.quasi_periods();
            let rel = qp.legendre_relation(b.rho1, b.rho2);
            assert!((rel - 2.0 * PI * I).norm() < 1e-10, "{l}: {rel}");
        }
    }

    #[test]
    fn quasi_periods_scale_with_degree_minus_one() {
        let (_, b, _) = setup(C64::new(0.3, 0.3));
        let c = C64::new(1.3, -0.4);
        let a = FiberLattice::new(C64::new(0.3, 0.3), b.rho1, b.rho2).unwrap().quasi_periods();
        let s = FiberLattice::new(C64::new(0.3, 0.3), b.rho1 * c, b.rho2 * c)
            .unwrap()
            .quasi_periods();
        assert!((s.eta1 - a.eta1 / c).norm() < 1e-12);
        assert!((s.eta2 - a.eta2 / c).norm() < 1e-12);
    }

    #[test]
    fn sigma_quasi_periodicity_and_periodic_norm() {
        let (_, b, lat) = setup(C64::new(-0.5, 0.8));
        let qp = lat.quasi_periods();
        let z = b.rho1 * 0.2 + b.rho2 * 0.35;
        for (w, eta) in [(b.rho1, qp.eta1), (b.rho2, qp.eta2)] {
            let lhs = lat.sigma(z + w);
            let rhs = -(eta * (z + w * 0.5)).exp() * lat.sigma(z);
            assert!((lhs - rhs).norm() < 1e-10 * rhs.norm());
        }
        let z0 = C64::new(1e-4, 2e-4);
        assert!((lat.sigma(z0) - z0).norm() < 1e-10);
        let a = lat.log_norm_sq(z);
        let c = lat.log_norm_sq(z + b.rho1 * 3.0 - b.rho2);
        assert!((a - c).abs() < 1e-10);
    }
}
