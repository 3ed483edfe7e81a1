//! Fundamental periods of the Legendre fibers `y^2 = x(x-1)(x-λ)`.
//!
//! The periods are those of the invariant differential `dx/(2y)`; the lattice they generate is
//! the kernel of the fiber exponential in [`crate::curve`]. Both periods solve the hypergeometric
//! (Picard–Fuchs) equation
//!
//! ```text
//! λ(1-λ) F'' + (1-2λ) F' - F/4 = 0,
//! ```
//!
//! so analytic continuation is done by stepping along a path and re-expanding the solution in a
//! Taylor series at every step, each step staying well inside the disk of convergence. The global
//! branch is fixed at `λ₀ = 1/2`, where `ρ₁ = π·F(1/2)` and `ρ₂ = i·ρ₁`, i.e. `τ = i`.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Base point of every continuation path.
pub const BASE_POINT: f64 = 0.5;
/// Radius of the automatic semicircular detours around `0` and `1`.
pub const DETOUR_RADIUS: f64 = 1e-2;
/// Base points closer than this to a puncture are rejected.
pub const PUNCTURE_EXCLUSION: f64 = 1e-6;
/// Relative truncation tolerance for every power series in this module.
pub const SERIES_TOL: f64 = 1e-12;

/// Taylor steps never exceed this fraction of the distance to the nearest puncture.
const STEP_FRACTION: f64 = 0.5;
/// Number of Taylor coefficients kept in a [`PeriodBasis`] for local evaluation.
const LOCAL_TERMS: usize = 64;
/// Local evaluation is trusted up to this fraction of the convergence radius.
const LOCAL_FRACTION: f64 = 0.5;

const I: C64 = C64::new(0.0, 1.0);

/// A point of the base `B = C \ {0, 1}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "C64", into = "C64")]
pub struct Lambda(C64);

impl Lambda {
    pub fn new(value: C64) -> Result<Self> {
        if !(value.re.is_finite() && value.im.is_finite()) {
            return Err(Error::Domain(format!("lambda = {value} is not finite")));
        }
        if value.norm() < PUNCTURE_EXCLUSION || (value - 1.0).norm() < PUNCTURE_EXCLUSION {
            return Err(Error::Domain(format!(
                "lambda = {value} lies within {PUNCTURE_EXCLUSION:e} of a puncture {{0, 1}}"
            )));
        }
        Ok(Lambda(value))
    }

    pub fn real(value: f64) -> Result<Self> {
        Self::new(C64::new(value, 0.0))
    }

    #[inline]
    pub fn value(self) -> C64 {
        self.0
    }
}

impl TryFrom<C64> for Lambda {
    type Error = Error;
    fn try_from(value: C64) -> Result<Self> {
        Lambda::new(value)
    }
}

impl From<Lambda> for C64 {
    fn from(l: Lambda) -> C64 {
        l.0
    }
}

#[inline]
pub(crate) fn puncture_distance(l: C64) -> f64 {
    l.norm().min((l - 1.0).norm())
}

/// Periods and their first derivatives in `λ` at a single point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodJet {
    pub rho1: C64,
    pub rho2: C64,
    pub drho1: C64,
    pub drho2: C64,
}

impl PeriodJet {
    pub fn tau(&self) -> C64 {
        self.rho2 / self.rho1
    }

    /// `Im(conj(ρ₁)·ρ₂)`, twice the lattice volume.
    pub fn covolume(&self) -> f64 {
        (self.rho1.conj() * self.rho2).im
    }

    /// Wronskian `ρ₁ρ₂' - ρ₂ρ₁'`, so that `dτ/dλ = W/ρ₁²`.
    pub fn wronskian(&self) -> C64 {
        self.rho1 * self.drho2 - self.rho2 * self.drho1
    }
}

/// A pair of fundamental periods at `base_lambda`, continued from `λ₀ = 1/2` along `path`.
///
/// The basis also carries the Taylor expansion of both periods around `base_lambda`, so nearby
/// fibers can be evaluated on the same branch with [`PeriodBasis::jet_at`].
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodBasis {
    pub rho1: C64,
    pub rho2: C64,
    pub tau: C64,
    pub base_lambda: Lambda,
    pub path: Vec<C64>,
    coeffs1: Vec<C64>,
    coeffs2: Vec<C64>,
    /// Coefficients are stored for the scaled variable `(λ - base)/scale`.
    scale: f64,
    radius: f64,
}

impl PeriodBasis {
    /// Builds a basis from explicit periods, e.g. for a synthetic lattice in tests.
    ///
    /// The result has no usable local expansion (`jet_at` only accepts `base_lambda` itself).
    pub fn from_periods(lambda: Lambda, rho1: C64, rho2: C64) -> Result<Self> {
        if rho1.norm() == 0.0 {
            return Err(Error::numeric("period basis", "rho1 = 0"));
        }
        let tau = rho2 / rho1;
        if tau.im <= 0.0 {
            return Err(Error::numeric(
                "period basis",
                format!("Im(tau) = {} is not positive", tau.im),
            ));
        }
        Ok(PeriodBasis {
            rho1,
            rho2,
            tau,
            base_lambda: lambda,
            path: vec![lambda.value()],
            coeffs1: vec![rho1],
            coeffs2: vec![rho2],
            scale: 1.0,
            radius: 0.0,
        })
    }

    fn from_state(lambda: Lambda, state: State, path: Vec<C64>) -> Self {
        let c = lambda.value();
        let scale = puncture_distance(c);
        let coeffs1 = taylor_coefficients(c, state.f1, state.d1, scale, LOCAL_TERMS);
        let coeffs2 = taylor_coefficients(c, state.f2, state.d2, scale, LOCAL_TERMS);
        PeriodBasis {
            rho1: state.f1,
            rho2: state.f2,
            tau: state.f2 / state.f1,
            base_lambda: lambda,
            path,
            coeffs1,
            coeffs2,
            scale,
            radius: LOCAL_FRACTION * puncture_distance(c),
        }
    }

    /// Radius of the disk around `base_lambda` on which [`jet_at`](Self::jet_at) is valid.
    pub fn local_radius(&self) -> f64 {
        self.radius
    }

    pub fn jet(&self) -> PeriodJet {
        PeriodJet {
            rho1: self.rho1,
            rho2: self.rho2,
            drho1: self.coeffs1.get(1).copied().unwrap_or_default() / self.scale,
            drho2: self.coeffs2.get(1).copied().unwrap_or_default() / self.scale,
        }
    }

    /// Periods and derivatives at `lambda` on this basis' branch, from the local expansion.
    pub fn jet_at(&self, lambda: C64) -> Result<PeriodJet> {
        let t = lambda - self.base_lambda.value();
        if t.norm() == 0.0 {
            return Ok(self.jet());
        }
        if t.norm() > self.radius {
            return Err(Error::Path(format!(
                "lambda = {lambda} is outside the local disk of radius {:.3e} around {}",
                self.radius,
                self.base_lambda.value()
            )));
        }
        let u = t / self.scale;
        let (rho1, drho1) = eval_series(&self.coeffs1, u);
        let (rho2, drho2) = eval_series(&self.coeffs2, u);
        Ok(PeriodJet {
            rho1,
            rho2,
            drho1: drho1 / self.scale,
            drho2: drho2 / self.scale,
        })
    }

    /// Continues this basis along the straight segment to `lambda` (with puncture detours).
    pub fn continued_to(&self, lambda: Lambda) -> Result<PeriodBasis> {
        let start = self.base_lambda.value();
        let target = lambda.value();
        let mut path = self.path.clone();
        let leg = detoured_segment(start, target);
        let state = State {
            f1: self.rho1,
            d1: self.jet().drho1,
            f2: self.rho2,
            d2: self.jet().drho2,
        };
        let state = continue_polyline(&leg, state)?;
        path.extend_from_slice(&leg[1..]);
        Ok(PeriodBasis::from_state(lambda, state, path))
    }

    /// A basis at `lambda` on this branch, re-expanded there.
    ///
    /// Uses a single Taylor step when `lambda` is inside the local disk.
    pub fn recentered(&self, lambda: Lambda) -> Result<PeriodBasis> {
        let t = lambda.value() - self.base_lambda.value();
        if t.norm() <= self.radius && self.coeffs1.len() > 2 {
            let jet = self.jet_at(lambda.value())?;
            let mut path = self.path.clone();
            path.push(lambda.value());
            let state = State {
                f1: jet.rho1,
                d1: jet.drho1,
                f2: jet.rho2,
                d2: jet.drho2,
            };
            return Ok(PeriodBasis::from_state(lambda, state, path));
        }
        self.continued_to(lambda)
    }

    pub fn covolume(&self) -> f64 {
        (self.rho1.conj() * self.rho2).im
    }
}

/// Lattice volume `V = Im(τ)|ρ₁|²/2` and fiber height `1/V`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeVolume {
    pub volume: f64,
    pub fiber_height: f64,
}

pub fn lattice_volume(basis: &PeriodBasis) -> LatticeVolume {
    let volume = basis.tau.im * basis.rho1.norm_sqr() / 2.0;
    LatticeVolume {
        volume,
        fiber_height: 1.0 / volume,
    }
}

#[derive(Debug, Clone, Copy)]
struct State {
    f1: C64,
    d1: C64,
    f2: C64,
    d2: C64,
}

/// `F(λ) = ₂F₁(1/2, 1/2; 1; λ)` and `F'(λ)` for `|λ| < 1`.
pub fn hypergeometric(lambda: C64) -> Result<(C64, C64)> {
    if lambda.norm() >= 1.0 {
        return Err(Error::numeric(
            "hypergeometric series",
            format!("|lambda| = {} is outside the unit disk", lambda.norm()),
        ));
    }
    let mut coeff = 1.0_f64;
    let mut power = C64::new(1.0, 0.0);
    let mut value = C64::new(0.0, 0.0);
    let mut deriv = C64::new(0.0, 0.0);
    for n in 0..20_000usize {
        let term = power * coeff;
        value += term;
        // d/dλ of c_{n+1} λ^{n+1}
        let next = coeff * ((n as f64 + 0.5) / (n as f64 + 1.0)).powi(2);
        let dterm = power * next * (n as f64 + 1.0);
        deriv += dterm;
        if n > 4
            && term.norm() < 1e-4 * SERIES_TOL * value.norm()
            && dterm.norm() < 1e-4 * SERIES_TOL * deriv.norm()
        {
            return Ok((value, deriv));
        }
        coeff = next;
        power *= lambda;
    }
    Err(Error::numeric(
        "hypergeometric series",
        format!("no convergence at lambda = {lambda}"),
    ))
}

/// The period series with coefficients `C(1/2, n)²`, exactly as the classical Gauss-series
/// formula is sometimes printed:
///
/// `ρ₁ = π Σ C(1/2,n)² λⁿ`, `ρ₂ = iπ Σ C(1/2,n)² (1-λ)ⁿ`.
///
/// These coefficients agree with `((1/2)ₙ/n!)²` only for `n ≤ 1`; the sums are *not* periods of
/// the Legendre fiber. Kept for comparison against [`classical_series`].
pub fn gauss_series(lambda: C64) -> Result<(C64, C64)> {
    let series = |t: C64| -> Result<C64> {
        if t.norm() >= 1.0 {
            return Err(Error::numeric(
                "binomial period series",
                format!("|{t}| >= 1"),
            ));
        }
        let mut binom = 1.0_f64;
        let mut power = C64::new(1.0, 0.0);
        let mut sum = C64::new(0.0, 0.0);
        for n in 0..20_000usize {
            let term = power * (binom * binom);
            sum += term;
            if n > 4 && term.norm() < 1e-4 * SERIES_TOL * sum.norm() {
                return Ok(sum);
            }
            binom *= (0.5 - n as f64) / (n as f64 + 1.0);
            power *= t;
        }
        Err(Error::numeric("binomial period series", "no convergence"))
    };
    Ok((PI * series(lambda)?, I * PI * series(1.0 - lambda)?))
}

/// Periods from the hypergeometric series: `ρ₁ = π F(λ)`, `ρ₂ = iπ F(1-λ)`.
///
/// Valid on `|λ| < 1`, `|1-λ| < 1`, where it agrees with continuation along the straight path.
pub fn classical_series(lambda: C64) -> Result<(C64, C64)> {
    let (f, _) = hypergeometric(lambda)?;
    let (g, _) = hypergeometric(1.0 - lambda)?;
    Ok((PI * f, I * PI * g))
}

fn base_state() -> State {
    let (f, df) = hypergeometric(C64::new(BASE_POINT, 0.0)).expect("series converges at 1/2");
    State {
        f1: PI * f,
        d1: PI * df,
        f2: I * PI * f,
        d2: -I * PI * df,
    }
}

/// Taylor coefficients `aₙsⁿ` at `c` of the solution with value `f0` and derivative `f1`.
fn taylor_coefficients(c: C64, f0: C64, f1: C64, s: f64, n_terms: usize) -> Vec<C64> {
    let p0 = c * (1.0 - c);
    let p1 = 1.0 - 2.0 * c;
    let mut a = Vec::with_capacity(n_terms.max(2));
    a.push(f0);
    a.push(f1 * s);
    for n in 0..n_terms.saturating_sub(2) {
        let nf = n as f64;
        let next = ((nf + 0.5).powi(2) * a[n] * (s * s) - p1 * (nf + 1.0).powi(2) * a[n + 1] * s)
            / (p0 * (nf + 1.0) * (nf + 2.0));
        a.push(next);
    }
    a
}

fn eval_series(coeffs: &[C64], t: C64) -> (C64, C64) {
    let mut value = C64::new(0.0, 0.0);
    let mut deriv = C64::new(0.0, 0.0);
    for (k, &a) in coeffs.iter().enumerate().rev() {
        value = value * t + a;
        if k > 0 {
            deriv = deriv * t + a * k as f64;
        }
    }
    (value, deriv)
}

/// One Taylor step of length `t` from `c`, with adaptive truncation.
fn taylor_step(c: C64, state: State, t: C64) -> Result<State> {
    let p0 = c * (1.0 - c);
    let p1 = 1.0 - 2.0 * c;
    let step = |f0: C64, f1: C64| -> Result<(C64, C64)> {
        // scaled terms b_n = a_n t^n
        let mut b_prev = f0;
        let mut b_cur = f1 * t;
        let mut value = f0 + b_cur;
        let mut dsum = b_cur;
        let mut small = 0;
        for n in 0..400usize {
            let nf = n as f64;
            let b_next = ((nf + 0.5).powi(2) * b_prev * (t * t) - p1 * (nf + 1.0).powi(2) * b_cur * t)
                / (p0 * (nf + 1.0) * (nf + 2.0));
            let k = (n + 2) as f64;
            value += b_next;
            dsum += b_next * k;
            if b_next.norm() * k <= 1e-6 * SERIES_TOL * (value.norm() + dsum.norm()) {
                small += 1;
                if small >= 3 {
                    return Ok((value, dsum / t));
                }
            } else {
                small = 0;
            }
            b_prev = b_cur;
            b_cur = b_next;
        }
        Err(Error::numeric(
            "period continuation",
            format!("Taylor step from {c} by {t} did not converge"),
        ))
    };
    let (f1, d1) = step(state.f1, state.d1)?;
    let (f2, d2) = step(state.f2, state.d2)?;
    Ok(State { f1, d1, f2, d2 })
}

fn continue_polyline(path: &[C64], mut state: State) -> Result<State> {
    for w in path.windows(2) {
        let (a, b) = (w[0], w[1]);
        check_segment(a, b)?;
        let mut pos = a;
        let mut guard = 0usize;
        while (b - pos).norm() > 0.0 {
            let d = puncture_distance(pos);
            let remaining = b - pos;
            let len = remaining.norm();
            let h = (STEP_FRACTION * d).min(len);
            let t = if h >= len { remaining } else { remaining * (h / len) };
            state = taylor_step(pos, state, t)?;
            pos = if h >= len { b } else { pos + t };
            guard += 1;
            if guard > 100_000 {
                return Err(Error::numeric(
                    "period continuation",
                    format!("too many steps on segment {a} -> {b}"),
                ));
            }
        }
    }
    Ok(state)
}

fn segment_distance(a: C64, b: C64, p: C64) -> (f64, f64) {
    let ab = b - a;
    let len2 = ab.norm_sqr();
    if len2 == 0.0 {
        return ((p - a).norm(), 0.0);
    }
    let s = ((p - a) * ab.conj()).re / len2;
    let s_clamped = s.clamp(0.0, 1.0);
    ((a + ab * s_clamped - p).norm(), s)
}

fn check_segment(a: C64, b: C64) -> Result<()> {
    for p in [C64::new(0.0, 0.0), C64::new(1.0, 0.0)] {
        let (d, _) = segment_distance(a, b, p);
        if d < 1e-9 {
            return Err(Error::Path(format!(
                "segment {a} -> {b} passes through the puncture {}",
                p.re
            )));
        }
    }
    Ok(())
}

/// Straight segment from `a` to `b`, replacing the part inside the disk of radius
/// [`DETOUR_RADIUS`] around a puncture with a semicircle.
///
/// The detour passes on the left of the direction of travel when the segment hits the puncture
/// head-on, and on the far side of the puncture otherwise.
pub(crate) fn detoured_segment(a: C64, b: C64) -> Vec<C64> {
    let mut crossings: Vec<(f64, C64, f64)> = Vec::new();
    let ab = b - a;
    let len = ab.norm();
    if len == 0.0 {
        return vec![a, b];
    }
    let u = ab / len;
    for p in [C64::new(0.0, 0.0), C64::new(1.0, 0.0)] {
        let (d, s) = segment_distance(a, b, p);
        let r = DETOUR_RADIUS
            .min(0.5 * (a - p).norm())
            .min(0.5 * (b - p).norm());
        if d < r && s > 0.0 && s < 1.0 {
            crossings.push((s, p, r));
        }
    }
    crossings.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut out = vec![a];
    for (s, p, r) in crossings {
        let foot = a + ab * s;
        let off = foot - p;
        let d = off.norm();
        let half = (r * r - d * d).max(0.0).sqrt();
        let entry = foot - u * half;
        let exit = foot + u * half;
        // side of the arc: away from the puncture, or to the left when head-on
        let normal = if d > 1e-14 { off / d } else { u * I };
        let ang_in = (entry - p).arg();
        let ang_out = (exit - p).arg();
        let mid_dir = normal.arg();
        // sweep from ang_in to ang_out through mid_dir
        let mut sweep = ang_out - ang_in;
        let through = |sw: f64| {
            let rel = (mid_dir - ang_in).rem_euclid(2.0 * PI);
            if sw >= 0.0 {
                rel <= sw
            } else {
                rel >= 2.0 * PI + sw
            }
        };
        sweep = sweep.rem_euclid(2.0 * PI);
        if !through(sweep) {
            sweep -= 2.0 * PI;
        }
        out.push(entry);
        let n = 16;
        for k in 1..n {
            let ang = ang_in + sweep * k as f64 / n as f64;
            out.push(p + C64::from_polar(r, ang));
        }
        out.push(exit);
    }
    out.push(b);
    out
}

/// The default continuation path: straight segment from `1/2` with puncture detours.
pub fn default_path(lambda: Lambda) -> Vec<C64> {
    detoured_segment(C64::new(BASE_POINT, 0.0), lambda.value())
}

/// Fundamental periods at `lambda`, continued along `path` (or [`default_path`]).
pub fn period_basis(lambda: Lambda, path: Option<&[C64]>) -> Result<PeriodBasis> {
    let owned;
    let path = match path {
        Some(p) => {
            validate_path(lambda, p)?;
            p
        }
        None => {
            owned = default_path(lambda);
            &owned
        }
    };
    let state = continue_polyline(path, base_state())?;
    let basis = PeriodBasis::from_state(lambda, state, path.to_vec());
    if !(basis.tau.im > 0.0) || !basis.tau.re.is_finite() {
        return Err(Error::numeric(
            "period basis",
            format!("continued modulus tau = {} is not in the upper half plane", basis.tau),
        ));
    }
    Ok(basis)
}

fn validate_path(lambda: Lambda, path: &[C64]) -> Result<()> {
    let (first, last) = match (path.first(), path.last()) {
        (Some(f), Some(l)) if path.len() >= 2 => (*f, *l),
        _ => return Err(Error::Path("a path needs at least two points".into())),
    };
    if (first - BASE_POINT).norm() > 1e-12 {
        return Err(Error::Path(format!(
            "path starts at {first}, not at the base point 1/2"
        )));
    }
    if (last - lambda.value()).norm() > 1e-12 * (1.0 + lambda.value().norm()) {
        return Err(Error::Path(format!(
            "path ends at {last}, not at lambda = {}",
            lambda.value()
        )));
    }
    for w in path.windows(2) {
        check_segment(w[0], w[1])?;
    }
    Ok(())
}

/// Arithmetic–geometric mean with the optimal sign choice at every step.
pub fn agm(a: C64, b: C64) -> Result<C64> {
    let (mut a, mut b) = (a, b);
    for _ in 0..200 {
        if (a - b).norm() <= 4.0 * f64::EPSILON * a.norm() {
            return Ok(a);
        }
        let a1 = (a + b) * 0.5;
        let mut b1 = (a * b).sqrt();
        if (a1 - b1).norm() > (a1 + b1).norm() {
            b1 = -b1;
        }
        a = a1;
        b = b1;
    }
    Err(Error::numeric(
        "AGM",
        format!("no convergence for ({a}, {b})"),
    ))
}

/// A locally computed lattice basis from the AGM, independent of continuation:
/// `(π/M(1, √(1-λ)), iπ/M(1, √λ))`, oriented so that `Im τ > 0`.
pub fn agm_lattice(lambda: Lambda) -> Result<(C64, C64)> {
    let l = lambda.value();
    let w1 = PI / agm(C64::new(1.0, 0.0), (1.0 - l).sqrt())?;
    let w2 = I * PI / agm(C64::new(1.0, 0.0), l.sqrt())?;
    if (w2 / w1).im > 0.0 {
        Ok((w1, w2))
    } else {
        Ok((w1, -w2))
    }
}

/// Real coordinates `(s, t)` of `v = s·ω₁ + t·ω₂`.
pub fn lattice_coordinates(w1: C64, w2: C64, v: C64) -> (f64, f64) {
    let det = w1.re * w2.im - w2.re * w1.im;
    let s = (v.re * w2.im - w2.re * v.im) / det;
    let t = (w1.re * v.im - v.re * w1.im) / det;
    (s, t)
}

/// If `(b1, b2)` generates the same lattice as `(a1, a2)` up to `tol` (in lattice coordinates),
/// returns the integer matrix `M` with `(b1, b2) = M·(a1, a2)`.
pub fn same_lattice(a: (C64, C64), b: (C64, C64), tol: f64) -> Option<[[i64; 2]; 2]> {
    let mut m = [[0i64; 2]; 2];
    for (row, v) in [b.0, b.1].into_iter().enumerate() {
        let (s, t) = lattice_coordinates(a.0, a.1, v);
        let (si, ti) = (s.round(), t.round());
        if (s - si).abs() > tol || (t - ti).abs() > tol {
            return None;
        }
        m[row] = [si as i64, ti as i64];
    }
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    (det.abs() == 1).then_some(m)
}

/// Least-squares fit of `λ ≈ c₁ q + c₂ q²`, `q = exp(iπτ(λ))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QExpansionFit {
    pub c1: C64,
    pub c2: C64,
    /// Largest `|λ - c₁q - c₂q²|` over the samples.
    pub max_residual: f64,
    /// Largest `|q|³` over the samples, the expected residual scale.
    pub max_q_cubed: f64,
}

pub fn q_expansion_check(samples: &[C64]) -> Result<QExpansionFit> {
    if samples.len() < 2 {
        return Err(Error::numeric(
            "q-expansion fit",
            "need at least two samples",
        ));
    }
    if let Some(s) = samples.iter().find(|s| s.norm() > 0.1) {
        return Err(Error::numeric(
            "q-expansion fit",
            format!("sample {s} is too large for a two-term fit"),
        ));
    }
    let mut rows = Vec::with_capacity(samples.len());
    for &s in samples {
        let lambda = Lambda::new(s)?;
        let basis = period_basis(lambda, None)?;
        let q = (I * PI * basis.tau).exp();
        rows.push((q, s));
    }
    // normal equations of the complex least-squares problem
    let (mut a11, mut a12, mut a22) = (0.0, C64::new(0.0, 0.0), 0.0);
    let (mut b1, mut b2) = (C64::new(0.0, 0.0), C64::new(0.0, 0.0));
    for &(q, l) in &rows {
        let q2 = q * q;
        a11 += q.norm_sqr();
        a12 += q.conj() * q2;
        a22 += q2.norm_sqr();
        b1 += q.conj() * l;
        b2 += q2.conj() * l;
    }
    let det = a11 * a22 - a12.norm_sqr();
    if det.abs() <= 1e-14 * a11 * a22 {
        return Err(Error::numeric(
            "q-expansion fit",
            "samples are too few or too similar for a stable fit",
        ));
    }
    let c1 = (b1 * a22 - a12 * b2) / det;
    let c2 = (b2 * a11 - a12.conj() * b1) / det;
    let mut max_residual: f64 = 0.0;
    let mut max_q_cubed: f64 = 0.0;
    for &(q, l) in &rows {
        max_residual = max_residual.max((l - c1 * q - c2 * q * q).norm());
        max_q_cubed = max_q_cubed.max(q.norm().powi(3));
    }
    Ok(QExpansionFit {
        c1,
        c2,
        max_residual,
        max_q_cubed,
    })
}
