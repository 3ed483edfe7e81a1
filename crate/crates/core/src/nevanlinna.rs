//! Order, counting and proximity functions of sections over exhausted regions of the base.
//!
//! Two exhaustions are supported: annuli `r₀ < |λ| < r` around `∞` and sublevel sets of
//! `|ξ(λ)|` for a rational function `ξ` with poles at `0, 1, ∞`.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::betti::{density_holomorphic_at, lie_derivative, stencil_limit, LocalFrame};
use crate::counting::{localize, BettiTracer, BoundaryConfig};
use crate::curve::{CurvePoint, FiberLattice};
use crate::error::{Error, Result};
use crate::periods::{lattice_coordinates, period_basis, Lambda, PeriodBasis};
use crate::quad::{domain_cells, Cell, Chart, GaussLegendre, Integrator, QuadConfig};
use crate::sections::{SectionSpec, Side, TorsionName};

const LOCAL_CELL_FRACTION: f64 = 0.3;

/// Relative noise of the stencil derivative of `x(σ(λ))`; tighter tolerances never converge.
pub const FS_REL_TOL_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExhaustionMode {
    PuncturedDisk,
    AffineCurve,
}

/// `num(λ)/den(λ)` with ascending coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RationalMap {
    pub num: Vec<C64>,
    pub den: Vec<C64>,
}

fn horner(c: &[C64], l: C64) -> C64 {
    c.iter().rev().fold(C64::new(0.0, 0.0), |acc, &a| acc * l + a)
}

fn degree(c: &[C64]) -> Option<usize> {
    c.iter().rposition(|a| a.norm() > 0.0)
}

/// Divides by `λ - root` when it is a root, returning the quotient.
fn deflate(c: &[C64], root: C64) -> Option<Vec<C64>> {
    let d = degree(c)?;
    if d == 0 {
        return None;
    }
    let scale = c.iter().map(|a| a.norm()).fold(0.0, f64::max);
    if horner(c, root).norm() > 1e-12 * scale * (1.0 + root.norm()).powi(d as i32) {
        return None;
    }
    let mut q = vec![C64::new(0.0, 0.0); d];
    let mut carry = c[d];
    for k in (0..d).rev() {
        q[k] = carry;
        carry = c[k] + carry * root;
    }
    Some(q)
}

impl RationalMap {
    /// `ξ(λ) = λ + 1/(λ(λ-1))`.
    pub fn legendre_xi() -> Self {
        let c = |x: f64| C64::new(x, 0.0);
        RationalMap {
            num: vec![c(1.0), c(0.0), c(-1.0), c(1.0)],
            den: vec![c(0.0), c(-1.0), c(1.0)],
        }
    }

    pub fn eval(&self, l: C64) -> C64 {
        horner(&self.num, l) / horner(&self.den, l)
    }

    /// Checks that the poles are exactly `{0, 1, ∞}`.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Input(format!("exhaustion function: {m}")));
        let (Some(dn), Some(_)) = (degree(&self.num), degree(&self.den)) else {
            return bad("numerator and denominator must be nonzero");
        };
        let mut rest = self.den.clone();
        let mut seen = [false, false];
        loop {
            if let Some(q) = deflate(&rest, C64::new(0.0, 0.0)) {
                rest = q;
                seen[0] = true;
            } else if let Some(q) = deflate(&rest, C64::new(1.0, 0.0)) {
                rest = q;
                seen[1] = true;
            } else {
                break;
            }
        }
        if degree(&rest) != Some(0) || !seen[0] || !seen[1] {
            return bad("denominator must vanish exactly at 0 and 1");
        }
        for p in [0.0, 1.0] {
            if horner(&self.num, C64::new(p, 0.0)).norm() < 1e-12 {
                return bad("numerator vanishes at a puncture");
            }
        }
        if dn <= degree(&self.den).unwrap() {
            return bad("no pole at infinity");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExhaustionConfig {
    pub mode: ExhaustionMode,
    pub r0: f64,
    pub xi: Option<RationalMap>,
    pub quad: QuadConfig,
    /// Largest radial extent of a cell in `log |λ|`.
    pub max_ds: f64,
    /// Angular cells per half plane.
    pub t_pieces: usize,
    /// Boundary sampling for intersection counting.
    pub boundary: BoundaryConfig,
}

impl Default for ExhaustionConfig {
    fn default() -> Self {
        ExhaustionConfig::punctured_disk(2.0)
    }
}

impl ExhaustionConfig {
    pub fn punctured_disk(r0: f64) -> Self {
        ExhaustionConfig {
            mode: ExhaustionMode::PuncturedDisk,
            r0,
            xi: None,
            quad: QuadConfig {
                order: 6,
                abs_tol: 1e-9,
                rel_tol: 1e-11,
                max_depth: 10,
            },
            max_ds: 0.25,
            t_pieces: 8,
            boundary: BoundaryConfig {
                max_step: 0.2,
                max_dev: 1e-3,
                initial_per_edge: 8,
                max_depth: 30,
            },
        }
    }

    pub fn affine_curve(r0: f64) -> Self {
        ExhaustionConfig {
            mode: ExhaustionMode::AffineCurve,
            xi: Some(RationalMap::legendre_xi()),
            max_ds: 0.5,
            t_pieces: 4,
            ..ExhaustionConfig::punctured_disk(r0)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r0 > 1.0 && self.r0.is_finite()) {
            return Err(Error::Input(format!("r0 = {} must exceed 1", self.r0)));
        }
        match (self.mode, &self.xi) {
            (ExhaustionMode::AffineCurve, Some(xi)) => xi.validate(),
            (ExhaustionMode::AffineCurve, None) => Err(Error::Input("affine exhaustion needs xi".into())),
            _ => Ok(()),
        }
    }

    /// The exhaustion function: `|λ|` or `|ξ(λ)|`.
    pub fn exhaustion(&self, l: C64) -> f64 {
        match (&self.mode, &self.xi) {
            (ExhaustionMode::AffineCurve, Some(xi)) => xi.eval(l).norm(),
            _ => l.norm(),
        }
    }
}

/// Hermitian forms whose pullbacks define order functions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OrderMetric {
    /// The Betti form; semi-positive, with Chern potential the Néron function.
    BettiOmega,
    /// `dd^c log(1 + |x/a|²)` on the `x`-line, `a = scale`.
    FubiniStudyOnX { scale: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Divisor {
    ZeroSectionQ,
    TorsionTranslate { point: TorsionName },
    XEquals { c: C64 },
}

/// Hermitian metric on the line bundle of a divisor, for proximity functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProximityMetric {
    /// `log ‖s_Q‖² = log|σ(z)|² - Re(z η(z))`; curvature is the Betti form.
    Neron,
    /// `‖s‖² = 1/(1+|x|²)` for `Q`, chordal distance `|x-c|²/((1+|x|²)(1+|c|²))` for `x = c`.
    FubiniStudy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SeriesKind {
    Order,
    Counting,
    TruncatedCounting { k: u32 },
    Proximity,
    HeightChar,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharacteristicSeries {
    pub r_values: Vec<f64>,
    pub values: Vec<f64>,
    pub kind: SeriesKind,
    pub quad_error: Vec<f64>,
}

impl CharacteristicSeries {
    pub fn is_nondecreasing(&self) -> bool {
        self.values.windows(2).all(|w| w[1] >= w[0])
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("r,value,quad_error\n");
        for ((r, v), e) in self.r_values.iter().zip(&self.values).zip(&self.quad_error) {
            out.push_str(&format!("{r:.12e},{v:.12e},{e:.3e}\n"));
        }
        out
    }
}

fn zero_series(r_values: &[f64], kind: SeriesKind) -> CharacteristicSeries {
    CharacteristicSeries {
        r_values: r_values.to_vec(),
        values: vec![0.0; r_values.len()],
        kind,
        quad_error: vec![0.0; r_values.len()],
    }
}

fn check_r_values(exh: &ExhaustionConfig, r_values: &[f64]) -> Result<()> {
    exh.validate()?;
    if r_values.is_empty() {
        return Err(Error::Input("no radii given".into()));
    }
    if r_values.windows(2).any(|w| w[1] <= w[0]) || r_values[0] <= exh.r0 {
        return Err(Error::Input(format!(
            "radii must increase and exceed r0 = {}",
            exh.r0
        )));
    }
    Ok(())
}

fn side_of(cell: &Cell) -> Side {
    if cell.upper() {
        Side::Upper
    } else {
        Side::Lower
    }
}

/// Angular offsets of the polar grid, as fractions of a cell, tried in turn when a divisor point
/// lands on a cell boundary.
pub const GRID_PHASES: [f64; 3] = [0.381966, 0.127, 0.713];

/// Polar cells of the annuli between consecutive radii, tagged by annulus index; the angular
/// grid is rotated by `phase` cells.
pub fn annulus_cells(radii: &[f64], max_ds: f64, t_pieces: usize, phase: f64) -> Vec<(usize, Cell)> {
    let mut out = Vec::new();
    let tp = 2 * t_pieces.max(1);
    for (i, w) in radii.windows(2).enumerate() {
        let (a, b) = (w[0].ln(), w[1].ln());
        let m = ((b - a) / max_ds).ceil().max(1.0) as usize;
        for k in 0..m {
            let s0 = a + (b - a) * k as f64 / m as f64;
            let s1 = a + (b - a) * (k + 1) as f64 / m as f64;
            for j in 0..tp {
                out.push((
                    i,
                    Cell {
                        chart: Chart::Polar,
                        s0,
                        s1,
                        t0: (j as f64 + phase) / tp as f64,
                        t1: (j as f64 + 1.0 + phase) / tp as f64,
                    },
                ));
            }
        }
    }
    localize(out, LOCAL_CELL_FRACTION)
}

/// Cells covering `{lo < e(λ) < hi}` for the affine exhaustion, tagged 0.
fn affine_cells(exh: &ExhaustionConfig, hi: f64) -> Vec<(usize, Cell)> {
    // |ξ| ≈ 1/|λ| near 0 and 1, ≈ |λ| near ∞
    let delta = (0.25 / (hi + 2.0)).max(2e-6);
    let cells = domain_cells(&[delta], exh.max_ds, exh.t_pieces);
    localize(cells, LOCAL_CELL_FRACTION)
}

fn betti_density(spec: &SectionSpec) -> impl Fn(&Cell, &[C64]) -> Result<Vec<f64>> + '_ {
    move |cell: &Cell, pts: &[C64]| {
        let basis = period_basis(Lambda::new(cell.center())?, None)?;
        let side = side_of(cell);
        let mut seed = None;
        pts.iter()
            .map(|&l| {
                if let Some((z, dz)) = spec.closed_form_lie(l) {
                    let jet = basis.jet_at(l)?;
                    let (b1, b2) = lattice_coordinates(jet.rho1, jet.rho2, z);
                    let w = dz - jet.drho1 * b1 - jet.drho2 * b2;
                    return Ok(w.norm_sqr() / jet.covolume());
                }
                let (d, z) = density_holomorphic_at(spec, &basis, l, side, seed)?;
                seed = Some(z);
                Ok(d)
            })
            .collect()
    }
}

/// `x(σ(λ))` or `1/x` when `|x| > 1`, with the flag telling which.
fn x_chart(spec: &SectionSpec, basis: &PeriodBasis, l: C64, side: Side) -> Result<(C64, bool)> {
    let frame = LocalFrame::new(basis, l)?;
    Ok(match spec.evaluate_on(frame.lambda, &frame.lattice, side)? {
        CurvePoint::Infinity => (C64::new(0.0, 0.0), true),
        CurvePoint::Affine { x, .. } => {
            if x.norm() > 1.0 {
                (x.inv(), true)
            } else {
                (x, false)
            }
        }
    })
}

pub fn fs_density(spec: &SectionSpec, scale: f64) -> impl Fn(&Cell, &[C64]) -> Result<Vec<f64>> + '_ {
    move |cell: &Cell, pts: &[C64]| {
        let basis = period_basis(Lambda::new(cell.center())?, None)?;
        let side = side_of(cell);
        pts.iter()
            .map(|&l| {
                let (w0, inv) = x_chart(spec, &basis, l, side)?;
                let h = (1e-4 * (1.0 + l.norm()))
                    .min(0.25 * stencil_limit(spec, l))
                    .min(0.25 * basis.local_radius());
                let mut f = [C64::new(0.0, 0.0); 4];
                let offs = [C64::new(h, 0.0), C64::new(-h, 0.0), C64::new(0.0, h), C64::new(0.0, -h)];
                for (k, d) in offs.iter().enumerate() {
                    let frame = LocalFrame::new(&basis, l + d)?;
                    let p = spec.evaluate_on(frame.lambda, &frame.lattice, side)?;
                    f[k] = match (p, inv) {
                        (CurvePoint::Infinity, true) => C64::new(0.0, 0.0),
                        (CurvePoint::Infinity, false) => {
                            return Err(Error::numeric("order function", "stencil meets a pole of x"))
                        }
                        (CurvePoint::Affine { x, .. }, true) => x.inv(),
                        (CurvePoint::Affine { x, .. }, false) => x,
                    };
                }
                let i = C64::new(0.0, 1.0);
                let dw = (f[0] - f[1] - i * f[2] + i * f[3]) / (4.0 * h);
                // the same expression in x and in 1/x, up to the scale
                let (a2, w2) = (scale * scale, w0.norm_sqr());
                let d = if inv {
                    dw.norm_sqr() * a2 / (PI * (a2 * w2 + 1.0).powi(2))
                } else {
                    dw.norm_sqr() * a2 / (PI * (a2 + w2).powi(2))
                };
                Ok(d)
            })
            .collect()
    }
}

fn density_for<'a>(spec: &'a SectionSpec, metric: OrderMetric) -> Box<dyn Fn(&Cell, &[C64]) -> Result<Vec<f64>> + 'a> {
    match metric {
        OrderMetric::BettiOmega => Box::new(betti_density(spec)),
        OrderMetric::FubiniStudyOnX { scale } => Box::new(fs_density(spec, scale)),
    }
}

/// `∫ f·log(r/e)` over `{lower < e < r}` for every `r`, from a fixed product grid.
fn sublevel_characteristic(
    exh: &ExhaustionConfig,
    f: &dyn Fn(&Cell, &[C64]) -> Result<Vec<f64>>,
    r_values: &[f64],
    lower: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let hi = *r_values.last().unwrap();
    let cells = affine_cells(exh, hi);
    let fine = GaussLegendre::new(exh.quad.order);
    let coarse = GaussLegendre::new((exh.quad.order / 2).max(2));
    let mut vf = vec![0.0; r_values.len()];
    let mut vc = vec![0.0; r_values.len()];
    for (_, cell) in &cells {
        for (rule, acc) in [(&fine, &mut vf), (&coarse, &mut vc)] {
            let mut pts = Vec::new();
            let mut wts = Vec::new();
            for (s, ws) in rule.on(cell.s0, cell.s1) {
                for (t, wt) in rule.on(cell.t0, cell.t1) {
                    let (l, jac) = cell.chart.map(s, t);
                    if exh.exhaustion(l) < hi {
                        pts.push(l);
                        wts.push(ws * wt * jac);
                    }
                }
            }
            if pts.is_empty() {
                continue;
            }
            let vals = f(cell, &pts)?;
            for ((v, w), l) in vals.iter().zip(&wts).zip(&pts) {
                let e = exh.exhaustion(*l);
                if e <= lower {
                    continue;
                }
                for (k, r) in r_values.iter().enumerate() {
                    if e < *r {
                        acc[k] += v * w * (r / e).ln();
                    }
                }
            }
        }
    }
    let err = vf.iter().zip(&vc).map(|(a, b)| (a - b).abs()).collect();
    Ok((vf, err))
}

/// Order function `T(r; ω) = ∫_{r₀}^{r} ds/s ∫_{r₀ < e < s} σ*ω`.
pub fn order_function(
    spec: &SectionSpec,
    metric: OrderMetric,
    exh: &ExhaustionConfig,
    r_values: &[f64],
) -> Result<CharacteristicSeries> {
    spec.validate()?;
    check_r_values(exh, r_values)?;
    if spec.is_torsion() && metric == OrderMetric::BettiOmega {
        return Ok(zero_series(r_values, SeriesKind::Order));
    }
    let f = density_for(spec, metric);
    let mut exh = exh.clone();
    if let OrderMetric::FubiniStudyOnX { scale } = metric {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::Input(format!("Fubini-Study scale {scale} must be positive")));
        }
        exh.quad.rel_tol = exh.quad.rel_tol.max(FS_REL_TOL_FLOOR);
    }
    let exh = &exh;
    let (values, quad_error) = match exh.mode {
        ExhaustionMode::PuncturedDisk => shell_characteristic(exh, &*f, r_values)?,
        ExhaustionMode::AffineCurve => sublevel_characteristic(exh, &*f, r_values, exh.r0)?,
    };
    Ok(CharacteristicSeries {
        r_values: r_values.to_vec(),
        values,
        kind: SeriesKind::Order,
        quad_error,
    })
}

/// Shell moments `A_i = ∫ f`, `B_i = ∫ f log|λ|` over `r_{i} < |λ| < r_{i+1}`, combined into
/// `T(r_k) = Σ_{i<k} (A_i log r_k - B_i)`.
fn shell_characteristic(
    exh: &ExhaustionConfig,
    f: &dyn Fn(&Cell, &[C64]) -> Result<Vec<f64>>,
    r_values: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut radii = vec![exh.r0];
    radii.extend_from_slice(r_values);
    let cells = annulus_cells(&radii, exh.max_ds, exh.t_pieces, 0.0);
    let lg = |l: C64| l.norm().ln();
    let integ = Integrator::new(exh.quad, f).with_weight(&lg);
    let n = r_values.len();
    let (mut a, mut b, mut e) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut converged = true;
    for (i, cell) in &cells {
        let r = integ.integrate(cell)?;
        a[*i] += r.value;
        b[*i] += r.moment;
        e[*i] += r.error;
        converged &= r.converged;
    }
    if !converged {
        return Err(Error::numeric(
            "order function",
            "adaptive quadrature reached its depth limit",
        ));
    }
    let mut values = Vec::with_capacity(n);
    let mut errs = Vec::with_capacity(n);
    for (k, rk) in r_values.iter().enumerate() {
        let lr = rk.ln();
        let mut v = 0.0;
        let mut er = 0.0;
        for i in 0..=k {
            v += a[i] * lr - b[i];
            er += e[i] * (lr - radii[i].ln());
        }
        values.push(v);
        errs.push(er);
    }
    Ok((values, errs))
}

/// A point where the section meets the divisor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intersection {
    pub lambda: C64,
    pub multiplicity: u32,
}

/// Lattice points with nonzero winding number of a closed polygon, by horizontal scanlines.
pub fn lattice_windings(poly: &[(f64, f64)]) -> Vec<((i64, i64), i64)> {
    let mut lines: BTreeMap<i64, Vec<(f64, i64)>> = BTreeMap::new();
    let n = poly.len();
    for k in 0..n {
        let (x0, y0) = poly[k];
        let (x1, y1) = poly[(k + 1) % n];
        if y0 == y1 {
            continue;
        }
        let (lo, hi, dir) = if y1 > y0 { (y0, y1, 1) } else { (y1, y0, -1) };
        for j in (lo.ceil() as i64)..(hi.ceil() as i64) {
            let x = x0 + (j as f64 - y0) * (x1 - x0) / (y1 - y0);
            lines.entry(j).or_default().push((x, dir));
        }
    }
    let mut out = Vec::new();
    for (j, mut xs) in lines {
        xs.sort_by(|a, b| a.0.total_cmp(&b.0));
        // winding of (i, j) is the sum of directions of crossings with x > i
        let mut w: i64 = xs.iter().map(|c| c.1).sum();
        for pair in xs.windows(2) {
            w -= pair[0].1;
            if w != 0 {
                for i in (pair[0].0.ceil() as i64)..(pair[1].0.ceil() as i64) {
                    out.push(((i, j), w));
                }
            }
        }
    }
    out
}

/// Lattice points within `tol` of the polygon.
fn near_points(poly: &[(f64, f64)], tol: f64) -> Vec<(i64, i64)> {
    let mut out = Vec::new();
    let n = poly.len();
    for k in 0..n {
        let a = poly[k];
        let b = poly[(k + 1) % n];
        let (xl, xh) = (a.0.min(b.0) - tol, a.0.max(b.0) + tol);
        let (yl, yh) = (a.1.min(b.1) - tol, a.1.max(b.1) + tol);
        for i in (xl.ceil() as i64)..=(xh.floor() as i64) {
            for j in (yl.ceil() as i64)..=(yh.floor() as i64) {
                let (px, py) = (i as f64, j as f64);
                let (dx, dy) = (b.0 - a.0, b.1 - a.1);
                let len2 = dx * dx + dy * dy;
                let u = if len2 > 0.0 {
                    (((px - a.0) * dx + (py - a.1) * dy) / len2).clamp(0.0, 1.0)
                } else {
                    0.0
                };
                let d = (px - a.0 - u * dx).hypot(py - a.1 - u * dy);
                if d <= tol {
                    out.push((i, j));
                }
            }
        }
    }
    out.sort_unstable();
    out.dedup();
    out
}

/// The Lie coordinate and its derivative on the fixed sheet, near `seed`.
fn lie_jet(
    spec: &SectionSpec,
    basis: &PeriodBasis,
    l: C64,
    side: Side,
    seed: C64,
) -> Result<(C64, C64, crate::periods::PeriodJet)> {
    if let Some((z, dz)) = spec.closed_form_lie(l) {
        return Ok((z, dz, basis.jet_at(l)?));
    }
    let frame = LocalFrame::new(basis, l)?;
    let z = spec.sheet_coordinate(frame.lambda, &frame.lattice, side, Some(seed))?;
    let h = (1e-4 * (1.0 + l.norm()))
        .min(0.25 * stencil_limit(spec, l))
        .min(0.25 * basis.local_radius());
    let dz = lie_derivative(spec, basis, &frame, z, side, h)?;
    Ok((z, dz, frame.jet))
}

/// Roots on the real axis are real by conjugation symmetry; exact reality keeps them on one side
/// of the cell seams there.
fn snap_real(l: C64) -> C64 {
    if l.im.abs() < 1e-12 * l.norm() {
        C64::new(l.re, 0.0)
    } else {
        l
    }
}

/// Root of `z(λ) - b₁ρ₁(λ) - b₂ρ₂(λ)` near the cell, by Newton's method.
fn betti_root(
    spec: &SectionSpec,
    basis: &PeriodBasis,
    cell: &Cell,
    target: (f64, f64),
) -> Result<Option<C64>> {
    let side = side_of(cell);
    let mut l = cell.center();
    let rad = cell.radius();
    for _ in 0..60 {
        let jet = basis.jet_at(l)?;
        let seed = jet.rho1 * target.0 + jet.rho2 * target.1;
        let (z, dz, jet) = lie_jet(spec, basis, l, side, seed)?;
        let g = z - jet.rho1 * target.0 - jet.rho2 * target.1;
        let dg = dz - jet.drho1 * target.0 - jet.drho2 * target.1;
        if dg.norm() == 0.0 {
            return Ok(None);
        }
        let mut step = g / dg;
        if step.norm() > 0.5 * rad {
            step *= 0.5 * rad / step.norm();
        }
        l -= step;
        if (l - cell.center()).norm() > 3.0 * rad {
            return Ok(None);
        }
        if step.norm() <= 1e-13 * l.norm() {
            return Ok(Some(snap_real(l)));
        }
    }
    Ok(None)
}

/// Betti coordinates of the divisor point in the cell's frame.
fn divisor_offset(divisor: &Divisor, basis: &PeriodBasis, cell: &Cell) -> Result<(f64, f64)> {
    match divisor {
        Divisor::ZeroSectionQ => Ok((0.0, 0.0)),
        Divisor::TorsionTranslate { point } => {
            let frame = LocalFrame::new(basis, cell.center())?;
            let z = match point {
                TorsionName::Q => C64::new(0.0, 0.0),
                TorsionName::P1 => frame.lattice.half_periods()[0],
                TorsionName::P2 => frame.lattice.half_periods()[1],
                TorsionName::P3 => frame.lattice.half_periods()[2],
            };
            let (b1, b2) = frame.betti(z);
            Ok(((2.0 * b1).round() / 2.0, (2.0 * b2).round() / 2.0))
        }
        Divisor::XEquals { .. } => Err(Error::Unsupported("x = c is counted by the argument principle".into())),
    }
}

fn cell_betti_intersections(
    spec: &SectionSpec,
    divisor: &Divisor,
    exh: &ExhaustionConfig,
    cell: &Cell,
) -> Result<Vec<Intersection>> {
    let basis = period_basis(Lambda::new(cell.center())?, None)?;
    let off = divisor_offset(divisor, &basis, cell)?;
    let tracer = BettiTracer::new(spec, exh.boundary);
    let poly: Vec<(f64, f64)> = tracer
        .polygon(cell, &basis)?
        .into_iter()
        .map(|(a, b)| (a - off.0, b - off.1))
        .collect();
    let tol = 2.0 * exh.boundary.max_dev;
    let near = near_points(&poly, tol);
    let mut candidates: BTreeMap<(i64, i64), i64> = BTreeMap::new();
    for (m, w) in lattice_windings(&poly) {
        candidates.insert(m, w);
    }
    for m in &near {
        candidates.entry(*m).or_insert(0);
    }
    let mut out = Vec::new();
    for (m, w) in candidates {
        let ambiguous = near.binary_search(&m).is_ok();
        let target = (m.0 as f64 + off.0, m.1 as f64 + off.1);
        let root = betti_root(spec, &basis, cell, target)?;
        match root {
            Some(l) if cell.contains(l) => out.push(Intersection {
                lambda: l,
                multiplicity: w.unsigned_abs().max(1) as u32,
            }),
            _ if ambiguous => {}
            _ => {
                return Err(Error::numeric(
                    "counting function",
                    format!(
                        "lattice point {m:?} has winding {w} in the cell centered at {} but no root was located there",
                        cell.center()
                    ),
                ))
            }
        }
    }
    Ok(out)
}

/// Winding number of `h` along the cell boundary.
pub fn boundary_winding(h: &dyn Fn(C64) -> Result<C64>, cell: &Cell) -> Result<i64> {
    let point = |u: f64| {
        let (s, t) = cell.boundary(u.min(4.0 - 1e-15));
        cell.chart.map(s, t).0
    };
    let mut total = 0.0;
    let m = 32;
    let mut prev = h(point(0.0))?;
    for k in 1..=m {
        let (u0, u1) = (4.0 * (k - 1) as f64 / m as f64, 4.0 * k as f64 / m as f64);
        let next = h(point(u1))?;
        total += arg_change(h, &point, u0, u1, prev, next, 0)?;
        prev = next;
    }
    Ok((total / (2.0 * PI)).round() as i64)
}

/// Change of `arg h` from `u0` to `u1`; a segment is accepted once both halves turn by less than
/// `0.3` and agree with the whole, which rules out a hidden full turn.
fn arg_change(
    h: &dyn Fn(C64) -> Result<C64>,
    point: &dyn Fn(f64) -> C64,
    u0: f64,
    u1: f64,
    a: C64,
    b: C64,
    depth: u32,
) -> Result<f64> {
    let bad = |v: C64| v.norm() == 0.0 || !v.is_finite();
    if bad(a) || bad(b) || depth > 48 {
        return Err(Error::numeric("counting function", "the divisor meets a cell boundary"));
    }
    let um = 0.5 * (u0 + u1);
    let c = h(point(um))?;
    if bad(c) {
        return Err(Error::numeric("counting function", "the divisor meets a cell boundary"));
    }
    let (d, d1, d2) = ((b / a).arg(), (c / a).arg(), (b / c).arg());
    if d1.abs() < 0.3 && d2.abs() < 0.3 && (d1 + d2 - d).abs() < 1e-9 {
        return Ok(d);
    }
    Ok(arg_change(h, point, u0, um, a, c, depth + 1)? + arg_change(h, point, um, u1, c, b, depth + 1)?)
}

pub fn x_minus_c(spec: &SectionSpec, basis: &PeriodBasis, l: C64, side: Side, c: C64) -> Result<C64> {
    let frame = LocalFrame::new(basis, l)?;
    match spec.evaluate_on(frame.lambda, &frame.lattice, side)? {
        CurvePoint::Infinity => Ok(C64::new(f64::INFINITY, 0.0)),
        CurvePoint::Affine { x, .. } => Ok(x - c),
    }
}

/// Points with `x(σ(λ)) = c` in the cell; `poles` lists where the section meets `Q`, each a
/// double pole of `x`.
fn cell_x_intersections(
    spec: &SectionSpec,
    c: C64,
    cell: &Cell,
    poles: &[Intersection],
    depth: u32,
) -> Result<Vec<Intersection>> {
    let basis = period_basis(Lambda::new(cell.center())?, None)?;
    let side = side_of(cell);
    let h = |l: C64| x_minus_c(spec, &basis, l, side, c);
    let winding = boundary_winding(&h, cell)?;
    let inside: Vec<Intersection> = poles.iter().filter(|p| cell.contains(p.lambda)).copied().collect();
    let zeros = winding + 2 * inside.iter().map(|p| p.multiplicity as i64).sum::<i64>();
    if zeros <= 0 {
        return Ok(Vec::new());
    }
    if zeros == 1 || depth >= 24 {
        let mut l = cell.center();
        let rad = cell.radius();
        for _ in 0..60 {
            let e = 1e-6 * rad;
            let f0 = h(l)?;
            let d = (h(l + e)? - h(l - e)?) / (2.0 * e);
            let mut step = f0 / d;
            if !step.is_finite() {
                break;
            }
            if step.norm() > 0.5 * rad {
                step *= 0.5 * rad / step.norm();
            }
            l -= step;
            if step.norm() < 1e-13 * l.norm() {
                break;
            }
        }
        let l = snap_real(l);
        if cell.contains(l) && h(l)?.norm() < 1e-8 * (1.0 + c.norm()) {
            return Ok(vec![Intersection {
                lambda: l,
                multiplicity: zeros as u32,
            }]);
        }
        if depth >= 24 {
            return Ok(vec![Intersection {
                lambda: cell.center(),
                multiplicity: zeros as u32,
            }]);
        }
    }
    let mut out = Vec::new();
    for k in cell.split() {
        out.extend(cell_x_intersections(spec, c, &k, &inside, depth + 1)?);
    }
    Ok(out)
}

fn cell_intersections(
    spec: &SectionSpec,
    divisor: &Divisor,
    exh: &ExhaustionConfig,
    cell: &Cell,
) -> Result<Vec<Intersection>> {
    match divisor {
        Divisor::XEquals { c } => {
            if matches!(spec, SectionSpec::NamedTorsion { point: TorsionName::Q }) {
                return Ok(Vec::new());
            }
            let poles = if spec.is_torsion() {
                Vec::new()
            } else {
                cell_betti_intersections(spec, &Divisor::ZeroSectionQ, exh, cell)?
            };
            cell_x_intersections(spec, *c, cell, &poles, 0)
        }
        _ if spec.is_torsion() => Ok(Vec::new()),
        _ => cell_betti_intersections(spec, divisor, exh, cell),
    }
}

/// Intersections of the section with the divisor in `{lo ≤ e(λ) < hi}`.
///
/// Sections without a branch cut are searched on rotated polar grids, moving to the next phase
/// when an intersection lies on a cell boundary.
pub fn locate_intersections(
    spec: &SectionSpec,
    divisor: &Divisor,
    exh: &ExhaustionConfig,
    lo: f64,
    hi: f64,
) -> Result<Vec<Intersection>> {
    spec.validate()?;
    exh.validate()?;
    let identically = match divisor {
        Divisor::ZeroSectionQ => matches!(spec, SectionSpec::NamedTorsion { point: TorsionName::Q }),
        Divisor::TorsionTranslate { point } => {
            matches!(spec, SectionSpec::NamedTorsion { point: p } if p == point)
        }
        Divisor::XEquals { c } => match spec {
            SectionSpec::MasserBaseChange { x0, .. } => (c - x0).norm() == 0.0,
            _ => false,
        },
    };
    if identically {
        return Err(Error::Input("the section lies inside the divisor".into()));
    }
    let phases: &[f64] = if spec.cut().is_some() { &[0.0] } else { &GRID_PHASES };
    let mut last = None;
    for &phase in phases {
        let cells = match exh.mode {
            ExhaustionMode::PuncturedDisk => annulus_cells(&[lo, hi], exh.max_ds, exh.t_pieces, phase),
            ExhaustionMode::AffineCurve => affine_cells(exh, hi),
        };
        let mut out = Vec::new();
        let mut failed = None;
        for (_, cell) in &cells {
            match cell_intersections(spec, divisor, exh, cell) {
                Ok(found) => out.extend(found.into_iter().filter(|p| {
                    let e = exh.exhaustion(p.lambda);
                    e >= lo && e < hi
                })),
                Err(e @ Error::Numeric { .. }) => {
                    failed = Some(e);
                    break;
                }
                Err(e) => return Err(e),
            }
        }
        match failed {
            None => {
                out.sort_by(|a, b| exh.exhaustion(a.lambda).total_cmp(&exh.exhaustion(b.lambda)));
                return Ok(out);
            }
            Some(e) => last = Some(e),
        }
        if exh.mode == ExhaustionMode::AffineCurve {
            break;
        }
    }
    Err(last.unwrap())
}

fn counting_from(points: &[Intersection], exh: &ExhaustionConfig, r_values: &[f64], cap: Option<u32>) -> Vec<f64> {
    r_values
        .iter()
        .map(|&r| {
            points
                .iter()
                .map(|p| {
                    let e = exh.exhaustion(p.lambda);
                    let mu = cap.map_or(p.multiplicity, |k| p.multiplicity.min(k)) as f64;
                    if e > exh.r0 && e < r {
                        mu * (r / e).ln()
                    } else {
                        0.0
                    }
                })
                .sum()
        })
        .collect()
}

/// Counting function `N(r) = ∫_{r₀}^{r} n(s)/s ds`, truncated at multiplicity `k` when given.
pub fn counting_function(
    spec: &SectionSpec,
    divisor: &Divisor,
    exh: &ExhaustionConfig,
    r_values: &[f64],
    truncation: Option<u32>,
) -> Result<CharacteristicSeries> {
    check_r_values(exh, r_values)?;
    let points = locate_intersections(spec, divisor, exh, exh.r0, *r_values.last().unwrap())?;
    Ok(CharacteristicSeries {
        r_values: r_values.to_vec(),
        values: counting_from(&points, exh, r_values, truncation),
        kind: match truncation {
            Some(k) => SeriesKind::TruncatedCounting { k },
            None => SeriesKind::Counting,
        },
        quad_error: vec![0.0; r_values.len()],
    })
}

/// `-log ‖s_𝒟(σ(λ))‖²` and the local weight of its logarithmic singularities.
fn neg_log_norm(
    spec: &SectionSpec,
    divisor: &Divisor,
    metric: ProximityMetric,
    frame: &LocalFrame,
    side: Side,
    seed: Option<C64>,
) -> Result<(f64, Option<C64>)> {
    match metric {
        ProximityMetric::Neron => {
            let z = match spec.closed_form_lie(frame.lambda.value()) {
                Some((z, _)) => z,
                None => spec.lie_coordinate(frame.lambda, &frame.lattice, side, seed)?,
            };
            let lat: &FiberLattice = &frame.lattice;
            let zd = match divisor {
                Divisor::ZeroSectionQ => C64::new(0.0, 0.0),
                Divisor::TorsionTranslate { point } => match point {
                    TorsionName::Q => C64::new(0.0, 0.0),
                    TorsionName::P1 => lat.half_periods()[0],
                    TorsionName::P2 => lat.half_periods()[1],
                    TorsionName::P3 => lat.half_periods()[2],
                },
                Divisor::XEquals { .. } => {
                    return Err(Error::Unsupported(
                        "the Néron metric is defined for Q and its torsion translates".into(),
                    ))
                }
            };
            Ok((-lat.log_norm_sq(z - zd), Some(z)))
        }
        ProximityMetric::FubiniStudy => {
            let p = spec.evaluate_on(frame.lambda, &frame.lattice, side)?;
            let v = match (divisor, p) {
                (Divisor::ZeroSectionQ, CurvePoint::Infinity) => f64::INFINITY,
                (Divisor::ZeroSectionQ, CurvePoint::Affine { x, .. }) => x.norm_sqr().ln_1p(),
                (Divisor::XEquals { c }, CurvePoint::Infinity) => c.norm_sqr().ln_1p(),
                (Divisor::XEquals { c }, CurvePoint::Affine { x, .. }) => {
                    x.norm_sqr().ln_1p() + c.norm_sqr().ln_1p() - (x - c).norm_sqr().ln()
                }
                (Divisor::TorsionTranslate { .. }, _) => {
                    return Err(Error::Unsupported(
                        "torsion translates use the Néron metric".into(),
                    ))
                }
            };
            Ok((v, None))
        }
    }
}

/// Order of the logarithmic singularity of `-log‖s‖²` at each intersection, per unit
/// multiplicity, in units of `-log|λ-λ_k|²`.
fn singular_weight(divisor: &Divisor, metric: ProximityMetric) -> f64 {
    match (divisor, metric) {
        (Divisor::ZeroSectionQ, ProximityMetric::FubiniStudy) => 2.0,
        _ => 1.0,
    }
}

/// Proximity settings for the circle quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircleConfig {
    /// Minimum number of trapezoid nodes on `|λ| = r`.
    pub min_nodes: usize,
    /// Intersections within this many node spacings of the circle are subtracted exactly.
    pub band: f64,
}

impl Default for CircleConfig {
    fn default() -> Self {
        CircleConfig {
            min_nodes: 2048,
            band: 8.0,
        }
    }
}

/// Mean of `-½ log‖s‖²` over `|λ| = r`, with singular contributions of nearby intersections
/// removed before the trapezoid rule and added back in closed form.
#[allow(clippy::too_many_arguments)]
fn circle_mean(
    spec: &SectionSpec,
    divisor: &Divisor,
    metric: ProximityMetric,
    r: f64,
    points: &[Intersection],
    cc: &CircleConfig,
    offset: f64,
) -> Result<f64> {
    let kappa = singular_weight(divisor, metric);
    let spacing_nodes = cc.min_nodes.max((2.0 * PI * r / 0.05).ceil() as usize).next_power_of_two();
    let nodes = spacing_nodes.min(1 << 20);
    let h = 2.0 * PI * r / nodes as f64;
    let band = cc.band * h;
    let near: Vec<&Intersection> = points
        .iter()
        .filter(|p| (p.lambda.norm() - r).abs() < band)
        .collect();
    // arcs short enough for a local period expansion
    let arcs = ((2.0 * PI * r) / (0.3 * (r - 1.0))).ceil().max(8.0) as usize;
    let per_arc = nodes.div_ceil(arcs);
    let mut sum = 0.0;
    let mut seed = None;
    for a in 0..arcs {
        let k0 = a * per_arc;
        let k1 = ((a + 1) * per_arc).min(nodes);
        if k0 >= k1 {
            break;
        }
        let mid = 0.5 * (k0 + k1) as f64;
        let th_mid = -PI + 2.0 * PI * (mid + offset) / nodes as f64;
        let basis = period_basis(Lambda::new(C64::from_polar(r, th_mid))?, None)?;
        for k in k0..k1 {
            let th = -PI + 2.0 * PI * (k as f64 + offset) / nodes as f64;
            let l = C64::from_polar(r, th);
            let side = if l.im >= 0.0 { Side::Upper } else { Side::Lower };
            let frame = LocalFrame::new(&basis, l)?;
            let (u, z) = neg_log_norm(spec, divisor, metric, &frame, side, seed)?;
            seed = z;
            let mut v = u;
            for p in &near {
                v += kappa * p.multiplicity as f64 * (l - p.lambda).norm_sqr().ln();
            }
            if !v.is_finite() {
                return Err(Error::numeric("proximity", "a node meets the divisor"));
            }
            sum += v;
        }
    }
    let mean = sum / nodes as f64;
    let correction: f64 = near
        .iter()
        .map(|p| kappa * p.multiplicity as f64 * 2.0 * p.lambda.norm().max(r).ln())
        .sum();
    Ok(0.5 * (mean - correction))
}

fn proximity_from(
    spec: &SectionSpec,
    divisor: &Divisor,
    metric: ProximityMetric,
    r_values: &[f64],
    points: &[Intersection],
    cc: &CircleConfig,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut values = Vec::with_capacity(r_values.len());
    let mut nudges = Vec::with_capacity(r_values.len());
    for &r in r_values {
        let mut last = None;
        // deterministic nudges of the node set when a node lands on the divisor
        for (attempt, offset) in [0.0, 0.5, 0.25, 0.75].iter().enumerate() {
            match circle_mean(spec, divisor, metric, r, points, cc, *offset) {
                Ok(v) => {
                    last = Some(v);
                    nudges.push(*offset);
                    break;
                }
                Err(e) if attempt == 3 => {
                    return Err(Error::numeric("proximity", format!("contour at r = {r} meets the divisor: {e}")))
                }
                Err(_) => {}
            }
        }
        values.push(last.unwrap());
    }
    Ok((values, nudges))
}

fn intersections_for_proximity(
    spec: &SectionSpec,
    divisor: &Divisor,
    metric: ProximityMetric,
    exh: &ExhaustionConfig,
    r_values: &[f64],
) -> Result<Vec<Intersection>> {
    if exh.mode != ExhaustionMode::PuncturedDisk {
        return Err(Error::Unsupported("proximity functions are computed on circles |λ| = r".into()));
    }
    if metric == ProximityMetric::Neron && matches!(divisor, Divisor::XEquals { .. }) {
        return Err(Error::Unsupported("the Néron metric is defined for Q and its torsion translates".into()));
    }
    let lo = exh.r0 * 0.9;
    let hi = r_values.last().unwrap() * 1.1;
    let mut ex = exh.clone();
    ex.r0 = lo.max(1.0 + 1e-9);
    if spec.is_torsion() && !matches!(divisor, Divisor::XEquals { .. }) {
        return Ok(Vec::new());
    }
    locate_intersections(spec, divisor, &ex, ex.r0, hi)
}

/// Proximity function `m(r) = ∫_{|λ|=r} log(1/‖s_𝒟∘σ‖) dθ/2π`.
pub fn proximity_function(
    spec: &SectionSpec,
    divisor: &Divisor,
    metric: ProximityMetric,
    exh: &ExhaustionConfig,
    r_values: &[f64],
) -> Result<CharacteristicSeries> {
    spec.validate()?;
    check_r_values(exh, r_values)?;
    let points = intersections_for_proximity(spec, divisor, metric, exh, r_values)?;
    let (values, _) = proximity_from(spec, divisor, metric, r_values, &points, &CircleConfig::default())?;
    Ok(CharacteristicSeries {
        r_values: r_values.to_vec(),
        values,
        kind: SeriesKind::Proximity,
        quad_error: vec![0.0; r_values.len()],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FmtReport {
    pub order: CharacteristicSeries,
    pub counting: CharacteristicSeries,
    pub proximity: CharacteristicSeries,
    /// `T - N - m` at each radius.
    pub residuals: Vec<f64>,
    /// Least-squares fit `residual ≈ intercept + slope·log r`.
    pub slope: f64,
    pub intercept: f64,
    pub max_deviation: f64,
    /// Slopes fitted separately on the lower and upper halves of the radii.
    pub half_slopes: (f64, f64),
    /// `max |residual| / log r`.
    pub ratio_bound: f64,
    pub nudges: Vec<f64>,
}

/// Least squares `y ≈ a + b x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let b = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (my - b * mx, b)
}

/// First-main-theorem residual `T(r; ω_𝓛) - N(r) - m(r)` with one metric for `T` and `m`.
pub fn fmt_residual(
    spec: &SectionSpec,
    divisor: &Divisor,
    metric: ProximityMetric,
    exh: &ExhaustionConfig,
    r_values: &[f64],
) -> Result<FmtReport> {
    spec.validate()?;
    check_r_values(exh, r_values)?;
    let points = intersections_for_proximity(spec, divisor, metric, exh, r_values)?;
    let order_metric = match metric {
        ProximityMetric::Neron => OrderMetric::BettiOmega,
        ProximityMetric::FubiniStudy => OrderMetric::FubiniStudyOnX { scale: 1.0 },
    };
    let order = order_function(spec, order_metric, exh, r_values)?;
    let kappa = singular_weight(divisor, metric);
    let mut counting_values = counting_from(&points, exh, r_values, None);
    for v in &mut counting_values {
        *v *= kappa;
    }
    let counting = CharacteristicSeries {
        r_values: r_values.to_vec(),
        values: counting_values,
        kind: SeriesKind::Counting,
        quad_error: vec![0.0; r_values.len()],
    };
    let (mvals, nudges) = proximity_from(spec, divisor, metric, r_values, &points, &CircleConfig::default())?;
    let proximity = CharacteristicSeries {
        r_values: r_values.to_vec(),
        values: mvals,
        kind: SeriesKind::Proximity,
        quad_error: vec![0.0; r_values.len()],
    };
    let residuals: Vec<f64> = (0..r_values.len())
        .map(|k| order.values[k] - counting.values[k] - proximity.values[k])
        .collect();
    let logs: Vec<f64> = r_values.iter().map(|r| r.ln()).collect();
    let (intercept, slope) = linear_fit(&logs, &residuals);
    let max_deviation = logs
        .iter()
        .zip(&residuals)
        .map(|(x, y)| (y - intercept - slope * x).abs())
        .fold(0.0, f64::max);
    let h = logs.len() / 2;
    let half_slopes = if h >= 2 {
        (
            linear_fit(&logs[..h], &residuals[..h]).1,
            linear_fit(&logs[logs.len() - h..], &residuals[residuals.len() - h..]).1,
        )
    } else {
        (slope, slope)
    };
    let ratio_bound = logs.iter().zip(&residuals).map(|(x, y)| y.abs() / x).fold(0.0, f64::max);
    Ok(FmtReport {
        order,
        counting,
        proximity,
        residuals,
        slope,
        intercept,
        max_deviation,
        half_slopes,
        ratio_bound,
        nudges,
    })
}

/// `T̂(r) = ∫₀^r ds/s ∫_{B(s)} σ*ω` with `B(s) = {|ξ| < s}`.
pub fn height_characteristic(
    spec: &SectionSpec,
    exh: &ExhaustionConfig,
    r_values: &[f64],
) -> Result<CharacteristicSeries> {
    spec.validate()?;
    if exh.mode != ExhaustionMode::AffineCurve {
        return Err(Error::Input("the height characteristic uses the affine exhaustion".into()));
    }
    exh.validate()?;
    if r_values.is_empty() || r_values.windows(2).any(|w| w[1] <= w[0]) || r_values[0] <= 0.0 {
        return Err(Error::Input("radii must be positive and increasing".into()));
    }
    if spec.is_torsion() {
        return Ok(zero_series(r_values, SeriesKind::HeightChar));
    }
    let f = betti_density(spec);
    let (values, quad_error) = sublevel_characteristic(exh, &f, r_values, 0.0)?;
    Ok(CharacteristicSeries {
        r_values: r_values.to_vec(),
        values,
        kind: SeriesKind::HeightChar,
        quad_error,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    RationalLike,
    TranscendentalLike,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RationalityReport {
    pub verdict: Verdict,
    /// Slopes `dT/d log r` over the second-to-last and last decades.
    pub decade_slopes: Option<(f64, f64)>,
    /// `(T/log r)` at the last radius over its value at the first.
    pub growth_factor: Option<f64>,
    pub decades: f64,
}

fn interpolate(series: &CharacteristicSeries, r: f64) -> f64 {
    let rs = &series.r_values;
    let k = rs.partition_point(|&x| x < r).clamp(1, rs.len() - 1);
    let (x0, x1) = (rs[k - 1].ln(), rs[k].ln());
    let (y0, y1) = (series.values[k - 1], series.values[k]);
    y0 + (y1 - y0) * (r.ln() - x0) / (x1 - x0)
}

/// Rational or transcendental behaviour from the growth of a characteristic series.
pub fn rationality_test(series: &CharacteristicSeries) -> RationalityReport {
    let rs = &series.r_values;
    let n = rs.len();
    let decades = if n >= 2 && rs[0] > 0.0 { (rs[n - 1] / rs[0]).log10() } else { 0.0 };
    if n < 3 || decades < 2.0 - 1e-9 || rs[0] <= 1.0 {
        return RationalityReport {
            verdict: Verdict::Inconclusive,
            decade_slopes: None,
            growth_factor: None,
            decades,
        };
    }
    let r_end = rs[n - 1];
    let ten = 10f64.ln();
    let t2 = interpolate(series, r_end);
    let t1 = interpolate(series, r_end / 10.0);
    let t0 = interpolate(series, r_end / 100.0);
    let s1 = (t1 - t0) / ten;
    let s2 = (t2 - t1) / ten;
    let ratios: Vec<f64> = rs.iter().zip(&series.values).map(|(r, v)| v / r.ln()).collect();
    let growth = if ratios[0].abs() > 0.0 { ratios[n - 1] / ratios[0] } else { f64::INFINITY };
    let scale = series.values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let monotone = ratios.windows(2).all(|w| w[1] >= w[0]);
    let verdict = if monotone && growth >= 10.0 && scale > 0.0 {
        Verdict::TranscendentalLike
    } else if (s2 - s1).abs() <= 0.2 * s1.abs().max(s2.abs()) || s1.abs().max(s2.abs()) <= 1e-12 * (1.0 + scale) {
        Verdict::RationalLike
    } else {
        Verdict::Inconclusive
    };
    RationalityReport {
        verdict,
        decade_slopes: Some((s1, s2)),
        growth_factor: growth.is_finite().then_some(growth),
        decades,
    }
}

/// Radii spaced evenly in `log r`.
pub fn log_spaced(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| (a.ln() + (b.ln() - a.ln()) * k as f64 / (n - 1).max(1) as f64).exp())
        .collect()
}
