//! Gauss–Legendre product rules on log-polar charts of the λ-plane.
//!
//! The punctured plane is covered by two charts with coordinates `(s, t) ∈ ℝ × [0, 1]`:
//! the left chart `λ = e^s·e^{i(π + (2t-1)A)}` covers `Re λ ≤ 1/2`, the right chart
//! `λ = 1 + e^s·e^{i(2t-1)A}` covers `Re λ ≥ 1/2`, where `A(r)` is the half-opening angle
//! (`π` for `r ≤ 1/2`). Both charts are orientation preserving with area element
//! `2A(r)·r·(dr/ds) ds dt`. The real axis lies on the edges `t ∈ {0, 1/2, 1}`.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::Result;

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let kf = k as f64;
                    let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                    p0 = p1;
                    p1 = p2;
                }
                let p = if n == 0 { 1.0 } else if n == 1 { x } else { p1 };
                let pm = if n == 1 { 1.0 } else { p0 };
                dp = n as f64 * (x * p - pm) / (x * x - 1.0);
                let dx = p / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            nodes[i] = x;
            weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
        }
        GaussLegendre { nodes, weights }
    }

    /// Nodes and weights mapped to `[a, b]`.
    pub fn on(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let h = 0.5 * (b - a);
        let m = 0.5 * (a + b);
        self.nodes.iter().zip(&self.weights).map(move |(x, w)| (m + h * x, h * w))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Chart {
    Left,
    Right,
    /// Annuli around `0`: `λ = e^s·e^{iπ(2t-1)}`.
    Polar,
}

/// Half-opening angle of a chart at radius `r`.
pub fn half_angle(r: f64) -> f64 {
    if r <= 0.5 {
        PI
    } else {
        PI - (0.5 / r).acos()
    }
}

impl Chart {
    pub fn center(self) -> C64 {
        match self {
            Chart::Left | Chart::Polar => C64::new(0.0, 0.0),
            Chart::Right => C64::new(1.0, 0.0),
        }
    }

    fn axis(self) -> f64 {
        match self {
            Chart::Left => PI,
            Chart::Right | Chart::Polar => 0.0,
        }
    }

    /// The point with chart coordinates `(s, t)` and the area element there.
    pub fn map(self, s: f64, t: f64) -> (C64, f64) {
        if self == Chart::Polar {
            let r = s.exp();
            return (C64::from_polar(r, PI * (2.0 * t - 1.0)), 2.0 * PI * r * r);
        }
        let (r, dr) = radius_of(s);
        let a = half_angle(r);
        let theta = self.axis() + (2.0 * t - 1.0) * a;
        (self.center() + C64::from_polar(r, theta), 2.0 * a * r * dr)
    }
}

impl Chart {
    /// Chart coordinates `(s, t)` of `λ`; `t ∈ [0, 1)`.
    pub fn inverse(self, l: C64) -> (f64, f64) {
        let d = l - self.center();
        let r = d.norm();
        let s = match self {
            Chart::Polar => r.ln(),
            _ => {
                let lo = 0.5f64.ln();
                if r <= 0.5 || r >= 1.0 {
                    r.ln()
                } else {
                    lo + (0.5 / r).acos() / ((PI / 3.0) / -lo)
                }
            }
        };
        let a = match self {
            Chart::Polar => PI,
            _ => half_angle(r),
        };
        let mut th = d.arg() - self.axis();
        while th <= -PI {
            th += 2.0 * PI;
        }
        while th > PI {
            th -= 2.0 * PI;
        }
        let t = 0.5 * (th / a + 1.0);
        (s, if t >= 1.0 { t - 1.0 } else { t })
    }
}

/// Chart radius and `dr/ds`.
///
/// On `1/2 ≤ r ≤ 1` the radial coordinate is the angle `v` with `r = 1/(2cos v)`, rescaled to
/// `s ∈ [ln(1/2), 0]`; this keeps the opening angle `π - v` smooth where the chart edge becomes
/// tangent to the circles. Elsewhere `r = e^s`.
pub fn radius_of(s: f64) -> (f64, f64) {
    let lo = 0.5f64.ln();
    if s <= lo || s >= 0.0 {
        let r = s.exp();
        return (r, r);
    }
    let k = (PI / 3.0) / -lo;
    let v = (s - lo) * k;
    let c = v.cos();
    (0.5 / c, k * 0.5 * v.sin() / (c * c))
}

/// A rectangle in chart coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub chart: Chart,
    pub s0: f64,
    pub s1: f64,
    pub t0: f64,
    pub t1: f64,
}

impl Cell {
    /// Half-open membership `[s0, s1) × [t0, t1)` in chart coordinates.
    pub fn contains(&self, l: C64) -> bool {
        let (s, mut t) = self.chart.inverse(l);
        if self.chart == Chart::Polar && t < self.t0 {
            t += 1.0;
        }
        s >= self.s0 && s < self.s1 && t >= self.t0 && t < self.t1
    }

    pub fn center(&self) -> C64 {
        self.chart.map(0.5 * (self.s0 + self.s1), 0.5 * (self.t0 + self.t1)).0
    }

    pub fn upper(&self) -> bool {
        self.center().im >= 0.0
    }

    pub fn split(&self) -> [Cell; 4] {
        let sm = 0.5 * (self.s0 + self.s1);
        let tm = 0.5 * (self.t0 + self.t1);
        let c = *self;
        [
            Cell { s1: sm, t1: tm, ..c },
            Cell { s0: sm, t1: tm, ..c },
            Cell { s1: sm, t0: tm, ..c },
            Cell { s0: sm, t0: tm, ..c },
        ]
    }

    /// Largest distance from the center to a corner, in the λ-plane.
    pub fn radius(&self) -> f64 {
        let c = self.center();
        let mut r: f64 = 0.0;
        for (s, t) in [(self.s0, self.t0), (self.s1, self.t0), (self.s0, self.t1), (self.s1, self.t1)] {
            r = r.max((self.chart.map(s, t).0 - c).norm());
        }
        // edges bulge outward on arcs; the midpoint of the outer arc bounds that
        r.max((self.chart.map(self.s1, 0.5 * (self.t0 + self.t1)).0 - c).norm())
    }

    /// Point on the boundary, `u ∈ [0, 4)` running counter-clockwise from `(s0, t0)`.
    pub fn boundary(&self, u: f64) -> (f64, f64) {
        let k = u.floor().clamp(0.0, 3.0);
        let f = u - k;
        match k as i32 {
            0 => (self.s0 + f * (self.s1 - self.s0), self.t0),
            1 => (self.s1, self.t0 + f * (self.t1 - self.t0)),
            2 => (self.s1 + f * (self.s0 - self.s1), self.t1),
            _ => (self.s0, self.t1 + f * (self.t0 - self.t1)),
        }
    }
}

/// The excised punctured plane `D(δ)`: `|λ| ≥ δ`, `|λ-1| ≥ δ` and chart radius `≤ 1/δ`.
///
/// Cells are cut at every radius in `breaks`, at `r = 1/2` and `r = 1`, at `t = 1/2`, and to
/// at most `max_ds × max_dt`. Each cell carries the index of the first break level containing it.
pub fn domain_cells(levels: &[f64], max_ds: f64, t_pieces: usize) -> Vec<(usize, Cell)> {
    let mut out = Vec::new();
    let dmin = levels.iter().copied().fold(f64::INFINITY, f64::min);
    let mut breaks: Vec<f64> = vec![dmin.ln(), -dmin.ln(), 0.5f64.ln(), 0.0];
    for d in levels {
        breaks.push(d.ln());
        breaks.push(-d.ln());
    }
    breaks.sort_by(|a, b| a.total_cmp(b));
    breaks.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    let mut s_edges = Vec::new();
    for w in breaks.windows(2) {
        let pieces = ((w[1] - w[0]) / max_ds).ceil().max(1.0) as usize;
        for k in 0..pieces {
            s_edges.push(w[0] + (w[1] - w[0]) * k as f64 / pieces as f64);
        }
    }
    s_edges.push(*breaks.last().unwrap());
    let level_of = |s0: f64, s1: f64| -> usize {
        let smid = 0.5 * (s0 + s1);
        // levels are sorted from the largest radius down
        levels
            .iter()
            .position(|d| smid > d.ln() && smid < -d.ln())
            .unwrap_or(levels.len() - 1)
    };
    let tp = t_pieces.max(1);
    for chart in [Chart::Left, Chart::Right] {
        for w in s_edges.windows(2) {
            for half in 0..2 {
                for k in 0..tp {
                    let t0 = 0.5 * half as f64 + 0.5 * k as f64 / tp as f64;
                    let t1 = 0.5 * half as f64 + 0.5 * (k + 1) as f64 / tp as f64;
                    out.push((
                        level_of(w[0], w[1]),
                        Cell {
                            chart,
                            s0: w[0],
                            s1: w[1],
                            t0,
                            t1,
                        },
                    ));
                }
            }
        }
    }
    out
}

/// Settings of the adaptive product rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadConfig {
    pub order: usize,
    /// Tolerance per unit of chart area.
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_depth: u32,
}

impl Default for QuadConfig {
    fn default() -> Self {
        QuadConfig {
            order: 6,
            abs_tol: 1e-7,
            rel_tol: 1e-7,
            max_depth: 12,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CellIntegral {
    pub value: f64,
    /// Integral of `f·g` for the integrator's weight `g` (zero without one).
    pub moment: f64,
    pub error: f64,
    pub cells: usize,
    pub evaluations: usize,
    pub converged: bool,
}

impl CellIntegral {
    pub fn add(&mut self, other: &CellIntegral) {
        self.value += other.value;
        self.moment += other.moment;
        self.error += other.error;
        self.cells += other.cells;
        self.evaluations += other.evaluations;
        self.converged &= other.converged;
    }
}

type Integrand<'a> = &'a dyn Fn(&Cell, &[C64]) -> Result<Vec<f64>>;

/// Adaptive integration of `f` over a cell against the chart area element.
///
/// `f(cell, points)` returns the integrand at each point; it is called once per (sub)cell so it
/// can set up local data such as a period basis at the cell center.
pub struct Integrator<'a> {
    pub rule: GaussLegendre,
    pub cfg: QuadConfig,
    pub f: Integrand<'a>,
    pub weight: Option<&'a dyn Fn(C64) -> f64>,
}

impl<'a> Integrator<'a> {
    pub fn new(cfg: QuadConfig, f: Integrand<'a>) -> Self {
        Integrator {
            rule: GaussLegendre::new(cfg.order),
            cfg,
            f,
            weight: None,
        }
    }

    pub fn with_weight(mut self, g: &'a dyn Fn(C64) -> f64) -> Self {
        self.weight = Some(g);
        self
    }

    fn estimate(&self, cell: &Cell) -> Result<(f64, f64)> {
        let mut pts = Vec::with_capacity(self.cfg.order * self.cfg.order);
        let mut wts = Vec::with_capacity(pts.capacity());
        for (s, ws) in self.rule.on(cell.s0, cell.s1) {
            for (t, wt) in self.rule.on(cell.t0, cell.t1) {
                let (l, jac) = cell.chart.map(s, t);
                pts.push(l);
                wts.push(ws * wt * jac);
            }
        }
        let vals = (self.f)(cell, &pts)?;
        let mut v = 0.0;
        let mut m = 0.0;
        for ((f, w), l) in vals.iter().zip(&wts).zip(&pts) {
            v += f * w;
            if let Some(g) = self.weight {
                m += f * w * g(*l);
            }
        }
        Ok((v, m))
    }

    pub fn integrate(&self, cell: &Cell) -> Result<CellIntegral> {
        let est = self.estimate(cell)?;
        self.refine(cell, est.0, 0)
    }

    fn refine(&self, cell: &Cell, parent: f64, depth: u32) -> Result<CellIntegral> {
        let kids = cell.split();
        let mut vals = [(0.0, 0.0); 4];
        for (v, k) in vals.iter_mut().zip(kids.iter()) {
            *v = self.estimate(k)?;
        }
        let sum: f64 = vals.iter().map(|v| v.0).sum();
        let diff = (sum - parent).abs();
        let area = (cell.s1 - cell.s0) * (cell.t1 - cell.t0);
        let tol = (self.cfg.abs_tol * area).max(self.cfg.rel_tol * sum.abs());
        let n2 = self.cfg.order * self.cfg.order;
        if diff <= tol || depth >= self.cfg.max_depth {
            return Ok(CellIntegral {
                value: sum,
                moment: vals.iter().map(|v| v.1).sum(),
                error: diff,
                cells: 4,
                evaluations: 5 * n2,
                converged: diff <= tol,
            });
        }
        let mut total = CellIntegral {
            converged: true,
            evaluations: 5 * n2,
            ..Default::default()
        };
        for (k, v) in kids.iter().zip(vals) {
            total.add(&self.refine(k, v.0, depth + 1)?);
        }
        Ok(total)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let g = GaussLegendre::new(6);
        let s: f64 = g.on(0.0, 2.0).map(|(x, w)| w * x.powi(11)).sum();
        assert!((s - 2f64.powi(12) / 12.0).abs() < 1e-10);
        let w: f64 = g.weights.iter().sum();
        assert!((w - 2.0).abs() < 1e-14);
    }

    #[test]
    fn charts_meet_on_the_midline() {
        for r in [0.6f64, 1.0, 7.0] {
            let s = if r < 1.0 {
                // inverse of the band coordinate
                let v = (0.5 / r).acos();
                0.5f64.ln() * (1.0 - v / (PI / 3.0))
            } else {
                f64::ln(r)
            };
            let (a, _) = Chart::Left.map(s, 0.0);
            assert!((a.re - 0.5).abs() < 1e-12);
            assert!((a.norm() - r).abs() < 1e-12);
            let (b, _) = Chart::Right.map(s, 1.0);
            assert!((a - b).norm() < 1e-12, "{a} {b}");
        }
        let (p, _) = Chart::Right.map(0.0, 0.5);
        assert!((p - 2.0).norm() < 1e-15);
    }

    #[test]
    fn chart_inverse_round_trip() {
        for chart in [Chart::Left, Chart::Right, Chart::Polar] {
            for &(s, t) in &[(-3.0, 0.1), (-0.4, 0.3), (-0.2, 0.8), (0.7, 0.55), (2.0, 0.95)] {
                let l = chart.map(s, t).0;
                let (s2, t2) = chart.inverse(l);
                assert!((s - s2).abs() < 1e-12 && (t - t2).abs() < 1e-12, "{chart:?} {s} {t}");
            }
        }
    }

    #[test]
    fn polar_chart_area() {
        let rule = GaussLegendre::new(4);
        let mut a = 0.0;
        for (s, ws) in rule.on(2f64.ln(), 5f64.ln()) {
            for (t, wt) in rule.on(0.0, 1.0) {
                a += ws * wt * Chart::Polar.map(s, t).1;
            }
        }
        assert!((a - PI * 21.0).abs() < 1e-4 * a, "{a}");
    }

    #[test]
    fn area_of_excised_plane() {
        // ∫ over D(δ) of a Gaussian equals π minus the excised mass
        let f = |_: &Cell, pts: &[C64]| -> Result<Vec<f64>> {
            Ok(pts.iter().map(|l| (-l.norm_sqr()).exp()).collect())
        };
        let integ = Integrator::new(QuadConfig::default(), &f);
        let mut total = 0.0;
        for (_, c) in domain_cells(&[1e-3], 1.0, 4) {
            total += integ.integrate(&c).unwrap().value;
        }
        let excised = PI * (1.0 - (-1e-6f64).exp()) + PI * 1e-6 * (-1.0f64).exp();
        assert!((total - (PI - excised)).abs() < 1e-6, "{total}");
    }
}
