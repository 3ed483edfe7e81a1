//! Counting preimages of lattice points under the Betti map of a section.
//!
//! A cell of the λ-plane is traced counter-clockwise; the lifted Betti coordinates along its
//! boundary form a closed polygon, and the number of points of `(1/n)ℤ²` it encloses (with
//! winding multiplicity) is the number of `λ` in the cell where `[n]σ(λ) = Q`.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::betti::LocalFrame;
use crate::error::{Error, Result};
use crate::periods::{lattice_coordinates, period_basis, puncture_distance, Lambda, PeriodBasis};
use crate::quad::Cell;
use crate::sections::{SectionSpec, Side};

/// Offset of the counted lattice, keeping lattice points off polygon edges that run along
/// symmetry lines.
pub const LATTICE_JITTER: (f64, f64) = (1.313e-7, -2.718e-7);

/// Signed number of integer points enclosed by the closed polygon `poly - offset`.
///
/// Every horizontal line `y = j` is crossed by the polygon; the winding number of `(i, j)` is the
/// signed count of crossings to its right, so the sum over `i` telescopes to
/// `Σ dir·⌈x_crossing⌉`.
pub fn enclosed_lattice_points(poly: &[(f64, f64)], offset: (f64, f64)) -> i64 {
    let n = poly.len();
    let mut total: i64 = 0;
    for k in 0..n {
        let (x0, y0) = (poly[k].0 - offset.0, poly[k].1 - offset.1);
        let q = poly[(k + 1) % n];
        let (x1, y1) = (q.0 - offset.0, q.1 - offset.1);
        if y0 == y1 {
            continue;
        }
        let (lo, hi, dir) = if y1 > y0 { (y0, y1, 1) } else { (y1, y0, -1) };
        // lines j with lo <= j < hi
        let j0 = lo.ceil() as i64;
        let j1 = hi.ceil() as i64;
        for j in j0..j1 {
            let x = x0 + (j as f64 - y0) * (x1 - x0) / (y1 - y0);
            total += dir * x.ceil() as i64;
        }
    }
    total
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryConfig {
    /// Largest Betti step between consecutive boundary samples.
    pub max_step: f64,
    /// Largest distance of a midpoint from its chord.
    pub max_dev: f64,
    pub initial_per_edge: usize,
    pub max_depth: u32,
}

impl Default for BoundaryConfig {
    fn default() -> Self {
        BoundaryConfig {
            max_step: 0.01,
            max_dev: 2e-4,
            initial_per_edge: 8,
            max_depth: 30,
        }
    }
}

/// A section traced along chart cells with a local period basis per cell.
pub struct BettiTracer<'a> {
    pub spec: &'a SectionSpec,
    pub cfg: BoundaryConfig,
}

#[derive(Debug, Clone, Copy)]
struct Sample {
    u: f64,
    z: C64,
    beta: (f64, f64),
}

impl<'a> BettiTracer<'a> {
    pub fn new(spec: &'a SectionSpec, cfg: BoundaryConfig) -> Self {
        BettiTracer { spec, cfg }
    }

    fn sample(&self, basis: &PeriodBasis, cell: &Cell, side: Side, u: f64, seed: Option<C64>) -> Result<Sample> {
        let (s, t) = cell.boundary(u);
        let l = cell.chart.map(s, t).0;
        if let Some((z, _)) = self.spec.closed_form_lie(l) {
            let jet = basis.jet_at(l)?;
            return Ok(Sample {
                u,
                z,
                beta: lattice_coordinates(jet.rho1, jet.rho2, z),
            });
        }
        let frame = LocalFrame::new(basis, l)?;
        let z = self.spec.sheet_coordinate(frame.lambda, &frame.lattice, side, seed)?;
        Ok(Sample { u, z, beta: frame.betti(z) })
    }

    /// Closed polygon of lifted Betti coordinates along the cell boundary.
    pub fn polygon(&self, cell: &Cell, basis: &PeriodBasis) -> Result<Vec<(f64, f64)>> {
        let side = if cell.upper() { Side::Upper } else { Side::Lower };
        let m = 4 * self.cfg.initial_per_edge.max(1);
        let mut coarse = Vec::with_capacity(m + 1);
        let mut seed = None;
        for k in 0..=m {
            let u = 4.0 * k as f64 / m as f64;
            let smp = self.sample(basis, cell, side, u.min(4.0 - 1e-15), seed)?;
            seed = Some(smp.z);
            coarse.push(smp);
        }
        // the lift must close up: no puncture or branch point inside the cell
        let (a, b) = (coarse[0].beta, coarse[m].beta);
        if (a.0 - b.0).abs() + (a.1 - b.1).abs() > 1e-6 {
            return Err(Error::numeric(
                "boundary lift",
                format!("Betti lift does not close around cell centered at {}", cell.center()),
            ));
        }
        let mut out = Vec::new();
        for w in coarse.windows(2) {
            out.push(w[0].beta);
            self.refine(basis, cell, side, w[0], w[1], 0, &mut out)?;
        }
        Ok(out)
    }

    #[allow(clippy::too_many_arguments)]
    fn refine(
        &self,
        basis: &PeriodBasis,
        cell: &Cell,
        side: Side,
        a: Sample,
        b: Sample,
        depth: u32,
        out: &mut Vec<(f64, f64)>,
    ) -> Result<()> {
        let step = (b.beta.0 - a.beta.0).hypot(b.beta.1 - a.beta.1);
        if depth >= self.cfg.max_depth || (step <= self.cfg.max_step && depth > 0 && step < 1e-12) {
            return Ok(());
        }
        let mid = self.sample(basis, cell, side, 0.5 * (a.u + b.u), Some(a.z))?;
        let cx = 0.5 * (a.beta.0 + b.beta.0);
        let cy = 0.5 * (a.beta.1 + b.beta.1);
        let dev = (mid.beta.0 - cx).hypot(mid.beta.1 - cy);
        if step <= self.cfg.max_step && dev <= self.cfg.max_dev {
            return Ok(());
        }
        self.refine(basis, cell, side, a, mid, depth + 1, out)?;
        out.push(mid.beta);
        self.refine(basis, cell, side, mid, b, depth + 1, out)
    }
}

/// Splits cells until each fits well inside the local period expansion around its center.
pub fn localize(cells: Vec<(usize, Cell)>, fraction: f64) -> Vec<(usize, Cell)> {
    let mut out = Vec::new();
    let mut stack: Vec<(usize, Cell)> = cells.into_iter().rev().collect();
    while let Some((lvl, c)) = stack.pop() {
        let d = puncture_distance(c.center());
        if c.radius() > fraction * d {
            for k in c.split().into_iter().rev() {
                stack.push((lvl, k));
            }
        } else {
            out.push((lvl, c));
        }
    }
    out
}

/// Lattice-point counts for `n = 1..=n_max` inside one cell.
pub fn cell_counts(tracer: &BettiTracer, cell: &Cell, n_max: u32) -> Result<Vec<i64>> {
    let basis = period_basis(Lambda::new(cell.center())?, None)?;
    let poly = tracer.polygon(cell, &basis)?;
    let mut counts = Vec::with_capacity(n_max as usize);
    let mut scaled = poly.clone();
    for n in 1..=n_max {
        let nf = n as f64;
        for (dst, src) in scaled.iter_mut().zip(&poly) {
            *dst = (src.0 * nf, src.1 * nf);
        }
        counts.push(enclosed_lattice_points(&scaled, LATTICE_JITTER));
    }
    Ok(counts)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(x0: f64, y0: f64, side: f64, ccw: bool) -> Vec<(f64, f64)> {
        let mut p = vec![(x0, y0), (x0 + side, y0), (x0 + side, y0 + side), (x0, y0 + side)];
        if !ccw {
            p.reverse();
        }
        p
    }

    #[test]
    fn counts_points_in_squares() {
        assert_eq!(enclosed_lattice_points(&square(0.5, 0.5, 1.0, true), (0.0, 0.0)), 1);
        assert_eq!(enclosed_lattice_points(&square(0.5, 0.5, 1.0, false), (0.0, 0.0)), -1);
        assert_eq!(enclosed_lattice_points(&square(-2.5, 0.1, 3.0, true), (0.0, 0.0)), 9);
        assert_eq!(enclosed_lattice_points(&square(0.1, 0.1, 0.5, true), (0.0, 0.0)), 0);
    }

    #[test]
    fn doubly_wound_curve_counts_twice() {
        let mut p = Vec::new();
        for k in 0..400 {
            let a = 4.0 * std::f64::consts::PI * k as f64 / 400.0;
            p.push((0.3 + 1.7 * a.cos(), 0.2 + 1.7 * a.sin()));
        }
        // points within radius 1.7 of (0.3, 0.2)
        let mut inside = 0;
        for i in -3..=3 {
            for j in -3..=3 {
                if ((i as f64 - 0.3).powi(2) + (j as f64 - 0.2).powi(2)).sqrt() < 1.7 {
                    inside += 1;
                }
            }
        }
        assert_eq!(enclosed_lattice_points(&p, (0.0, 0.0)), 2 * inside);
    }

    #[test]
    fn masser_cell_polygon_closes_and_counts() {
        let spec = SectionSpec::masser();
        let tracer = BettiTracer::new(&spec, BoundaryConfig::default());
        let cell = Cell {
            chart: crate::quad::Chart::Left,
            s0: -0.2,
            s1: 0.0,
            t0: 0.3,
            t1: 0.4,
        };
        let counts = cell_counts(&tracer, &cell, 12).unwrap();
        assert!(counts.iter().all(|&c| c >= 0));
        assert!(counts[11] >= counts[0]);
    }
}
