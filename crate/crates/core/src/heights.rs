//! Néron–Tate heights of sections as Betti-form masses, the torsion-count estimator, and the
//! height of the family itself.

use std::collections::BTreeMap;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::betti::density_holomorphic_at;
use crate::counting::{cell_counts, localize, BettiTracer, BoundaryConfig};
use crate::error::{Error, Result};
use crate::periods::{period_basis, Lambda};
use crate::quad::{domain_cells, Cell, CellIntegral, Integrator, QuadConfig};
use crate::sections::{SectionSpec, Side};

/// Excision radii of the punctures `0, 1, ∞`, from the coarsest down.
pub const DEFAULT_LEVELS: [f64; 4] = [1e-2, 1e-3, 1e-4, 1e-5];

/// Cells must sit this far inside the local period expansion at their center.
const LOCAL_CELL_FRACTION: f64 = 0.3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeightConfig {
    pub levels: Vec<f64>,
    pub quad: QuadConfig,
    pub max_ds: f64,
    pub t_pieces: usize,
}

impl Default for HeightConfig {
    fn default() -> Self {
        HeightConfig {
            levels: DEFAULT_LEVELS.to_vec(),
            quad: QuadConfig {
                order: 4,
                ..QuadConfig::default()
            },
            max_ds: 0.5,
            t_pieces: 4,
        }
    }
}

impl HeightConfig {
    /// Levels starting at `delta` and refined by decades down to `1e-5` (at least three levels).
    pub fn from_radius(delta: f64) -> Self {
        let mut levels = vec![delta];
        while levels.len() < 3 || *levels.last().unwrap() > 1.5e-5 {
            levels.push(levels.last().unwrap() * 0.1);
        }
        HeightConfig {
            levels,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeightMethod {
    Quadrature,
    TorsionCount,
    TorsionVerdict,
}

/// Mass of the excised domain `D(δ)`, and its coordinate in the tail expansion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelValue {
    pub delta: f64,
    pub t: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct HeightDiagnostics {
    pub levels: Vec<LevelValue>,
    pub quadrature_error: f64,
    pub extrapolation_error: f64,
    pub cells: usize,
    pub evaluations: usize,
    pub converged: bool,
    pub cover_degree: f64,
    /// Torsion counts in the smallest excised domain, `n = 1, 2, ...`.
    pub counts: Vec<i64>,
    /// Quadratic fit `a n² + b n + c` of the counts.
    pub fit: Option<[f64; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeightReport {
    pub value: f64,
    pub est_error: f64,
    pub method: HeightMethod,
    pub diagnostics: HeightDiagnostics,
}

/// Tail coordinate of an excision radius; masses near a puncture are power series in it.
pub fn tail_coordinate(delta: f64) -> f64 {
    1.0 / (16.0 / delta).ln()
}

/// Least-squares fit of `v = I + Σ c_p t^p` over the given powers, returning `I` and the spread
/// against a fit with the top power dropped on the finest levels.
pub fn extrapolate(ts: &[f64], vs: &[f64], powers: &[i32]) -> (f64, f64) {
    let powers = &powers[..powers.len().min(ts.len().saturating_sub(1))];
    let full = fit_constant(ts, vs, powers);
    if powers.is_empty() || ts.len() < 2 {
        return (full, 0.0);
    }
    let drop = &powers[..powers.len() - 1];
    let k = (drop.len() + 1).min(ts.len());
    let alt = fit_constant(&ts[ts.len() - k..], &vs[vs.len() - k..], drop);
    (full, (full - alt).abs())
}

fn fit_constant(ts: &[f64], vs: &[f64], powers: &[i32]) -> f64 {
    let m = powers.len() + 1;
    if ts.len() < m {
        return *vs.last().unwrap_or(&0.0);
    }
    let row = |t: f64| -> Vec<f64> {
        let mut r = vec![1.0];
        r.extend(powers.iter().map(|&p| t.powi(p)));
        r
    };
    let mut a = vec![vec![0.0; m + 1]; m];
    for (&t, &v) in ts.iter().zip(vs) {
        let r = row(t);
        for i in 0..m {
            for j in 0..m {
                a[i][j] += r[i] * r[j];
            }
            a[i][m] += r[i] * v;
        }
    }
    solve(a)[0]
}

fn solve(mut a: Vec<Vec<f64>>) -> Vec<f64> {
    let m = a.len();
    for c in 0..m {
        let p = (c..m).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        a.swap(c, p);
        for r in 0..m {
            if r != c && a[c][c] != 0.0 {
                let f = a[r][c] / a[c][c];
                for k in c..=m {
                    a[r][k] -= f * a[c][k];
                }
            }
        }
    }
    (0..m).map(|i| if a[i][i] != 0.0 { a[i][m] / a[i][i] } else { 0.0 }).collect()
}

/// Integrates a λ-plane density over each excised domain of the ladder.
fn ladder_integral(
    cfg: &HeightConfig,
    f: &dyn Fn(&Cell, &[C64]) -> Result<Vec<f64>>,
) -> Result<(Vec<LevelValue>, CellIntegral)> {
    let cells = localize(domain_cells(&cfg.levels, cfg.max_ds, cfg.t_pieces), LOCAL_CELL_FRACTION);
    let integrator = Integrator::new(cfg.quad, f);
    let mut per_level = vec![0.0; cfg.levels.len()];
    let mut total = CellIntegral {
        converged: true,
        ..Default::default()
    };
    for (lvl, cell) in &cells {
        let r = integrator.integrate(cell)?;
        per_level[*lvl] += r.value;
        total.add(&r);
    }
    let mut acc = 0.0;
    let levels = cfg
        .levels
        .iter()
        .zip(&per_level)
        .map(|(&d, &v)| {
            acc += v;
            LevelValue {
                delta: d,
                t: tail_coordinate(d),
                value: acc,
            }
        })
        .collect();
    Ok((levels, total))
}

fn section_density(spec: &SectionSpec) -> impl Fn(&Cell, &[C64]) -> Result<Vec<f64>> + '_ {
    move |cell: &Cell, pts: &[C64]| {
        let basis = period_basis(Lambda::new(cell.center())?, None)?;
        let side = if cell.upper() { Side::Upper } else { Side::Lower };
        let mut seed = None;
        pts.iter()
            .map(|&l| {
                let (d, z) = density_holomorphic_at(spec, &basis, l, side, seed)?;
                seed = Some(z);
                Ok(d)
            })
            .collect()
    }
}

/// Néron–Tate height of an algebraic section as the mass of the pulled-back Betti form.
///
/// Masses of the excised domains are extrapolated to the full base in the tail coordinate.
pub fn neron_tate_height(spec: &SectionSpec, cfg: &HeightConfig) -> Result<HeightReport> {
    spec.validate()?;
    if spec.is_transcendental() {
        return Err(Error::Unsupported(
            "the section is transcendental; its Néron-Tate height is undefined".into(),
        ));
    }
    let deg = spec.cover_degree();
    let f = section_density(spec);
    let (levels, total) = ladder_integral(cfg, &f)?;
    let ts: Vec<f64> = levels.iter().map(|l| l.t).collect();
    let vs: Vec<f64> = levels.iter().map(|l| l.value).collect();
    let (limit, ex_err) = extrapolate(&ts, &vs, &[2, 3]);
    Ok(HeightReport {
        value: deg * limit,
        est_error: deg * (ex_err + total.error),
        method: HeightMethod::Quadrature,
        diagnostics: HeightDiagnostics {
            levels,
            quadrature_error: total.error,
            extrapolation_error: ex_err,
            cells: total.cells,
            evaluations: total.evaluations,
            converged: total.converged,
            cover_degree: deg,
            counts: Vec::new(),
            fit: None,
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountConfig {
    pub levels: Vec<f64>,
    pub n_max: u32,
    pub boundary: BoundaryConfig,
    pub max_ds: f64,
    pub t_pieces: usize,
    /// Recount every cell with a coarser boundary and reject disagreeing cells that do not
    /// settle under refinement.
    pub check_stability: bool,
}

impl Default for CountConfig {
    fn default() -> Self {
        CountConfig {
            levels: DEFAULT_LEVELS.to_vec(),
            n_max: 24,
            boundary: BoundaryConfig::default(),
            max_ds: 0.5,
            t_pieces: 4,
            check_stability: true,
        }
    }
}

/// Least-squares quadratic `a n² + b n + c` through `counts[n-1]`.
pub fn quadratic_fit(counts: &[i64]) -> [f64; 3] {
    let mut a = vec![vec![0.0; 4]; 3];
    for (k, &c) in counts.iter().enumerate() {
        let n = (k + 1) as f64;
        let r = [n * n, n, 1.0];
        for i in 0..3 {
            for j in 0..3 {
                a[i][j] += r[i] * r[j];
            }
            a[i][3] += r[i] * c as f64;
        }
    }
    let s = solve(a);
    [s[0], s[1], s[2]]
}

/// Height from the growth of `#{λ ∈ D(δ) : [n]σ(λ) = Q}`, counted through the Betti map.
pub fn torsion_count_height(spec: &SectionSpec, cfg: &CountConfig) -> Result<HeightReport> {
    spec.validate()?;
    let deg = spec.cover_degree();
    if spec.is_torsion() {
        return Ok(HeightReport {
            value: 0.0,
            est_error: 0.0,
            method: HeightMethod::TorsionVerdict,
            diagnostics: HeightDiagnostics {
                converged: true,
                cover_degree: deg,
                ..Default::default()
            },
        });
    }
    if spec.is_transcendental() {
        return Err(Error::Unsupported(
            "the section is transcendental; its torsion set is not counted".into(),
        ));
    }
    let tracer = BettiTracer::new(spec, cfg.boundary);
    let cells = localize(domain_cells(&cfg.levels, cfg.max_ds, cfg.t_pieces), LOCAL_CELL_FRACTION);
    let n = cfg.n_max.max(3) as usize;
    let mut per_level = vec![vec![0i64; n]; cfg.levels.len()];
    let coarse_cfg = BoundaryConfig {
        max_step: 2.0 * cfg.boundary.max_step,
        max_dev: 2.0 * cfg.boundary.max_dev,
        ..cfg.boundary
    };
    let fine_cfg = BoundaryConfig {
        max_step: 0.25 * cfg.boundary.max_step,
        max_dev: 0.25 * cfg.boundary.max_dev,
        ..cfg.boundary
    };
    let coarse = BettiTracer::new(spec, coarse_cfg);
    let fine = BettiTracer::new(spec, fine_cfg);
    let mut suspect = Vec::new();
    for (lvl, cell) in &cells {
        let mut c = cell_counts(&tracer, cell, n as u32)?;
        if cfg.check_stability && cell_counts(&coarse, cell, n as u32)? != c {
            let f = cell_counts(&fine, cell, n as u32)?;
            if f != c {
                suspect.push(cell.center());
            }
            c = f;
        }
        for (dst, v) in per_level[*lvl].iter_mut().zip(c) {
            *dst += v;
        }
    }
    if !suspect.is_empty() {
        let list: Vec<String> = suspect.iter().map(|z| format!("{z:.6}")).collect();
        return Err(Error::numeric(
            "torsion count",
            format!("counts unstable under boundary refinement in cells centered at {}", list.join(", ")),
        ));
    }
    let mut acc = vec![0i64; n];
    let mut levels = Vec::new();
    let mut fit = [0.0; 3];
    for (d, counts) in cfg.levels.iter().zip(&per_level) {
        for (a, c) in acc.iter_mut().zip(counts) {
            *a += c;
        }
        fit = quadratic_fit(&acc);
        levels.push(LevelValue {
            delta: *d,
            t: tail_coordinate(*d),
            value: fit[0],
        });
    }
    let ts: Vec<f64> = levels.iter().map(|l| l.t).collect();
    let vs: Vec<f64> = levels.iter().map(|l| l.value).collect();
    // integer counts are too coarse to resolve a cubic tail term
    let (limit, ex_err) = extrapolate(&ts, &vs, &[2]);
    // residual of the fit relative to n², at the largest n
    let nf = n as f64;
    let resid = acc
        .iter()
        .enumerate()
        .map(|(k, &c)| {
            let m = (k + 1) as f64;
            (c as f64 - (fit[0] * m * m + fit[1] * m + fit[2])).abs()
        })
        .fold(0.0, f64::max)
        / (nf * nf);
    Ok(HeightReport {
        value: deg * limit,
        est_error: deg * (ex_err + resid),
        method: HeightMethod::TorsionCount,
        diagnostics: HeightDiagnostics {
            levels,
            quadrature_error: resid,
            extrapolation_error: ex_err,
            cells: cells.len(),
            evaluations: 0,
            converged: true,
            cover_degree: deg,
            counts: acc,
            fit: Some(fit),
        },
    })
}

/// Families whose scheme height can be computed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Family {
    Legendre,
    /// Isotrivial family with constant period ratio.
    ConstantTau { tau: C64 },
}

/// Normalizations of the hyperbolic metric on the upper half plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub name: &'static str,
    /// Factor `c` in `c|dτ|²/(Im τ)²`.
    pub factor: f64,
}

pub const NORMALIZATIONS: [Normalization; 3] = [
    Normalization {
        name: "curvature -1",
        factor: 1.0,
    },
    Normalization {
        name: "curvature -4",
        factor: 0.25,
    },
    Normalization {
        name: "gauss-bonnet 1/(2pi)",
        factor: 0.5 / std::f64::consts::PI,
    },
];

/// Euler characteristic of the base `P¹ \ {0, 1, ∞}` (in absolute value).
pub const BASE_EULER_CHARACTERISTIC: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizedHeight {
    pub normalization: String,
    pub value: f64,
    pub est_error: f64,
    /// Whether `value ≤ |χ(B)|` within the error.
    pub within_bound: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeHeightReport {
    /// Hyperbolic area of the period map image, curvature `-1` units.
    pub area: f64,
    pub est_error: f64,
    pub heights: Vec<NormalizedHeight>,
    pub levels: Vec<LevelValue>,
    pub default_normalization: String,
}

/// Hyperbolic-area density of the period map, `|W|²/(Im ρ̄₁ρ₂)²`.
fn period_map_density(cell: &Cell, pts: &[C64]) -> Result<Vec<f64>> {
    let basis = period_basis(Lambda::new(cell.center())?, None)?;
    pts.iter()
        .map(|&l| {
            let j = basis.jet_at(l)?;
            Ok(j.wronskian().norm_sqr() / j.covolume().powi(2))
        })
        .collect()
}

/// Height of the family: pullback mass of the hyperbolic metric under the period map.
pub fn scheme_height(family: Family, cfg: &HeightConfig) -> Result<SchemeHeightReport> {
    let (area, err, levels) = match family {
        Family::ConstantTau { tau } => {
            if tau.im <= 0.0 || !tau.is_finite() {
                return Err(Error::Input(format!("period ratio {tau} is not in the upper half plane")));
            }
            (0.0, 0.0, Vec::new())
        }
        Family::Legendre => {
            let (levels, total) = ladder_integral(cfg, &period_map_density)?;
            let ts: Vec<f64> = levels.iter().map(|l| l.t).collect();
            let vs: Vec<f64> = levels.iter().map(|l| l.value).collect();
            let (limit, ex) = extrapolate(&ts, &vs, &[1, 2, 3]);
            (limit, ex + total.error, levels)
        }
    };
    let heights = NORMALIZATIONS
        .iter()
        .map(|n| NormalizedHeight {
            normalization: n.name.to_string(),
            value: n.factor * area,
            est_error: n.factor * err,
            within_bound: n.factor * (area - err) <= BASE_EULER_CHARACTERISTIC + 1e-9,
        })
        .collect();
    Ok(SchemeHeightReport {
        area,
        est_error: err,
        heights,
        levels,
        default_normalization: NORMALIZATIONS[1].name.to_string(),
    })
}

/// Mordell–Weil rank `ρ - 2 - Σ (n_λ - 1)` from the Picard number of the surface and the
/// component counts of its reducible fibers.
pub fn shioda_tate_rank(picard_number: i64, fiber_components: &BTreeMap<String, i64>) -> Result<i64> {
    if picard_number < 2 {
        return Err(Error::Input(format!("Picard number {picard_number} is below 2")));
    }
    if let Some((k, v)) = fiber_components.iter().find(|(_, &v)| v < 1) {
        return Err(Error::Input(format!("fiber over {k} has {v} components")));
    }
    let r = picard_number - 2 - fiber_components.values().map(|n| n - 1).sum::<i64>();
    if r < 0 {
        return Err(Error::Input(format!(
            "inconsistent data: rank {r} is negative for Picard number {picard_number}"
        )));
    }
    Ok(r)
}

/// Fiber data of the blown-up Legendre surface: Picard number 4, three components over `∞`.
pub fn legendre_fiber_data() -> (i64, BTreeMap<String, i64>) {
    (4, BTreeMap::from([("inf".to_string(), 3)]))
}
