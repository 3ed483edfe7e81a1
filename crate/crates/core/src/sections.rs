//! Holomorphic sections of the Legendre scheme, described declaratively and evaluated fiberwise.

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::curve::{self, on_curve, CurvePoint, FiberLattice};
use crate::error::{Error, Result};
use crate::periods::{Lambda, PeriodBasis};

/// Highest polynomial degree accepted in a section document.
pub const MAX_DEGREE: usize = 64;
/// Tolerance for the rational identity check of [`SectionSpec::RationalXY`].
pub const IDENTITY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TorsionName {
    P1,
    P2,
    P3,
    Q,
}

/// Which square root is taken for Masser's section on the slit plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Sheet {
    #[default]
    Principal,
    Opposite,
}

/// Which side of a branch cut a point on the cut belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Upper,
    Lower,
    /// Refuse points on the cut.
    Strict,
}

fn default_x0() -> f64 {
    2.0
}

fn default_delta() -> f64 {
    0.1
}

/// A section of `𝓔 → B`.
///
/// JSON uses an internal `kind` tag; complex coefficients are `[re, im]` pairs, lowest degree
/// first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum SectionSpec {
    NamedTorsion {
        point: TorsionName,
    },
    RationalXY {
        x_num: Vec<C64>,
        x_den: Vec<C64>,
        y_num: Vec<C64>,
        y_den: Vec<C64>,
    },
    /// `λ ↦ (x₀, √(x₀(x₀-1)(x₀-λ)))` on the plane slit along `[x₀, ∞)`.
    MasserBaseChange {
        #[serde(default = "default_x0")]
        x0: f64,
        #[serde(default)]
        sheet: Sheet,
        #[serde(default)]
        double_cover: bool,
    },
    /// `λ ↦ exp_λ(φ(λ))`.
    TranscendentalExp {
        phi: Vec<C64>,
    },
    /// `x = φ(λ)/λ²` with the branch of `y` that is one-valued on `0 < |λ| < δ`.
    LocalPuncture {
        phi: Vec<C64>,
        #[serde(default = "default_delta")]
        delta: f64,
    },
    /// `[n]σ`.
    Multiple {
        n: i64,
        of: Box<SectionSpec>,
    },
}

/// Horner evaluation of a dense polynomial and its derivative.
pub fn poly_eval(coeffs: &[C64], t: C64) -> (C64, C64) {
    let mut p = C64::new(0.0, 0.0);
    let mut dp = C64::new(0.0, 0.0);
    for &c in coeffs.iter().rev() {
        dp = dp * t + p;
        p = p * t + c;
    }
    (p, dp)
}

fn is_zero_poly(c: &[C64]) -> bool {
    c.iter().all(|v| v.norm() == 0.0)
}

impl SectionSpec {
    pub fn masser() -> Self {
        SectionSpec::MasserBaseChange {
            x0: 2.0,
            sheet: Sheet::Principal,
            double_cover: false,
        }
    }

    pub fn torsion(point: TorsionName) -> Self {
        SectionSpec::NamedTorsion { point }
    }

    pub fn exp_of(phi: Vec<C64>) -> Self {
        SectionSpec::TranscendentalExp { phi }
    }

    pub fn is_torsion(&self) -> bool {
        match self {
            SectionSpec::NamedTorsion { .. } => true,
            SectionSpec::Multiple { n, of } => *n == 0 || of.is_torsion(),
            _ => false,
        }
    }

    pub fn is_transcendental(&self) -> bool {
        match self {
            SectionSpec::TranscendentalExp { .. } => true,
            SectionSpec::Multiple { n, of } => *n != 0 && of.is_transcendental(),
            _ => false,
        }
    }

    /// Factor applied to heights computed on the slit plane.
    pub fn cover_degree(&self) -> f64 {
        match self {
            SectionSpec::MasserBaseChange { double_cover: true, .. } => 2.0,
            SectionSpec::Multiple { of, .. } => of.cover_degree(),
            _ => 1.0,
        }
    }

    /// The branch cut in the λ-plane, as the left end of a ray `[a, ∞)` on the real axis.
    pub fn cut(&self) -> Option<f64> {
        match self {
            SectionSpec::MasserBaseChange { x0, .. } => Some(*x0),
            SectionSpec::Multiple { of, .. } => of.cut(),
            _ => None,
        }
    }

    /// Checks the invariants of the description.
    pub fn validate(&self) -> Result<()> {
        let degree_ok = |name: &str, c: &[C64]| -> Result<()> {
            if c.len() > MAX_DEGREE + 1 {
                return Err(Error::Input(format!(
                    "{name} has degree {} > {MAX_DEGREE}",
                    c.len() - 1
                )));
            }
            if c.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
                return Err(Error::Input(format!("{name} has non-finite coefficients")));
            }
            Ok(())
        };
        match self {
            SectionSpec::NamedTorsion { .. } => Ok(()),
            SectionSpec::RationalXY {
                x_num,
                x_den,
                y_num,
                y_den,
            } => {
                for (n, c) in [("x_num", x_num), ("x_den", x_den), ("y_num", y_num), ("y_den", y_den)] {
                    degree_ok(n, c)?;
                }
                if is_zero_poly(x_den) || is_zero_poly(y_den) {
                    return Err(Error::Input("zero denominator".into()));
                }
                let residual = rational_identity_residual(x_num, x_den, y_num, y_den, 30, 17);
                if residual > IDENTITY_TOL {
                    return Err(Error::Input(format!(
                        "y² - x(x-1)(x-λ) does not vanish identically (relative residual {residual:.3e})"
                    )));
                }
                Ok(())
            }
            SectionSpec::MasserBaseChange { x0, .. } => {
                if !x0.is_finite() || *x0 <= 1.0 {
                    return Err(Error::Input(format!("x0 = {x0} must be a finite real > 1")));
                }
                Ok(())
            }
            SectionSpec::TranscendentalExp { phi } => {
                degree_ok("phi", phi)?;
                if phi.iter().skip(1).all(|c| c.norm() == 0.0) {
                    return Err(Error::Input("phi must be non-constant".into()));
                }
                Ok(())
            }
            SectionSpec::LocalPuncture { phi, delta } => {
                degree_ok("phi", phi)?;
                if phi.first().map_or(true, |c| c.norm() == 0.0) {
                    return Err(Error::Input("phi(0) must be non-zero".into()));
                }
                if !(*delta > 0.0) || !delta.is_finite() {
                    return Err(Error::Input(format!("delta = {delta} must be positive")));
                }
                check_one_valued(phi, *delta)
            }
            SectionSpec::Multiple { of, .. } => of.validate(),
        }
    }

    /// The section at `lambda`; points on a branch cut are assigned according to `side`.
    pub fn evaluate_on(&self, lambda: Lambda, lat: &FiberLattice, side: Side) -> Result<CurvePoint> {
        let l = lambda.value();
        match self {
            SectionSpec::NamedTorsion { point } => Ok(named_point(lambda, *point)),
            SectionSpec::RationalXY {
                x_num,
                x_den,
                y_num,
                y_den,
            } => {
                let xd = poly_eval(x_den, l).0;
                let yd = poly_eval(y_den, l).0;
                if xd.norm() == 0.0 || yd.norm() == 0.0 {
                    return Ok(CurvePoint::Infinity);
                }
                Ok(CurvePoint::affine(poly_eval(x_num, l).0 / xd, poly_eval(y_num, l).0 / yd))
            }
            SectionSpec::MasserBaseChange { x0, sheet, .. } => {
                let y = masser_y(*x0, *sheet, l, side)?;
                Ok(CurvePoint::affine(C64::new(*x0, 0.0), y))
            }
            SectionSpec::TranscendentalExp { phi } => Ok(lat.exp(poly_eval(phi, l).0)),
            SectionSpec::LocalPuncture { phi, delta } => {
                if l.norm() >= *delta {
                    return Err(Error::Domain(format!(
                        "|lambda| = {} is outside the local disk of radius {delta}",
                        l.norm()
                    )));
                }
                let (x, y) = local_point(phi, l);
                Ok(CurvePoint::affine(x, y))
            }
            SectionSpec::Multiple { n, of } => {
                let p = of.evaluate_on(lambda, lat, side)?;
                Ok(curve::mul_n(lambda, *n, &p))
            }
        }
    }

    pub fn evaluate(&self, lambda: Lambda, basis: &PeriodBasis) -> Result<CurvePoint> {
        let lat = FiberLattice::new(lambda.value(), basis.rho1, basis.rho2)?;
        self.evaluate_on(lambda, &lat, Side::Strict)
    }

    /// The Lie coordinate of the section, continued from `seed` when given.
    ///
    /// Exact for torsion and exponential sections; otherwise the elliptic logarithm nearest the
    /// seed.
    pub fn lie_coordinate(
        &self,
        lambda: Lambda,
        lat: &FiberLattice,
        side: Side,
        seed: Option<C64>,
    ) -> Result<C64> {
        match self {
            SectionSpec::NamedTorsion { point } => Ok(match point {
                TorsionName::Q => C64::new(0.0, 0.0),
                TorsionName::P1 => lat.half_periods()[0],
                TorsionName::P2 => lat.half_periods()[1],
                TorsionName::P3 => lat.half_periods()[2],
            }),
            SectionSpec::TranscendentalExp { phi } => Ok(poly_eval(phi, lambda.value()).0),
            SectionSpec::Multiple { n, of } => {
                let inner_seed = seed.map(|s| s / *n as f64);
                if *n == 0 {
                    return Ok(C64::new(0.0, 0.0));
                }
                Ok(of.lie_coordinate(lambda, lat, side, inner_seed)? * *n as f64)
            }
            SectionSpec::MasserBaseChange { .. } => {
                let p = self.evaluate_on(lambda, lat, side)?;
                match seed {
                    // the other sheet is -z; follow whichever is continuous with the seed
                    Some(s) => {
                        let a = lat.log_near(&p, s)?;
                        let b = s - lat.reduce(s + a);
                        Ok(if (a - s).norm() <= (b - s).norm() { a } else { b })
                    }
                    None => lat.log(&p),
                }
            }
            _ => {
                let p = self.evaluate_on(lambda, lat, side)?;
                match seed {
                    Some(s) => lat.log_near(&p, s),
                    None => lat.log(&p),
                }
            }
        }
    }

    /// `(z, z')` when the Lie coordinate is a closed-form function of `λ` alone.
    pub fn closed_form_lie(&self, l: C64) -> Option<(C64, C64)> {
        match self {
            SectionSpec::TranscendentalExp { phi } => Some(poly_eval(phi, l)),
            SectionSpec::Multiple { n, of } => of.closed_form_lie(l).map(|(z, d)| (z * *n as f64, d * *n as f64)),
            _ => None,
        }
    }

    /// The Lie coordinate on the fixed sheet of [`evaluate_on`](Self::evaluate_on), lifted
    /// next to `seed`.
    pub fn sheet_coordinate(
        &self,
        lambda: Lambda,
        lat: &FiberLattice,
        side: Side,
        seed: Option<C64>,
    ) -> Result<C64> {
        match self {
            SectionSpec::NamedTorsion { .. } | SectionSpec::TranscendentalExp { .. } => {
                self.lie_coordinate(lambda, lat, side, seed)
            }
            _ => {
                let p = self.evaluate_on(lambda, lat, side)?;
                match seed {
                    Some(s) => lat.log_near(&p, s),
                    None => lat.log(&p),
                }
            }
        }
    }
}

/// The marked points of order two and the zero section.
pub fn named_point(lambda: Lambda, name: TorsionName) -> CurvePoint {
    let [p1, p2, p3] = curve::two_torsion_points(lambda);
    match name {
        TorsionName::P1 => p1,
        TorsionName::P2 => p2,
        TorsionName::P3 => p3,
        TorsionName::Q => CurvePoint::Infinity,
    }
}

/// `√(x₀(x₀-1)(x₀-λ))` continuous on the plane slit along `[x₀, ∞)`.
fn masser_y(x0: f64, sheet: Sheet, l: C64, side: Side) -> Result<C64> {
    let k = x0 * (x0 - 1.0);
    let arg = (C64::new(x0, 0.0) - l) * k;
    let sign = match sheet {
        Sheet::Principal => 1.0,
        Sheet::Opposite => -1.0,
    };
    let on_cut = l.im == 0.0 && l.re >= x0;
    let root = if on_cut {
        let mag = arg.norm().sqrt();
        let upper = match side {
            Side::Upper => true,
            Side::Lower => false,
            Side::Strict => {
                if l.re == x0 {
                    return Ok(C64::new(0.0, 0.0));
                }
                return Err(Error::Branch(format!(
                    "lambda = {l} lies on the branch cut [{x0}, ∞); choose a side"
                )));
            }
        };
        if mag == 0.0 {
            C64::new(0.0, 0.0)
        } else if upper {
            C64::new(0.0, -mag)
        } else {
            C64::new(0.0, mag)
        }
    } else {
        arg.sqrt()
    };
    Ok(root * sign)
}

fn local_g(phi: &[C64], l: C64) -> C64 {
    let p = poly_eval(phi, l).0;
    let l2 = l * l;
    p * (p - l2) * (p - l2 * l)
}

fn local_point(phi: &[C64], l: C64) -> (C64, C64) {
    let g0 = local_g(phi, C64::new(0.0, 0.0));
    let s0 = g0.sqrt();
    let g = local_g(phi, l);
    let mut s = g.sqrt();
    if (s / s0).re < 0.0 {
        s = -s;
    }
    let l2 = l * l;
    (poly_eval(phi, l).0 / l2, s / (l2 * l))
}

fn check_one_valued(phi: &[C64], delta: f64) -> Result<()> {
    let g0 = local_g(phi, C64::new(0.0, 0.0));
    let mut worst: f64 = 0.0;
    for k in 0..256 {
        let t = 2.0 * std::f64::consts::PI * k as f64 / 256.0;
        for frac in [0.25, 0.5, 0.75, 1.0] {
            let l = C64::from_polar(delta * frac, t);
            worst = worst.max((local_g(phi, l) / g0 - 1.0).norm());
        }
    }
    if worst >= 0.9 {
        return Err(Error::Domain(format!(
            "the square root is not one-valued on |λ| < {delta} (max |g/g(0) - 1| = {worst:.3}); \
             reduce delta to about {:.3e}",
            delta * 0.5
        )));
    }
    Ok(())
}

/// Laurent data of a local section at `λ = 0`: `x = Σ x[k] λ^(k-2)` and `y = Σ y[k] λ^(k-3)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaurentData {
    pub x: Vec<C64>,
    pub y: Vec<C64>,
}

impl LaurentData {
    pub fn eval(&self, l: C64) -> (C64, C64) {
        let x = poly_eval(&self.x, l).0 / (l * l);
        let y = poly_eval(&self.y, l).0 / (l * l * l);
        (x, y)
    }
}

fn poly_mul(a: &[C64], b: &[C64], n: usize) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); n];
    for (i, &ai) in a.iter().enumerate().take(n) {
        for (j, &bj) in b.iter().enumerate().take(n - i) {
            out[i + j] += ai * bj;
        }
    }
    out
}

/// Laurent expansion of the local section `x = φ(λ)/λ²` to `n_terms` coefficients.
pub fn local_section_expand(phi: &[C64], n_terms: usize) -> Result<LaurentData> {
    if phi.first().map_or(true, |c| c.norm() == 0.0) {
        return Err(Error::Input("phi(0) must be non-zero".into()));
    }
    let n = n_terms.max(1);
    let mut p: Vec<C64> = phi.iter().copied().take(n).collect();
    p.resize(n, C64::new(0.0, 0.0));
    let mut a = p.clone();
    if n > 2 {
        a[2] -= 1.0;
    }
    let mut b = p.clone();
    if n > 3 {
        b[3] -= 1.0;
    }
    let g = poly_mul(&poly_mul(&p, &a, n), &b, n);
    // s² = g with s(0) the principal root of g(0)
    let mut s = vec![C64::new(0.0, 0.0); n];
    s[0] = g[0].sqrt();
    for k in 1..n {
        let mut acc = g[k];
        for j in 1..k {
            acc -= s[j] * s[k - j];
        }
        s[k] = acc / (2.0 * s[0]);
    }
    Ok(LaurentData { x: p, y: s })
}

/// Group table of `{Q, P₁, P₂, P₃}`: `table[i][j]` is the index of the sum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TorsionTable {
    pub labels: [TorsionName; 4],
    pub points: [CurvePoint; 4],
    pub table: [[usize; 4]; 4],
}

pub fn two_torsion_table(lambda: Lambda) -> Result<TorsionTable> {
    let labels = [TorsionName::Q, TorsionName::P1, TorsionName::P2, TorsionName::P3];
    let points = labels.map(|n| named_point(lambda, n));
    let mut table = [[0usize; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            let s = curve::add(lambda, &points[i], &points[j]);
            let k = points
                .iter()
                .position(|p| p.chart_distance(&s) < 1e-12)
                .ok_or_else(|| Error::numeric("two-torsion table", format!("sum {s:?} not in the table")))?;
            table[i][j] = k;
        }
    }
    Ok(TorsionTable { labels, points, table })
}

/// Maximum relative residual of `y² - x(x-1)(x-λ)` at `samples` seeded random points.
pub fn rational_identity_residual(
    x_num: &[C64],
    x_den: &[C64],
    y_num: &[C64],
    y_den: &[C64],
    samples: usize,
    seed: u64,
) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let mut taken = 0;
    while taken < samples {
        let l = C64::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
        let xd = poly_eval(x_den, l).0;
        let yd = poly_eval(y_den, l).0;
        if xd.norm() < 1e-6 || yd.norm() < 1e-6 {
            continue;
        }
        let Ok(lam) = Lambda::new(l) else { continue };
        taken += 1;
        let p = CurvePoint::affine(poly_eval(x_num, l).0 / xd, poly_eval(y_num, l).0 / yd);
        worst = worst.max(on_curve(lam, &p).1);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::periods::period_basis;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn eval(spec: &SectionSpec, l: C64) -> CurvePoint {
        let lam = Lambda::new(l).unwrap();
        let b = period_basis(lam, None).unwrap();
        spec.evaluate(lam, &b).unwrap()
    }

    #[test]
    fn p3_at_five() {
        let p = eval(&SectionSpec::torsion(TorsionName::P3), c(5.0));
        assert_eq!(p, CurvePoint::affine(c(5.0), c(0.0)));
    }

    #[test]
    fn masser_at_one_is_principal_root() {
        let lam = Lambda::new(C64::new(1.0, 1e-3)).unwrap();
        let b = period_basis(lam, None).unwrap();
        let spec = SectionSpec::masser();
        let near = spec.evaluate(lam, &b).unwrap();
        let CurvePoint::Affine { x, y } = near else { panic!() };
        assert_eq!(x, c(2.0));
        assert!((y - c(2f64.sqrt())).norm() < 1e-3);
        assert_eq!(masser_y(2.0, Sheet::Principal, c(1.0), Side::Strict).unwrap(), c(2f64.sqrt()));
    }

    #[test]
    fn masser_sides_of_the_cut() {
        let up = masser_y(2.0, Sheet::Principal, c(3.0), Side::Upper).unwrap();
        let down = masser_y(2.0, Sheet::Principal, c(3.0), Side::Lower).unwrap();
        let above = masser_y(2.0, Sheet::Principal, C64::new(3.0, 1e-9), Side::Strict).unwrap();
        let below = masser_y(2.0, Sheet::Principal, C64::new(3.0, -1e-9), Side::Strict).unwrap();
        assert!((up - above).norm() < 1e-6);
        assert!((down - below).norm() < 1e-6);
        assert!(masser_y(2.0, Sheet::Principal, c(3.0), Side::Strict).is_err());
    }

    #[test]
    fn torsion_table_is_klein_four() {
        let lam = Lambda::new(C64::new(0.3, -2.0)).unwrap();
        let t = two_torsion_table(lam).unwrap();
        for i in 0..4 {
            assert_eq!(t.table[i][i], 0);
            assert_eq!(t.table[0][i], i);
            for j in 0..4 {
                assert_eq!(t.table[i][j], t.table[j][i]);
            }
        }
        assert_eq!(t.table[1][2], 3);
    }

    #[test]
    fn local_section_leading_terms() {
        let d = local_section_expand(&[c(1.0)], 6).unwrap();
        assert_eq!(d.x[0], c(1.0));
        assert_eq!(d.y[0], c(1.0));
        let l = c(1e-2);
        let lam = Lambda::new(l).unwrap();
        let spec = SectionSpec::LocalPuncture { phi: vec![c(1.0)], delta: 0.1 };
        let b = PeriodBasis::from_periods(lam, c(1.0), C64::new(0.0, 1.0)).unwrap();
        let p = spec.evaluate(lam, &b).unwrap();
        assert!(on_curve(lam, &p).1 < 1e-9);
    }

    #[test]
    fn local_section_rejects_large_disk() {
        let spec = SectionSpec::LocalPuncture { phi: vec![c(1e-4)], delta: 0.5 };
        assert!(matches!(spec.validate(), Err(Error::Domain(_))));
    }

    #[test]
    fn rational_identity_is_checked() {
        let good = SectionSpec::RationalXY {
            x_num: vec![c(0.0), c(1.0)],
            x_den: vec![c(1.0)],
            y_num: vec![c(0.0)],
            y_den: vec![c(1.0)],
        };
        assert!(good.validate().is_ok());
        let bad = SectionSpec::RationalXY {
            x_num: vec![c(2.0)],
            x_den: vec![c(1.0)],
            y_num: vec![c(1.0)],
            y_den: vec![c(1.0)],
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn constant_phi_is_rejected() {
        assert!(SectionSpec::exp_of(vec![c(0.3)]).validate().is_err());
        assert!(SectionSpec::exp_of(vec![c(0.0), c(1.0)]).validate().is_ok());
    }

    #[test]
    fn json_round_trip() {
        let spec = SectionSpec::Multiple {
            n: 2,
            of: Box::new(SectionSpec::masser()),
        };
        let s = serde_json::to_string(&spec).unwrap();
        let back: SectionSpec = serde_json::from_str(&s).unwrap();
        assert_eq!(spec, back);
        let m: SectionSpec = serde_json::from_str(r#"{"kind":"MasserBaseChange"}"#).unwrap();
        assert_eq!(m, SectionSpec::masser());
        let e: SectionSpec =
            serde_json::from_str(r#"{"kind":"TranscendentalExp","phi":[[0,0],[1,0]]}"#).unwrap();
        assert!(e.is_transcendental());
    }
}
