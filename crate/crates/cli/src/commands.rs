use std::path::Path;

use legendre_core::betti::{betti_coords, density_holomorphic, pullback_density};
use legendre_core::curve::{elliptic_exp, elliptic_log, on_curve, CurvePoint};
use legendre_core::heights::{
    neron_tate_height, scheme_height, torsion_count_height, CountConfig, Family, HeightConfig, HeightReport,
};
use legendre_core::nevanlinna::{
    counting_function, fmt_residual, height_characteristic, log_spaced, order_function, proximity_function,
    rationality_test, CharacteristicSeries, ExhaustionConfig, OrderMetric, ProximityMetric,
};
use legendre_core::periods::{agm_lattice, lattice_volume, period_basis, same_lattice, Lambda};
use legendre_core::quad::QuadConfig;
use legendre_core::sections::SectionSpec;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::{Cli, Command, FamilyArg, Failure, Format, HeightEstimator, MetricArg, Outcome, Radii, RunOptions, SeriesArg};
use crate::{verify, SCHEMA_VERSION};

pub fn load_section(path: &Path) -> Result<SectionSpec, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Usage(format!("cannot read section file {}: {e}", path.display())))?;
    let malformed = |msg: String| Failure::Usage(format!("malformed section file {}: {msg}", path.display()));
    let value: Value = serde_json::from_str(&text).map_err(|e| malformed(e.to_string()))?;
    let spec = SectionSpec::deserialize(&value).map_err(|e| {
        let msg = e.to_string();
        let at = locate(&text, &msg);
        malformed(format!("{msg} {at}"))
    })?;
    spec.validate()
        .map_err(|e| Failure::Usage(format!("invalid section in {}: {e}", path.display())))?;
    Ok(spec)
}

/// Position of the first back-quoted name of a schema error in the source text, or of the
/// enclosing object when the name does not occur (a missing field).
fn locate(text: &str, msg: &str) -> String {
    let position = |needle: &str| {
        text.find(needle).map(|at| {
            let before = &text[..at];
            let line = before.matches('\n').count() + 1;
            let column = before.chars().rev().take_while(|&c| c != '\n').count() + 1;
            (line, column)
        })
    };
    let name = msg.split('`').nth(1).unwrap_or("");
    match position(&format!("\"{name}\"")) {
        Some((l, c)) if !name.is_empty() => format!("at line {l} column {c}"),
        _ => match position("\"kind\"") {
            Some((l, c)) => format!("in the object at line {l} column {c}"),
            None => "at line 1 column 1".to_string(),
        },
    }
}

fn report(command: &str, fields: Value) -> String {
    let mut obj = serde_json::Map::new();
    obj.insert("schema_version".into(), json!(SCHEMA_VERSION));
    obj.insert("command".into(), json!(command));
    if let Value::Object(m) = fields {
        obj.extend(m);
    }
    let mut s = serde_json::to_string_pretty(&Value::Object(obj)).expect("reports serialize");
    s.push('\n');
    s
}

fn to_value<T: Serialize>(t: &T) -> Value {
    serde_json::to_value(t).expect("reports serialize")
}

fn point_value(p: &CurvePoint) -> Value {
    match p {
        CurvePoint::Infinity => json!({ "infinity": true }),
        CurvePoint::Affine { x, y } => json!({ "infinity": false, "x": x, "y": y }),
    }
}

fn apply_quad(opts: &RunOptions, q: &mut QuadConfig) -> Result<(), Failure> {
    if let Some(o) = opts.quad_order {
        q.order = o;
    }
    if let Some(t) = opts.abs_tol {
        q.abs_tol = t;
    }
    if let Some(t) = opts.rel_tol {
        q.rel_tol = t;
    }
    if let Some(d) = opts.max_depth {
        q.max_depth = d;
    }
    if q.order < 2 || !(q.abs_tol > 0.0) || !(q.rel_tol > 0.0) {
        return Err(Failure::Usage(format!(
            "quadrature settings out of range: order {}, abs_tol {}, rel_tol {}",
            q.order, q.abs_tol, q.rel_tol
        )));
    }
    Ok(())
}

fn radii(r: &Radii) -> Result<Vec<f64>, Failure> {
    if r.points < 2 || !(r.r_min > r.r0) || !(r.r_max > r.r_min) {
        return Err(Failure::Usage(format!(
            "need r0 < r-min < r-max and at least 2 points (got {}, {}, {}, {})",
            r.r0, r.r_min, r.r_max, r.points
        )));
    }
    Ok(log_spaced(r.r_min, r.r_max, r.points))
}

fn series_output(opts: &RunOptions, command: &str, series: &CharacteristicSeries, extra: Value) -> String {
    match opts.format {
        Format::Csv => series.to_csv(),
        Format::Json => {
            let mut fields = json!({ "series": series });
            if let (Value::Object(a), Value::Object(b)) = (&mut fields, extra) {
                a.extend(b);
            }
            report(command, fields)
        }
    }
}

fn json_only(opts: &RunOptions, command: &str) -> Result<(), Failure> {
    if opts.format == Format::Csv {
        return Err(Failure::Usage(format!("`{command}` has no series output; use --format json")));
    }
    Ok(())
}

fn ok(body: String) -> Result<Outcome, Failure> {
    Ok(Outcome { body, failed: None })
}

pub fn run(cli: &Cli) -> Result<Outcome, Failure> {
    let opts = &cli.run;
    match &cli.command {
        Command::Periods { lambda, path } => {
            json_only(opts, "periods")?;
            let lam = Lambda::new(*lambda)?;
            let b = period_basis(lam, path.as_deref())?;
            let agm = agm_lattice(lam)?;
            let v = lattice_volume(&b);
            ok(report(
                "periods",
                json!({
                    "lambda": lambda,
                    "rho1": b.rho1,
                    "rho2": b.rho2,
                    "tau": b.tau,
                    "volume": v.volume,
                    "fiber_height": v.fiber_height,
                    "agm_lattice_agrees": same_lattice((b.rho1, b.rho2), agm, 1e-9).is_some(),
                }),
            ))
        }
        Command::Exp { lambda, z } => {
            json_only(opts, "exp")?;
            let lam = Lambda::new(*lambda)?;
            let b = period_basis(lam, None)?;
            let p = elliptic_exp(lam, *z, &b)?;
            let (on, residual) = on_curve(lam, &p);
            ok(report(
                "exp",
                json!({ "lambda": lambda, "z": z, "point": point_value(&p), "on_curve": on, "residual": residual }),
            ))
        }
        Command::Log { lambda, x, y } => {
            json_only(opts, "log")?;
            let lam = Lambda::new(*lambda)?;
            let p = CurvePoint::affine(*x, *y);
            let (on, residual) = on_curve(lam, &p);
            if !on {
                return Err(Failure::Usage(format!("({x}, {y}) is not on the fiber over {lambda}: residual {residual:e}")));
            }
            let b = period_basis(lam, None)?;
            let z = elliptic_log(lam, &p, &b)?;
            let beta = betti_coords(lam, &p, &b)?;
            ok(report("log", json!({ "lambda": lambda, "x": x, "y": y, "z": z, "betti": [beta.b1, beta.b2] })))
        }
        Command::Betti { section, lambda } => {
            json_only(opts, "betti")?;
            let spec = load_section(section)?;
            let lam = Lambda::new(*lambda)?;
            let b = period_basis(lam, None)?;
            let p = spec.evaluate(lam, &b)?;
            let beta = betti_coords(lam, &p, &b)?;
            let holo = density_holomorphic(&spec, lam)?;
            let fd = pullback_density(&spec, lam, None)?;
            ok(report(
                "betti",
                json!({
                    "section": spec,
                    "lambda": lambda,
                    "point": point_value(&p),
                    "betti": [beta.b1, beta.b2],
                    "density": holo,
                    "density_finite_difference": fd.density,
                    "finite_difference_error": fd.est_error,
                }),
            ))
        }
        Command::Height {
            section,
            method,
            delta,
            n_max,
        } => {
            json_only(opts, "height")?;
            let spec = load_section(section)?;
            if !(*delta > 1.5e-5 && *delta < 0.5) {
                return Err(Failure::Usage(format!("delta = {delta} must lie in (1.5e-5, 0.5)")));
            }
            let mut cfg = HeightConfig::from_radius(*delta);
            apply_quad(opts, &mut cfg.quad)?;
            let mut estimates: Vec<HeightReport> = Vec::new();
            if matches!(method, HeightEstimator::Quadrature | HeightEstimator::Both) {
                estimates.push(neron_tate_height(&spec, &cfg)?);
            }
            if matches!(method, HeightEstimator::TorsionCount | HeightEstimator::Both) {
                let count = CountConfig {
                    levels: cfg.levels.clone(),
                    n_max: *n_max,
                    ..CountConfig::default()
                };
                estimates.push(torsion_count_height(&spec, &count)?);
            }
            let disagreement = (estimates.len() == 2).then(|| {
                let (a, b) = (estimates[0].value, estimates[1].value);
                if a == b {
                    0.0
                } else {
                    (a - b).abs() / a.abs().max(b.abs())
                }
            });
            ok(report(
                "height",
                json!({
                    "section": spec,
                    "value": estimates[0].value,
                    "est_error": estimates[0].est_error,
                    "estimates": estimates,
                    "relative_disagreement": disagreement,
                }),
            ))
        }
        Command::SchemeHeight { family, tau, delta } => {
            json_only(opts, "scheme-height")?;
            let mut cfg = HeightConfig::from_radius(*delta);
            apply_quad(opts, &mut cfg.quad)?;
            let fam = match family {
                FamilyArg::Legendre => Family::Legendre,
                FamilyArg::ConstantTau => Family::ConstantTau { tau: *tau },
            };
            let r = scheme_height(fam, &cfg)?;
            ok(report("scheme-height", json!({ "family": fam, "report": r })))
        }
        Command::Tchar {
            section,
            kind,
            radii: rr,
            divisor,
            metric,
            scale,
            truncation,
        } => {
            let spec = load_section(section)?;
            let rs = radii(rr)?;
            let mut exh = if *kind == SeriesArg::HeightChar {
                ExhaustionConfig::affine_curve(rr.r0)
            } else {
                ExhaustionConfig::punctured_disk(rr.r0)
            };
            apply_quad(opts, &mut exh.quad)?;
            let series = match kind {
                SeriesArg::Order => {
                    let m = match metric {
                        MetricArg::Neron => OrderMetric::BettiOmega,
                        MetricArg::FubiniStudy => OrderMetric::FubiniStudyOnX { scale: *scale },
                    };
                    order_function(&spec, m, &exh, &rs)?
                }
                SeriesArg::Counting => counting_function(&spec, divisor, &exh, &rs, *truncation)?,
                SeriesArg::Proximity => proximity_function(&spec, divisor, proximity_metric(*metric), &exh, &rs)?,
                SeriesArg::HeightChar => height_characteristic(&spec, &exh, &rs)?,
            };
            ok(series_output(opts, "tchar", &series, json!({ "section": spec, "divisor": divisor })))
        }
        Command::FmtCheck {
            section,
            radii: rr,
            divisor,
            metric,
        } => {
            json_only(opts, "fmt-check")?;
            let spec = load_section(section)?;
            let rs = radii(rr)?;
            let mut exh = ExhaustionConfig::punctured_disk(rr.r0);
            apply_quad(opts, &mut exh.quad)?;
            let r = fmt_residual(&spec, divisor, proximity_metric(*metric), &exh, &rs)?;
            let spread = verify::slope_spread(r.half_slopes);
            let passed = spread <= opts.fmt_slope_tol && r.ratio_bound.is_finite();
            let body = report(
                "fmt-check",
                json!({
                    "section": spec,
                    "divisor": divisor,
                    "metric": proximity_metric(*metric),
                    "report": r,
                    "slope_spread": spread,
                    "slope_tolerance": opts.fmt_slope_tol,
                    "passed": passed,
                }),
            );
            Ok(Outcome {
                body,
                failed: (!passed).then(|| {
                    format!(
                        "nevanlinna/FMT closure: half-range slopes {:?} differ by {spread:.3} (tolerance {})",
                        r.half_slopes, opts.fmt_slope_tol
                    )
                }),
            })
        }
        Command::Rationality {
            section,
            r0,
            r_min,
            r_max,
            points,
        } => {
            let spec = load_section(section)?;
            let rs = radii(&Radii {
                r0: *r0,
                r_min: *r_min,
                r_max: *r_max,
                points: *points,
            })?;
            let mut exh = ExhaustionConfig::affine_curve(*r0);
            apply_quad(opts, &mut exh.quad)?;
            let series = height_characteristic(&spec, &exh, &rs)?;
            let r = rationality_test(&series);
            ok(series_output(opts, "rationality", &series, json!({ "section": spec, "report": r })))
        }
        Command::VerifyAll { seed } => {
            json_only(opts, "verify-all")?;
            let checks = verify::run_all(*seed);
            let failures: Vec<String> = checks
                .iter()
                .filter(|c| !c.passed)
                .map(|c| format!("{}/{}: {}", c.module, c.invariant, c.detail))
                .collect();
            let body = report(
                "verify-all",
                json!({ "seed": seed, "passed": failures.is_empty(), "checks": to_value(&checks) }),
            );
            Ok(Outcome {
                body,
                failed: (!failures.is_empty()).then(|| failures.join("; ")),
            })
        }
    }
}

fn proximity_metric(m: MetricArg) -> ProximityMetric {
    match m {
        MetricArg::Neron => ProximityMetric::Neron,
        MetricArg::FubiniStudy => ProximityMetric::FubiniStudy,
    }
}
