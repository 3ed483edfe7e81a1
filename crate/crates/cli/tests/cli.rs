use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_legendre"));
    for var in ["LEGENDRE_QUAD_ORDER", "LEGENDRE_ABS_TOL", "LEGENDRE_REL_TOL", "LEGENDRE_MAX_DEPTH", "LEGENDRE_FMT_SLOPE_TOL"] {
        c.env_remove(var);
    }
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn schema_path(command: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("schemas").join(format!("{command}.schema.json"))
}

/// Parses stdout and checks it against the command's published schema.
fn validated(out: &Output, command: &str) -> Value {
    assert!(out.status.success(), "{command}: {}", String::from_utf8_lossy(&out.stderr));
    let doc: Value = serde_json::from_slice(&out.stdout).expect("JSON report");
    let schema: Value = serde_json::from_str(&std::fs::read_to_string(schema_path(command)).unwrap()).unwrap();
    let validator = jsonschema::validator_for(&schema).expect("schema compiles");
    let errors: Vec<String> = validator.iter_errors(&doc).map(|e| format!("{e} at {}", e.instance_path)).collect();
    assert!(errors.is_empty(), "{command}: {errors:?}");
    assert_eq!(doc["schema_version"], "1.0");
    doc
}

fn section_file(dir: &tempfile::TempDir, name: &str, body: &str) -> String {
    let p = dir.path().join(name);
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

fn complex(v: &Value) -> (f64, f64) {
    (v[0].as_f64().unwrap(), v[1].as_f64().unwrap())
}

#[test]
fn periods_at_one_half_give_tau_i() {
    let doc = validated(&run(&["periods", "--lambda", "0.5"]), "periods");
    let (re, im) = complex(&doc["tau"]);
    assert!(re.abs() < 1e-10 && (im - 1.0).abs() < 1e-10, "tau = {re} + {im}i");
    assert_eq!(doc["agm_lattice_agrees"], true);
}

#[test]
fn exp_then_log_round_trips() {
    let e = validated(&run(&["exp", "--lambda", "0.3+0.4i", "--z", "0.7+0.2i"]), "exp");
    assert_eq!(e["on_curve"], true);
    let (xr, xi) = complex(&e["point"]["x"]);
    let (yr, yi) = complex(&e["point"]["y"]);
    let x = format!("{xr:+.17e}{xi:+.17e}i");
    let y = format!("{yr:+.17e}{yi:+.17e}i");
    let l = validated(&run(&["log", "--lambda", "0.3+0.4i", "--x", &x, "--y", &y]), "log");
    let p = validated(&run(&["periods", "--lambda", "0.3+0.4i"]), "periods");
    let (zr, zi) = complex(&l["z"]);
    let (r1, r2) = (complex(&p["rho1"]), complex(&p["rho2"]));
    // z - (0.7 + 0.2i) must be a lattice vector
    let (dr, di) = (zr - 0.7, zi - 0.2);
    let det = r1.0 * r2.1 - r1.1 * r2.0;
    let s = (dr * r2.1 - di * r2.0) / det;
    let t = (r1.0 * di - r1.1 * dr) / det;
    assert!((s - s.round()).abs() < 1e-9 && (t - t.round()).abs() < 1e-9, "({s}, {t})");
}

#[test]
fn off_curve_point_is_a_usage_error() {
    let out = run(&["log", "--lambda", "0.3", "--x", "2", "--y", "5"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn betti_report_for_a_transcendental_section() {
    let dir = tempfile::tempdir().unwrap();
    let f = section_file(&dir, "exp.json", r#"{"kind": "TranscendentalExp", "phi": [[0, 0], [1, 0]]}"#);
    let doc = validated(&run(&["betti", "--section", &f, "--lambda", "2+1i"]), "betti");
    let (a, b) = (doc["density"].as_f64().unwrap(), doc["density_finite_difference"].as_f64().unwrap());
    assert!(a > 0.0 && (a - b).abs() < 1e-6 * a);
}

#[test]
fn height_of_a_torsion_section_vanishes() {
    let dir = tempfile::tempdir().unwrap();
    let f = section_file(&dir, "p3.json", r#"{"kind": "NamedTorsion", "point": "P3"}"#);
    let doc = validated(&run(&["height", "--section", &f]), "height");
    assert!(doc["value"].as_f64().unwrap().abs() < 1e-8);
    assert!(doc["est_error"].as_f64().unwrap() < 1e-8);
    let both = validated(&run(&["height", "--section", &f, "--method", "both"]), "height");
    assert_eq!(both["estimates"][1]["method"], "torsion_verdict");
}

#[test]
fn transcendental_height_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let f = section_file(&dir, "exp.json", r#"{"kind": "TranscendentalExp", "phi": [[0, 0], [1, 0]]}"#);
    let out = run(&["height", "--section", &f]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("transcendental"));
}

#[test]
fn isotrivial_scheme_height_is_zero() {
    let doc = validated(
        &run(&["scheme-height", "--family", "constant-tau", "--tau", "0.2+1.1i"]),
        "scheme-height",
    );
    assert_eq!(doc["report"]["area"].as_f64().unwrap(), 0.0);
    assert_eq!(doc["report"]["heights"].as_array().unwrap().len(), 3);
}

#[test]
fn series_as_json_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let f = section_file(&dir, "exp.json", r#"{"kind": "TranscendentalExp", "phi": [[0, 0], [1, 0]]}"#);
    let args = ["tchar", "--section", &f, "--kind", "counting", "--r-min", "3", "--r-max", "10", "--points", "4"];
    let doc = validated(&run(&args), "tchar");
    assert_eq!(doc["series"]["values"].as_array().unwrap().len(), 4);
    let mut csv_args = args.to_vec();
    csv_args.extend(["--format", "csv"]);
    let out = run(&csv_args);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "r,value,quad_error");
    assert_eq!(lines.len(), 5);
    let order = validated(
        &run(&["tchar", "--section", &f, "--kind", "order", "--r-min", "3", "--r-max", "10", "--points", "3"]),
        "tchar",
    );
    assert_eq!(order["series"]["kind"]["kind"], "order");
}

#[test]
fn report_goes_to_the_output_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("periods.json");
    let out = run(&["periods", "--lambda", "-2+0.5i", "--output", path.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    assert_eq!(doc["command"], "periods");
}

#[test]
fn fmt_check_closes_for_exp_against_q() {
    let dir = tempfile::tempdir().unwrap();
    let f = section_file(&dir, "exp.json", r#"{"kind": "TranscendentalExp", "phi": [[0, 0], [1, 0]]}"#);
    let doc = validated(&run(&["fmt-check", "--section", &f, "--r-max", "20", "--points", "6"]), "fmt-check");
    assert_eq!(doc["passed"], true);
    assert!(doc["report"]["max_deviation"].as_f64().unwrap() < 1e-8);
}

#[test]
fn failed_verification_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let f = section_file(&dir, "p3.json", r#"{"kind": "NamedTorsion", "point": "P3"}"#);
    let out = bin()
        .args(["fmt-check", "--section", &f, "--r-max", "10", "--points", "4"])
        .env("LEGENDRE_FMT_SLOPE_TOL", "-1")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["passed"], false);
    assert!(String::from_utf8_lossy(&out.stderr).contains("nevanlinna/FMT closure"));
}

#[test]
fn rationality_verdicts() {
    let dir = tempfile::tempdir().unwrap();
    let exp = section_file(&dir, "exp.json", r#"{"kind": "TranscendentalExp", "phi": [[0, 0], [1, 0]]}"#);
    let doc = validated(&run(&["rationality", "--section", &exp]), "rationality");
    assert_eq!(doc["report"]["verdict"], "transcendental_like");
    let p1 = section_file(&dir, "p1.json", r#"{"kind": "NamedTorsion", "point": "P1"}"#);
    let doc = validated(&run(&["rationality", "--section", &p1]), "rationality");
    assert_eq!(doc["report"]["verdict"], "rational_like");
}

#[test]
fn malformed_section_files_name_the_position() {
    let dir = tempfile::tempdir().unwrap();
    let f = section_file(&dir, "bad.json", "{\n  \"kind\": \"NamedTorsion\",\n  \"point\": \"P7\"\n}\n");
    let out = run(&["height", "--section", &f]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("P7") && err.contains("line"), "{err}");
    let g = section_file(&dir, "field.json", r#"{"kind": "TranscendentalExp", "psi": [[1, 0]]}"#);
    let err = String::from_utf8_lossy(&run(&["betti", "--section", &g, "--lambda", "2"]).stderr).to_string();
    assert!(err.contains("psi"), "{err}");
    let h = section_file(&dir, "trunc.json", r#"{"kind": "MasserBaseChange", "#);
    let err = String::from_utf8_lossy(&run(&["height", "--section", &h]).stderr).to_string();
    assert!(err.contains("line 1 column"), "{err}");
    let invalid = section_file(&dir, "cut.json", r#"{"kind": "MasserBaseChange", "x0": 0.5}"#);
    assert_eq!(run(&["height", "--section", &invalid]).status.code(), Some(1));
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(run(&["periods"]).status.code(), Some(1));
    assert_eq!(run(&["periods", "--lambda", "zero"]).status.code(), Some(1));
    assert_eq!(run(&["periods", "--lambda", "0"]).status.code(), Some(1));
    assert_eq!(run(&["no-such-command"]).status.code(), Some(1));
    assert_eq!(run(&["periods", "--lambda", "0.5", "--format", "csv"]).status.code(), Some(1));
    let out = bin().args(["periods", "--lambda", "0.5"]).env("LEGENDRE_QUAD_ORDER", "many").output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn numeric_failures_exit_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let f = section_file(&dir, "exp.json", r#"{"kind": "TranscendentalExp", "phi": [[0, 0], [1, 0]]}"#);
    let out = bin()
        .args(["tchar", "--section", &f, "--kind", "order", "--r-min", "3", "--r-max", "6", "--points", "2"])
        .env("LEGENDRE_MAX_DEPTH", "0")
        .env("LEGENDRE_REL_TOL", "1e-15")
        .env("LEGENDRE_ABS_TOL", "1e-15")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("numeric failure"));
}
