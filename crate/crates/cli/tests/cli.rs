use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn mtl(dir: &Path, args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_mtl"));
    cmd.current_dir(dir).args(args).env_remove("MTL_TOL");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("running mtl")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = mtl(dir, args, &[]);
    assert!(out.status.success(), "mtl {args:?} failed:\n{}\n{}", String::from_utf8_lossy(&out.stdout), String::from_utf8_lossy(&out.stderr));
    out
}

fn read(dir: &Path, name: &str) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join(name)).unwrap()).unwrap()
}

fn schema(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../schemas").join(format!("{name}.schema.json"))
}

/// Validate with the reference JSON Schema implementation.
fn assert_valid(doc: &Path, name: &str) {
    let script = "import json,sys,jsonschema\njsonschema.validate(json.load(open(sys.argv[1])), json.load(open(sys.argv[2])))";
    let out = Command::new("python3").args(["-c", script]).arg(doc).arg(schema(name)).output().expect("python3 with jsonschema");
    assert!(out.status.success(), "{} does not match {name}: {}", doc.display(), String::from_utf8_lossy(&out.stderr));
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("JSON on stdout")
}

/// A configuration and its member in a fresh directory.
fn setup() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["config", "--m", "2", "--k", "1", "--seed", "7", "--out", "c.json"]);
    ok(dir.path(), &["solve", "--config", "c.json", "--out", "w.json"]);
    dir
}

#[test]
fn config_is_valid_and_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["config", "--m", "2", "--k", "1", "--seed", "7", "--out", "a.json", "--manifest", "man.json"]);
    ok(d, &["config", "--m", "2", "--k", "1", "--seed", "7", "--out", "b.json"]);
    assert_valid(&d.join("a.json"), "config");
    assert_valid(&d.join("man.json"), "manifest");
    assert_eq!(std::fs::read(d.join("a.json")).unwrap(), std::fs::read(d.join("b.json")).unwrap());
    let cfg = read(d, "a.json");
    assert_eq!(cfg["points"].as_array().unwrap().len(), 4);
    let man = read(d, "man.json");
    assert_eq!(man["subcommand"], "config");
    assert_eq!(man["seed"], 7);
    assert_eq!(man["tolerance_source"], "default");
}

#[test]
fn lattice_reports_the_family_class() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["lattice", "--class", "2,2:1,1,1,1", "--out", "l.json"]);
    assert_valid(&dir.path().join("l.json"), "lattice");
    let l = read(dir.path(), "l.json");
    assert_eq!(l["severi_dim"], 3);
    assert_eq!(l["minimal"], true);
    assert_eq!(l["self_intersection"], 4);
    assert_eq!(l["nodes"], 1);
}

#[test]
fn lattice_flags_an_idle_exceptional_point() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(dir.path(), &["lattice", "--class", "2,2:1,1,1,1,0"]);
    assert_eq!(stdout_json(&out)["minimal"], false);
}

#[test]
fn usage_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = mtl(d, &["lattice", "--class", "2,x"], &[]);
    assert_eq!(out.status.code(), Some(2));
    std::fs::write(d.join("diag.json"), &out.stdout).unwrap();
    assert_valid(&d.join("diag.json"), "diagnostic");
    assert_eq!(stdout_json(&out)["status"], "usage_error");
    assert_eq!(mtl(d, &["frobnicate"], &[]).status.code(), Some(2));
    assert_eq!(mtl(d, &["solve", "--config", "missing.json"], &[]).status.code(), Some(2));
    assert_eq!(mtl(d, &["solve", "--config", "c.json"], &[("MTL_TOL", "abc")]).status.code(), Some(2));
}

#[test]
fn numeric_failures_exit_with_1_and_a_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let out = mtl(dir.path(), &["real", "--m", "3"], &[]);
    assert_eq!(out.status.code(), Some(1));
    let diag = stdout_json(&out);
    assert_eq!(diag["status"], "numeric_failure");
    assert_eq!(diag["error"], "HypothesisViolation");
    std::fs::write(dir.path().join("diag.json"), &out.stdout).unwrap();
    assert_valid(&dir.path().join("diag.json"), "diagnostic");
}

#[test]
fn tolerance_from_environment_and_flag() {
    let dir = setup();
    let d = dir.path();
    let out = mtl(d, &["solve", "--config", "c.json", "--manifest", "m1.json"], &[("MTL_TOL", "1e-30")]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stdout_json(&out)["check"], "incidence_residual");
    assert_eq!(read(d, "m1.json")["tolerance_source"], "MTL_TOL");
    let out = mtl(d, &["solve", "--config", "c.json", "--tol", "1e-6", "--manifest", "m2.json"], &[("MTL_TOL", "1e-30")]);
    assert!(out.status.success());
    assert_eq!(read(d, "m2.json")["tolerance_source"], "flag");
    assert_eq!(read(d, "m2.json")["tolerance"], 1e-6);
}

#[test]
fn solve_and_metric() {
    let dir = setup();
    let d = dir.path();
    assert_valid(&d.join("w.json"), "curve");
    assert_eq!(read(d, "w.json")["node_pairs"].as_array().unwrap().len(), 1);
    ok(d, &["metric", "--curve", "w.json", "--out", "met.json"]);
    assert_valid(&d.join("met.json"), "metric");
    let met = read(d, "met.json");
    assert_eq!(met["rank"], 3);
    for s in met["null_cone"].as_array().unwrap() {
        assert!(s["degeneracy"].as_f64().unwrap() < 1e-6);
    }
    ok(d, &["solve", "--config", "c.json", "--omit", "0", "--out", "w0.json"]);
    assert_valid(&d.join("w0.json"), "curve");
}

#[test]
fn solve_is_reproducible() {
    let dir = setup();
    let d = dir.path();
    ok(d, &["solve", "--config", "c.json", "--out", "again.json"]);
    assert_eq!(std::fs::read(d.join("w.json")).unwrap(), std::fs::read(d.join("again.json")).unwrap());
}

#[test]
fn trace_modes_and_render() {
    let dir = setup();
    let d = dir.path();
    ok(d, &["trace", "--config", "c.json", "--curve", "w.json", "--mode", "geodesic", "--zp", "0.3:0.2", "--zq", "-0.5:0.4", "--steps", "15", "--out", "g.json", "--svg", "g.svg"]);
    assert_valid(&d.join("g.json"), "trace");
    assert_eq!(read(d, "g.json")["states"].as_array().unwrap().len(), 16);
    assert!(std::fs::read_to_string(d.join("g.svg")).unwrap().starts_with("<svg"));
    ok(d, &["trace", "--config", "c.json", "--curve", "w.json", "--mode", "nodal", "--steps", "8", "--out", "n.json"]);
    assert_valid(&d.join("n.json"), "trace");
    ok(d, &["trace", "--config", "c.json", "--curve", "w.json", "--mode", "nullgeo", "--zp", "0.3:0.2", "--steps", "8", "--out", "ng.json"]);
    assert_valid(&d.join("ng.json"), "trace");
    ok(d, &["trace", "--config", "c.json", "--curve", "w.json", "--mode", "nullsurf", "--zp", "0.3:0.2", "--grid", "3", "--out", "ns.json"]);
    assert_valid(&d.join("ns.json"), "null_surface");
    ok(d, &["trace", "--config", "c.json", "--curve", "w.json", "--mode", "geodesic", "--zp", "0.3:0.2", "--zq", "-0.5:0.4", "--steps", "5", "--all-branches", "--jobs", "2", "--out", "b.json"]);
    assert_valid(&d.join("b.json"), "trace");
    assert_eq!(read(d, "b.json").as_array().unwrap().len(), 1);
    ok(d, &["render", "--trace", "g.json", "--out", "r.svg"]);
    assert_eq!(std::fs::read(d.join("r.svg")).unwrap(), std::fs::read(d.join("g.svg")).unwrap());
}

#[test]
fn trace_rejects_missing_points() {
    let dir = setup();
    let d = dir.path();
    let out = mtl(d, &["trace", "--config", "c.json", "--curve", "w.json", "--mode", "geodesic", "--zp", "0.3"], &[]);
    assert_eq!(out.status.code(), Some(2));
    let out = mtl(d, &["trace", "--config", "c.json", "--curve", "w.json", "--mode", "geodesic", "--p", "7,3", "--q", "1:1,2"], &[]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stdout_json(&out)["error"], "DegenerateInput");
}

#[test]
fn ew_check_residuals_decrease_and_are_deterministic() {
    let dir = setup();
    let d = dir.path();
    ok(d, &["ew-check", "--config", "c.json", "--curve", "w.json", "--levels", "3", "--jobs", "4", "--out", "ew.json", "--csv", "ew.csv"]);
    assert_valid(&d.join("ew.json"), "ew_check");
    let csv = std::fs::read_to_string(d.join("ew.csv")).unwrap();
    let rows: Vec<Vec<&str>> = csv.lines().map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 4);
    let col = rows[0].iter().position(|h| *h == "tracefree_residual").unwrap();
    let tf: Vec<f64> = rows[1..].iter().map(|r| r[col].parse().unwrap()).collect();
    assert!(tf[1] < tf[0] && tf[2] < tf[1], "{tf:?}");
    assert_eq!(read(d, "ew.json")["tracefree_decreasing"], true);
    ok(d, &["ew-check", "--config", "c.json", "--curve", "w.json", "--levels", "1", "--jobs", "1", "--out", "e1.json"]);
    ok(d, &["ew-check", "--config", "c.json", "--curve", "w.json", "--levels", "1", "--jobs", "3", "--out", "e3.json"]);
    assert_eq!(std::fs::read(d.join("e1.json")).unwrap(), std::fs::read(d.join("e3.json")).unwrap());
}

#[test]
fn real_member_report() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["real", "--m", "2", "--seed", "0", "--steps", "10", "--ew", "--out", "real.json", "--csv", "real.csv"]);
    assert_valid(&d.join("real.json"), "real");
    let r = read(d, "real.json");
    assert!(r["eigenvalues"].as_array().unwrap().iter().all(|e| e.as_f64().unwrap() > 0.0));
    assert_eq!(r["member"]["report"]["conditions"], serde_json::json!([true, true, true]));
    let traces = r["traces"].as_array().unwrap();
    assert_eq!(traces.len(), 3);
    assert_eq!(traces[0]["through_node"], true);
    assert!(r["ew"]["gamma_imag"].as_f64().unwrap() < 1e-6);
    let csv = std::fs::read_to_string(d.join("real.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 3 * 11);
    assert!(csv.lines().skip(1).all(|l| l.ends_with(",true")));
}
