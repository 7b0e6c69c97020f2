//! End-to-end runs of the `breather` binary: exit codes, artifacts, schemas, determinism.

use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_breather");

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn run(cmd: &str, config: &str, out: &Path, sets: &[&str]) -> i32 {
    let mut c = Command::new(BIN);
    c.arg(cmd).arg(configs().join(config)).arg("--set").arg(format!("output.dir={:?}", out.to_str().unwrap()));
    for s in sets {
        c.arg("--set").arg(s);
    }
    let output = c.output().expect("binary runs");
    output.status.code().expect("exit code")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn assert_schema(kind: &str, doc: &Value) {
    let schema_path = Path::new(env!("CARGO_MANIFEST_DIR")).join("schema").join(format!("{kind}.schema.json"));
    let schema = read_json(&schema_path);
    let validator = jsonschema::validator_for(&schema).unwrap();
    let errors: Vec<String> = validator.iter_errors(doc).map(|e| format!("{e} at {}", e.instance_path())).collect();
    assert!(errors.is_empty(), "{kind}: {errors:?}");
}

#[test]
fn analyze_canonical_step() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run("analyze", "step.toml", dir.path(), &[]), 0);
    let doc = read_json(&dir.path().join("analysis.json"));
    assert_schema("analysis", &doc);
    assert_schema("timing", &read_json(&dir.path().join("timing.json")));
    for h in doc["harmonics"].as_array().unwrap() {
        let k = h["k"].as_f64().unwrap();
        assert!((h["slope0"].as_f64().unwrap() - k).abs() <= 1e-12 * k);
    }
    assert_eq!(doc["passed"], Value::Bool(true));
}

#[test]
fn analyze_periodic_reports_floquet_data() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run("analyze", "periodic.toml", dir.path(), &[]), 0);
    let doc = read_json(&dir.path().join("analysis.json"));
    assert_schema("analysis", &doc);
    for h in doc["harmonics"].as_array().unwrap() {
        assert!((h["trace_closed_form"].as_f64().unwrap().abs() - 10.0 / 3.0).abs() < 1e-12);
        assert!((h["multiplier_small"].as_f64().unwrap().abs() - 1.0 / 3.0).abs() < 1e-12);
    }
}

#[test]
fn analyze_error_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run("analyze", "step.toml", dir.path(), &["medium.c=\"pi/4\""]), 2);
    assert_eq!(run("analyze", "periodic.toml", dir.path(), &["medium.b=1"]), 1);
    assert_eq!(run("analyze", "periodic.toml", dir.path(), &["medium.omega=\"1/4\""]), 2);
    assert_eq!(run("analyze", "dirichlet.toml", dir.path(), &["medium.l=\"pi/2\""]), 2);
    assert_eq!(run("analyze", "step.toml", dir.path(), &["functional.gamma=1"]), 4);
    assert_eq!(run("analyze", "step.toml", dir.path(), &["solve.r=2"]), 3);
    assert_eq!(run("analyze", "step.toml", dir.path(), &["medium.theta=0.5"]), 1);
    assert_eq!(run("analyze", "step.toml", dir.path(), &["solve.grad_tol=-1"]), 1);
    assert_eq!(run("analyze", "missing.toml", dir.path(), &[]), 1);
    let status = Command::new(BIN).arg("frobnicate").output().unwrap().status.code();
    assert_eq!(status, Some(1));
}

#[test]
fn solve_step_writes_valid_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run("solve", "step.toml", dir.path(), &[]), 0);
    let doc = read_json(&dir.path().join("result.json"));
    assert_schema("result", &doc);
    assert_eq!(doc["status"], "converged");
    assert!(doc["breather"]["j_value"].as_f64().unwrap() <= -8.0 * std::f64::consts::PI.powi(2) / 3.0);
    assert!(doc["gates"].as_array().unwrap().iter().all(|g| g["passed"] == Value::Bool(true)));

    let field = std::fs::read_to_string(dir.path().join("field.csv")).unwrap();
    let mut lines = field.lines();
    assert_eq!(lines.next(), Some("x,t,w"));
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row.len(), 3);
    for v in row {
        let mantissa = v.split('e').next().unwrap().replace(['-', '.'], "");
        assert_eq!(mantissa.len(), 17, "{v}");
    }
    let conv = std::fs::read_to_string(dir.path().join("convergence.csv")).unwrap();
    assert!(conv.starts_with("kind,stage,n,iter,j,grad_norm\n"));
    assert!(conv.lines().any(|l| l.starts_with("stage,0,41,")));
}

#[test]
fn solve_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert_eq!(run("solve", "periodic.toml", a.path(), &["solve.n=41"]), 0);
    assert_eq!(run("solve", "periodic.toml", b.path(), &["solve.n=41"]), 0);
    for file in ["result.json", "field.csv", "convergence.csv"] {
        let x = std::fs::read(a.path().join(file)).unwrap();
        let y = std::fs::read(b.path().join(file)).unwrap();
        assert!(x == y, "{file} differs between identical runs");
    }
}

#[test]
fn solve_failure_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run("solve", "step.toml", dir.path(), &["solve.max_iters=1"]), 5);
    let doc = read_json(&dir.path().join("result.json"));
    assert_schema("result", &doc);
    assert_eq!(doc["status"], "max_iters_exceeded");
    assert!(dir.path().join("field.csv").exists());

    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run("solve", "step.toml", dir.path(), &["gates.weak_tol=1e-30"]), 6);
    let doc = read_json(&dir.path().join("result.json"));
    assert_eq!(doc["status"], "gate_failure");

    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run("solve", "step.toml", dir.path(), &["functional.gamma=1"]), 4);
    assert_eq!(run("solve", "step.toml", dir.path(), &["solve.k0=2"]), 1);
    assert_eq!(run("solve", "step.toml", dir.path(), &["solve.n_schedule=[11,5]"]), 1);
}

#[test]
fn solve_with_schedule_and_symmetry() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run("solve", "step.toml", dir.path(), &["solve.n_schedule=[5,11,21]"]), 0);
    let doc = read_json(&dir.path().join("result.json"));
    let stages = doc["stages"].as_array().unwrap();
    assert_eq!(stages.len(), 3);
    let js: Vec<f64> = stages.iter().map(|s| s["j_value"].as_f64().unwrap()).collect();
    assert!(js.windows(2).all(|w| w[1] <= w[0]));

    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run("solve", "periodic.toml", dir.path(), &["solve.r=3", "solve.n=41"]), 0);
    let doc = read_json(&dir.path().join("result.json"));
    assert_schema("result", &doc);
    let values = doc["breather"]["alpha"]["values"].as_array().unwrap();
    for (i, v) in values.iter().enumerate() {
        if (2 * i + 1) % 3 != 0 {
            assert_eq!(v.as_f64().unwrap(), 0.0);
        }
    }
}

#[test]
fn solve_dirichlet() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run("solve", "dirichlet.toml", dir.path(), &[]), 0);
    let doc = read_json(&dir.path().join("result.json"));
    assert_schema("result", &doc);
    assert!(doc["decay_fit"].is_null());
}

#[test]
fn scan_periodic() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run("scan", "periodic_scan.toml", dir.path(), &[]), 0);
    let doc = read_json(&dir.path().join("scan.json"));
    assert_schema("scan", &doc);
    let rows = doc["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 3);
    for (row, r) in rows.iter().zip([3u64, 9, 27]) {
        assert_eq!(row["r"].as_u64(), Some(r));
        let sub = dir.path().join(format!("j{}", row["j"]));
        assert_schema("result", &read_json(&sub.join("result.json")));
    }
    let summary = std::fs::read_to_string(dir.path().join("scan_summary.csv")).unwrap();
    assert!(summary.starts_with("j,r,status,J,k0,support_lattice,antiperiod,"));
    assert_eq!(summary.lines().count(), 4);

    // a worker pool gives the same bytes
    let pooled = tempfile::tempdir().unwrap();
    let mut c = Command::new(BIN);
    c.arg("scan")
        .arg(configs().join("periodic_scan.toml"))
        .arg("--set")
        .arg(format!("output.dir={:?}", pooled.path().to_str().unwrap()))
        .arg("--jobs")
        .arg("3");
    assert_eq!(c.output().unwrap().status.code(), Some(0));
    assert_eq!(
        std::fs::read(dir.path().join("scan.json")).unwrap(),
        std::fs::read(pooled.path().join("scan.json")).unwrap()
    );
}

#[test]
fn scan_step_depends_on_coupling_sign() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run("scan", "step.toml", dir.path(), &["scan.j_max=2"]), 0);
    let doc = read_json(&dir.path().join("scan.json"));
    assert_schema("scan", &doc);
    assert!(doc["rows"].as_array().unwrap().iter().all(|r| r["status"] == "converged"));

    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run("scan", "step.toml", dir.path(), &["scan.j_max=2", "functional.gamma=1"]), 4);
    let doc = read_json(&dir.path().join("scan.json"));
    assert_schema("scan", &doc);
    assert!(doc["rows"].as_array().unwrap().iter().all(|r| r["status"] == "failed"));
}

#[test]
fn scan_validation() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run("scan", "periodic_scan.toml", dir.path(), &["scan.j_max=0"]), 1);
    assert_eq!(run("scan", "periodic_scan.toml", dir.path(), &["scan.r0=4"]), 1);
    assert_eq!(run("scan", "periodic.toml", dir.path(), &[]), 1);
}
