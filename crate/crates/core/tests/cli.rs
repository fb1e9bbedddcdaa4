use std::path::{Path, PathBuf};
use std::process::Command;

use linx::cli::{run, EXIT_INVALID, EXIT_NOT_CONVERGED, EXIT_OK, EXIT_REGIME};
use serde_json::Value;
use tempfile::TempDir;

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn json(args: &[&str]) -> Value {
    let mut full = vec!["linx"];
    full.extend_from_slice(args);
    let out = run(full);
    assert_eq!(out.code, EXIT_OK, "stderr: {}", out.stderr);
    serde_json::from_str(&out.stdout).unwrap()
}

fn fixtures() -> (TempDir, String, String, String) {
    let dir = TempDir::new().unwrap();
    let j2 = write(dir.path(), "j2.txt", "# all ones\n2\n1 1\n1 1\n");
    let diag = write(dir.path(), "diag.txt", "3\n2, 0, 0\n0, 1.5, 0\n0, 0, 0.5\n");
    let j3 = write(dir.path(), "j3.txt", "3\n1 1 1\n1 1 1\n1 1 1\n");
    let s = |p: PathBuf| p.to_str().unwrap().to_string();
    (dir, s(j2), s(diag), s(j3))
}

#[test]
fn bound_on_j2() {
    let (_dir, j2, _, _) = fixtures();
    let v = json(&[
        "bound", "--input", &j2, "--s", "1", "--gamma", "1", "--mask", "none",
    ]);
    assert_eq!(v["command"], "bound");
    assert_eq!(v["n"], 2);
    assert_eq!(v["mask"], "none");
    assert!((v["value"].as_f64().unwrap() - 0.111572).abs() < 1e-6);
    assert_eq!(v["x_hat"].as_array().unwrap().len(), 2);
    assert!(v.get("rows").is_none());
}

#[test]
fn gamma_on_diagonal() {
    let (_dir, _, diag, _) = fixtures();
    let v = json(&["gamma", "--input", &diag, "--s", "1"]);
    assert_eq!(v["gamma"].as_f64().unwrap(), 0.25);
    assert!((v["value"].as_f64().unwrap() - 2f64.ln()).abs() < 1e-8);
    assert_eq!(v["regime"]["tag"], "InteriorOptimum");
}

#[test]
fn gamma_limit_and_unbounded_use_string_markers() {
    let (_dir, j2, _, j3) = fixtures();
    let v = json(&["gamma", "--input", &j2, "--s", "1"]);
    assert_eq!(v["gamma"], "inf");
    assert_eq!(v["regime"]["tag"], "LimitAtInfinity");
    let v = json(&["gamma", "--input", &j3, "--s", "2"]);
    assert_eq!(v["value"], "-inf");
    assert_eq!(v["regime"]["tag"], "UnboundedBelow");
}

#[test]
fn bound_with_auto_gamma() {
    let (_dir, _, diag, _) = fixtures();
    let v = json(&["bound", "--input", &diag, "--s", "1", "--gamma", "auto"]);
    assert_eq!(v["gamma"].as_f64().unwrap(), 0.25);
}

#[test]
fn exact_and_log_base() {
    let (_dir, _, diag, _) = fixtures();
    let v = json(&["exact", "--input", &diag, "--s", "2"]);
    assert!((v["value"].as_f64().unwrap() - 3f64.ln()).abs() < 1e-14);
    assert_eq!(v["subset"], serde_json::json!([0, 1]));
    let v = json(&["exact", "--input", &diag, "--s", "1", "--log-base", "2"]);
    assert!((v["value"].as_f64().unwrap() - 1.0).abs() < 1e-14);
}

#[test]
fn gap_rows_and_csv() {
    let v = json(&["gap", "--kind", "unscaled", "--n", "8,2,4"]);
    let rows = v["rows"].as_array().unwrap();
    let ns: Vec<u64> = rows.iter().map(|r| r["n"].as_u64().unwrap()).collect();
    assert_eq!(ns, vec![2, 4, 8]);
    for r in rows {
        let n = r["n"].as_f64().unwrap();
        assert!(
            (r["theoretical_floor"].as_f64().unwrap() - 0.25 * (4.0f64 / 3.0).ln() * n).abs()
                < 1e-12
        );
        assert!(r["gap"].as_f64().unwrap() >= r["theoretical_floor"].as_f64().unwrap() - 1e-6);
    }

    let out = run([
        "linx", "gap", "--kind", "scaled", "--n", "4", "--output", "csv",
    ]);
    assert_eq!(out.code, EXIT_OK);
    let mut lines = out.stdout.lines();
    assert_eq!(
        lines.next().unwrap(),
        "n,plain_bound,masked_bound,gap,theoretical_floor,gamma_plain,gamma_masked,converged"
    );
    assert!(lines.next().unwrap().starts_with("4,"));
}

#[test]
fn identity_and_file_masks() {
    let (dir, j2, _, _) = fixtures();
    let v = json(&["bound", "--input", &j2, "--s", "1", "--mask", "identity"]);
    assert!(v["value"].as_f64().unwrap().abs() < 1e-12);

    let m = write(dir.path(), "m.txt", "2\n1 0.5\n0.5 1\n");
    let flag = format!("file:{}", m.display());
    let v = json(&["bound", "--input", &j2, "--s", "1", "--mask", &flag]);
    assert_eq!(v["mask"], flag.as_str());

    let bad = write(dir.path(), "bad.txt", "2\n2 0\n0 1\n");
    let out = run([
        "linx",
        "bound",
        "--input",
        &j2,
        "--s",
        "1",
        "--mask",
        &format!("file:{}", bad.display()),
    ]);
    assert_eq!(out.code, EXIT_INVALID);
}

#[test]
fn exit_codes() {
    let (dir, j2, _, _) = fixtures();
    let bad = write(dir.path(), "bad.txt", "2\n1 2\n");
    assert_eq!(
        run([
            "linx",
            "bound",
            "--input",
            bad.to_str().unwrap(),
            "--s",
            "1"
        ])
        .code,
        EXIT_INVALID
    );
    assert_eq!(
        run(["linx", "bound", "--input", &j2, "--s", "2"]).code,
        EXIT_INVALID
    );
    assert_eq!(
        run(["linx", "bound", "--input", "/nonexistent/c.txt", "--s", "1"]).code,
        EXIT_INVALID
    );

    let i3 = write(dir.path(), "i3.txt", "3\n1 0 0\n0 1 0\n0 0 1\n");
    let out = run(["linx", "limit", "--input", i3.to_str().unwrap(), "--s", "1"]);
    assert_eq!(out.code, EXIT_REGIME);
    assert!(out.stderr.contains("regime"));

    let c = write(
        dir.path(),
        "c.txt",
        "3\n2 0.5 0.3\n0.5 1.5 0.2\n0.3 0.2 1\n",
    );
    let out = run([
        "linx",
        "bound",
        "--input",
        c.to_str().unwrap(),
        "--s",
        "1",
        "--max-iter",
        "1",
        "--tol-fw",
        "1e-15",
    ]);
    assert_eq!(out.code, EXIT_NOT_CONVERGED);
    assert!(!out.stdout.is_empty());
}

#[test]
fn limit_command() {
    let (_dir, j2, _, _) = fixtures();
    let v = json(&["limit", "--input", &j2, "--s", "1"]);
    assert!(v["value"].as_f64().unwrap().abs() < 1e-8);
    assert_eq!(v["gamma"], "inf");
}

#[test]
fn json_round_trips_and_is_deterministic() {
    let (_dir, _, diag, _) = fixtures();
    let args = [
        "linx", "bound", "--input", &diag, "--s", "1", "--gamma", "0.7",
    ];
    let a = run(args);
    let b = run(args);
    assert_eq!(a, b);

    let inst = linx::instance::validate(
        linx::instance::SymMatrix::from_diagonal(&[2.0, 1.5, 0.5]),
        1,
    )
    .unwrap();
    let r = linx::linx::solve_linx(
        &inst,
        1,
        &linx::instance::Mask::all_ones(3),
        0.7,
        &Default::default(),
    )
    .unwrap();
    let v: Value = serde_json::from_str(&a.stdout).unwrap();
    assert!((v["value"].as_f64().unwrap() - r.value).abs() <= 1e-12);
    for (got, want) in v["x_hat"]
        .as_array()
        .unwrap()
        .iter()
        .zip(r.x_hat.as_slice())
    {
        assert!((got.as_f64().unwrap() - want).abs() <= 1e-12);
    }
}

#[test]
fn plain_output() {
    let (_dir, j2, _, _) = fixtures();
    let out = run([
        "linx", "bound", "--input", &j2, "--s", "1", "--output", "plain",
    ]);
    assert_eq!(out.code, EXIT_OK);
    assert!(out.stdout.starts_with("command: bound\n"));
    assert!(out.stdout.contains("value: 0.1115"));
}

#[test]
fn binary_entry_point() {
    let (_dir, j2, _, _) = fixtures();
    let out = Command::new(env!("CARGO_BIN_EXE_linx"))
        .args(["bound", "--input", &j2, "--s", "1"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((v["value"].as_f64().unwrap() - 0.5 * 1.25f64.ln()).abs() < 1e-10);

    let out = Command::new(env!("CARGO_BIN_EXE_linx"))
        .arg("nope")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(EXIT_INVALID));
}
