//! End-to-end CLI checks: exit codes, JSON output shape, determinism of the
//! verify report under a fixed seed.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_ellconn")
}

fn specs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../specs")
}

fn run(args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .output()
        .expect("spawn ellconn")
}

#[test]
fn verify_hopf_member_passes_with_exit_zero() {
    let spec = specs_dir().join("hopf_p21.json");
    let out = run(&["verify", "--spec", spec.to_str().unwrap(), "--seed", "3"]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).expect("report json");
    assert_eq!(v["verdict"], "pass");
    assert!(v["discrepancies"]
        .as_array()
        .unwrap()
        .iter()
        .any(|d| d["id"] == "hopf_g12_monomial"));
}

#[test]
fn verify_broken_connection_fails_with_exit_one() {
    let spec = specs_dir().join("broken_hopf.json");
    let out = run(&["verify", "--spec", spec.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).expect("report json");
    assert_eq!(v["verdict"], "fail");
}

#[test]
fn unknown_family_is_an_input_error() {
    let dir = std::env::temp_dir();
    let path = dir.join("ellconn_unknown_family.json");
    std::fs::write(
        &path,
        r#"{"family": "unknown_family", "model": {"class": "hopf", "lambda": [0.5, 0.0], "d": 1}}"#,
    )
    .unwrap();
    let out = run(&["build", "--spec", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.starts_with("error:"), "stderr: {err}");
    assert_eq!(err.lines().count(), 1, "diagnostic must stay on one line");
}

#[test]
fn missing_spec_file_is_an_input_error() {
    let out = run(&["verify", "--spec", "/nonexistent/nowhere.json"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn build_emits_connection_json() {
    let spec = specs_dir().join("kodaira_wp.json");
    let out = run(&["build", "--spec", spec.to_str().unwrap()]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).expect("json");
    assert_eq!(v["connection"]["F"][0][0]["op"], "wp");
    assert_eq!(v["model"]["class"], "primary_kodaira");
}

#[test]
fn curvature_of_torus_member_reports_sampled_max() {
    let spec = specs_dir().join("torus_wp.json");
    let out = run(&["curvature", "--spec", spec.to_str().unwrap()]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).expect("json");
    assert!(v["max_abs_sampled"].as_f64().unwrap() > 1e-3);
    assert_eq!(v["flat_at_tol"], false);
}

#[test]
fn catalog_lists_all_families() {
    let out = run(&["catalog"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).expect("json");
    let fams: Vec<&str> = v["families"]
        .as_array()
        .unwrap()
        .iter()
        .map(|f| f["family"].as_str().unwrap())
        .collect();
    for f in [
        "hopf",
        "kodaira_I",
        "kodaira_II",
        "torus",
        "secondary_a",
        "secondary_b",
        "oper",
    ] {
        assert!(fams.contains(&f), "catalog lacks {f}");
    }
}

#[test]
fn verify_reports_are_byte_identical_for_fixed_seed() {
    let spec = specs_dir().join("hopf_p21.json");
    let a = run(&["verify", "--spec", spec.to_str().unwrap(), "--seed", "11"]);
    let b = run(&["verify", "--spec", spec.to_str().unwrap(), "--seed", "11"]);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn seed_env_fallback_is_honored() {
    let spec = specs_dir().join("hopf_p21.json");
    let with_flag = run(&["verify", "--spec", spec.to_str().unwrap(), "--seed", "23"]);
    let with_env = Command::new(bin())
        .args(["verify", "--spec", spec.to_str().unwrap()])
        .env("ELLCONN_SEED", "23")
        .output()
        .expect("spawn");
    assert_eq!(with_flag.stdout, with_env.stdout);
}
