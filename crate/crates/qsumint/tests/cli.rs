//! Integration tests for the `verify` binary: exit-code contract, report
//! emission, schema golden files, config-file handling, and determinism of
//! emitted reports.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use qsumint::report::{reports_from_csv, reports_from_json, reports_to_csv, reports_to_json, Status};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_verify")
}

fn run_verify(args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .env_remove("QSUMINT_CONFIG")
        .output()
        .expect("binary should run")
}

fn golden(name: &str) -> String {
    let path = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(name);
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("missing golden {path:?}: {e}"))
}

fn tmp_path(name: &str) -> PathBuf {
    let dir = tempfile::tempdir().expect("tempdir");
    // Leak the TempDir so the file outlives this helper; the OS cleans up.
    let path = dir.path().join(name);
    std::mem::forget(dir);
    path
}

#[test]
fn exit_zero_on_passing_run() {
    let out = run_verify(&["reflection", "--trials", "4", "--seed", "11"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("pass             : 4"), "{stdout}");
}

#[test]
fn exit_two_on_zero_trials() {
    let out = run_verify(&["star-triangle", "--trials", "0"]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("trials must be >= 1"), "{stderr}");
}

#[test]
fn exit_two_on_unknown_identity_or_flag() {
    let out = run_verify(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown identity"));

    let out = run_verify(&["qbeta", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(2));

    let out = run_verify(&["qbeta", "--q", "1.5", "--trials", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("0 < q < 1"));
}

#[test]
fn exit_one_on_failing_tolerance() {
    // An impossible tolerance turns numerically fine trials into failures.
    let out = run_verify(&["reflection", "--trials", "2", "--seed", "1", "--tol", "1e-30"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("fail"));
}

#[test]
fn json_emission_matches_golden_schema() {
    let path = tmp_path("out.json");
    let out = run_verify(&[
        "reflection",
        "--trials",
        "2",
        "--seed",
        "42",
        "--json",
        path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(&path).unwrap();
    let reports = reports_from_json(&text).unwrap();
    assert_eq!(reports.len(), 2);
    assert_eq!(reports[0].status, Status::Pass);

    // Flatten the first record to "path: kind" lines and compare.
    let value: serde_json::Value = serde_json::from_str(&text).unwrap();
    let mut lines = Vec::new();
    flatten(&value[0], "", &mut lines);
    let got = lines.join("\n") + "\n";
    assert_eq!(got, golden("reflection_schema.txt"), "JSON schema drifted");
}

#[test]
fn qbeta_json_schema_golden() {
    let path = tmp_path("out.json");
    let out = run_verify(&[
        "qbeta",
        "--trials",
        "1",
        "--seed",
        "5",
        "--json",
        path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(&path).unwrap();
    let value: serde_json::Value = serde_json::from_str(&text).unwrap();
    let mut lines = Vec::new();
    flatten(&value[0], "", &mut lines);
    let got = lines.join("\n") + "\n";
    assert_eq!(got, golden("qbeta_schema.txt"), "JSON schema drifted");
}

fn flatten(v: &serde_json::Value, path: &str, out: &mut Vec<String>) {
    match v {
        serde_json::Value::Object(map) => {
            for (k, x) in map {
                let p = if path.is_empty() {
                    k.clone()
                } else {
                    format!("{path}.{k}")
                };
                flatten(x, &p, out);
            }
        }
        serde_json::Value::Number(_) => out.push(format!("{path}: number")),
        serde_json::Value::String(_) => out.push(format!("{path}: string")),
        other => out.push(format!("{path}: {other:?}")),
    }
}

#[test]
fn csv_headers_match_goldens() {
    for (identity, golden_name) in [
        ("reflection", "reflection_header.csv"),
        ("qbeta", "qbeta_header.csv"),
        ("star-triangle", "star_triangle_header.csv"),
        ("bailey", "bailey_header.csv"),
    ] {
        let path = tmp_path("out.csv");
        let out = run_verify(&[
            identity,
            "--trials",
            "1",
            "--seed",
            "5",
            "--csv",
            path.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0), "{identity}");
        let text = std::fs::read_to_string(&path).unwrap();
        let header = text.lines().next().unwrap();
        assert_eq!(
            format!("{header}\n"),
            golden(golden_name),
            "CSV header drifted for {identity}"
        );
    }
}

#[test]
fn emitted_reports_round_trip_json_csv_json() {
    let path = tmp_path("out.json");
    let out = run_verify(&[
        "d-props",
        "--trials",
        "3",
        "--seed",
        "9",
        "--json",
        path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let json_text = std::fs::read_to_string(&path).unwrap();
    let reports = reports_from_json(&json_text).unwrap();
    let csv_text = reports_to_csv(&reports).unwrap();
    let back = reports_from_csv(&csv_text).unwrap();
    assert_eq!(reports, back);
    // And back out to JSON identically.
    assert_eq!(reports_to_json(&back).unwrap(), json_text.trim_end());
}

#[test]
fn same_seed_emits_identical_reports_modulo_wall_time() {
    let (p1, p2) = (tmp_path("a.json"), tmp_path("b.json"));
    for p in [&p1, &p2] {
        let out = run_verify(&[
            "qbeta",
            "--trials",
            "2",
            "--seed",
            "31",
            "--json",
            p.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0));
    }
    let mut a = reports_from_json(&std::fs::read_to_string(&p1).unwrap()).unwrap();
    let mut b = reports_from_json(&std::fs::read_to_string(&p2).unwrap()).unwrap();
    for r in a.iter_mut().chain(b.iter_mut()) {
        r.wall_time_ms = 0.0;
    }
    assert_eq!(a, b);
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let cfg_path = tmp_path("run.cfg");
    std::fs::write(
        &cfg_path,
        "[run]\nidentity = qbeta\ntrials = 4\nseed = 3\n\n[policy]\nquad_nodes_min = 64\n",
    )
    .unwrap();

    // File's trials apply when the flag is absent.
    let out = run_verify(&[
        "reflection",
        "--config",
        cfg_path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("trials           : 4"));

    // The flag wins over the file.
    let out = run_verify(&[
        "reflection",
        "--config",
        cfg_path.to_str().unwrap(),
        "--trials",
        "2",
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("trials           : 2"));
}

#[test]
fn config_env_var_is_honored() {
    let cfg_path = tmp_path("env.cfg");
    std::fs::write(&cfg_path, "[run]\ntrials = 5\nseed = 8\n").unwrap();
    let out = Command::new(bin())
        .args(["reflection"])
        .env("QSUMINT_CONFIG", cfg_path.as_os_str())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("trials           : 5"));
}

#[test]
fn config_parse_error_exits_two_with_context() {
    let cfg_path = tmp_path("bad.cfg");
    std::fs::write(&cfg_path, "[run]\ntrials = twenty\n").unwrap();
    let out = run_verify(&["qbeta", "--config", cfg_path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("line 2") && stderr.contains("trials"), "{stderr}");
}

#[test]
fn missing_config_file_exits_two_with_path() {
    let out = run_verify(&["qbeta", "--config", "/no/such/file.cfg"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/no/such/file.cfg"));
}

#[test]
fn json_and_csv_flags_conflict() {
    let out = run_verify(&["qbeta", "--json", "a.json", "--csv", "b.csv"]);
    assert_eq!(out.status.code(), Some(2));
}
