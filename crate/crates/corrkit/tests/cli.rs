use std::process::{Command, Output};

use serde_json::Value;

fn corrkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_corrkit"))
        .args(args)
        .env_remove("CORRKIT_TOL")
        .output()
        .expect("binary runs")
}

fn data(name: &str) -> String {
    format!("{}/data/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn report(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is a JSON report")
}

#[test]
fn verify_ksgns_passes() {
    let out = corrkit(&["verify", "--suite", "ksgns", "--seed", "42", "--tol", "1e-9"]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(r["suite"], "ksgns");
    assert_eq!(r["seed"], 42);
    assert_eq!(r["pass"], true);
    for c in r["checks"].as_array().unwrap() {
        assert!(c["residual"].as_f64().unwrap().is_finite());
        assert!(c["paper_ref"].as_str().is_some_and(|s| !s.is_empty()));
    }
}

#[test]
fn reports_are_deterministic() {
    let args = ["verify", "--suite", "quesadilla", "--seed", "3", "--count", "10"];
    assert_eq!(corrkit(&args).stdout, corrkit(&args).stdout);
}

#[test]
fn covering_file_reports_index_two() {
    let out = corrkit(&["bihilb", "covering", "--cover", &data("double_cover.json")]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    let names: Vec<&str> = r["checks"].as_array().unwrap().iter().map(|c| c["name"].as_str().unwrap()).collect();
    assert!(names.contains(&"index e^beta = 2"), "{names:?}");
}

#[test]
fn graph_kappa_exits_nonzero_on_failed_checks() {
    let out = corrkit(&[
        "graph", "kappa", "--graph", &data("o2.graph"), "--subgraph", &data("o1.graph"), "--depth", "3",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let r = report(&out);
    assert_eq!(r["pass"], false);
    let pass_of = |name: &str| {
        r["checks"].as_array().unwrap().iter().find(|c| c["name"] == name).map(|c| c["pass"].clone())
    };
    assert_eq!(pass_of("left action case formula"), Some(Value::Bool(true)));
    assert_eq!(pass_of("surjectivity on Fock generators"), Some(Value::Bool(true)));
    assert_eq!(pass_of("inner products preserved across levels"), Some(Value::Bool(false)));
}

#[test]
fn json_flag_writes_the_report() {
    let dir = std::env::temp_dir().join(format!("corrkit-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("report.json");
    let out = corrkit(&["fock", "subproduct", "--json", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let written = std::fs::read_to_string(&path).unwrap();
    assert_eq!(written.trim(), String::from_utf8(out.stdout).unwrap().trim());
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn usage_and_io_errors_exit_two() {
    let out = corrkit(&["verify", "--suite", "nope"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown suite"));

    let out = corrkit(&["bihilb", "covering", "--cover", "/nonexistent/cover.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/nonexistent/cover.json"));

    let out = corrkit(&["verify", "--suite", "fock", "--tol", "-1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn tolerance_comes_from_the_environment() {
    let out = Command::new(env!("CARGO_BIN_EXE_corrkit"))
        .args(["verify", "--suite", "covering"])
        .env("CORRKIT_TOL", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("CORRKIT_TOL"));
}
