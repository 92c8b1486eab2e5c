use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const UNKNOT: &str = "builtin:boundary_4_simplex_with_unknot";

fn qhi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qhi")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn perturbed(dir: &Path, seed: &str) -> String {
    let path = dir.join(format!("bundle-{seed}.json"));
    let p = path.to_str().unwrap().to_string();
    let o = qhi(&["perturb", UNKNOT, "--seed", seed, "--output", &p]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    p
}

#[test]
fn validate_builtin_passes_and_echoes_config() {
    let o = qhi(&["validate", UNKNOT]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.contains("config.seed: 0"));
    assert!(out.contains("config.tol: 1e-9"));
    assert!(out.contains("result: PASS"));
}

#[test]
fn edges_lists_canonical_ids() {
    let o = qhi(&["--format", "machine", "edges", UNKNOT]);
    assert_eq!(o.status.code(), Some(0));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["fields"]["num_edges"], 10);
    let hamiltonian = (0..10).filter(|i| v["fields"][format!("edge {i}")]["hamiltonian"] == true).count();
    assert_eq!(hamiltonian, 5);
}

#[test]
fn perturb_is_deterministic_and_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let a = std::fs::read_to_string(perturbed(dir.path(), "4")).unwrap();
    let printed = stdout(&qhi(&["perturb", UNKNOT, "--seed", "4"]));
    assert_eq!(a, printed);
    let again = dir.path().join("again.json");
    let o = qhi(&["perturb", &perturbed(dir.path(), "4"), "--seed", "4", "--output", again.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let v = qhi(&["validate", again.to_str().unwrap()]);
    assert_eq!(v.status.code(), Some(0), "{}", stdout(&v));
}

#[test]
fn rogers_reports_value_mod_pi2_6() {
    let dir = tempfile::tempdir().unwrap();
    let b = perturbed(dir.path(), "1");
    let o = qhi(&["rogers", &b]);
    assert_eq!(o.status.code(), Some(0));
    let line = stdout(&o).lines().find(|l| l.starts_with("value:")).unwrap().to_string();
    assert!(line.ends_with("mod pi^2/6"), "{line}");
    let re: f64 = line.split_whitespace().nth(1).unwrap().parse().unwrap();
    assert!(re.abs() < 1e-8 || (re - std::f64::consts::PI.powi(2) / 6.0).abs() < 1e-8);
}

#[test]
fn statesum_reports_phase_class() {
    let dir = tempfile::tempdir().unwrap();
    let b = perturbed(dir.path(), "2");
    let o = qhi(&["--format", "machine", "statesum", &b, "--N", "3"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["config"]["N"], 3);
    assert!((v["fields"]["H.modulus"].as_f64().unwrap() - 1.0 / 9.0).abs() < 1e-9);
    assert!(v["fields"]["H.arg_mod_pi_over_N"].as_f64().unwrap() < std::f64::consts::PI / 3.0);
}

#[test]
fn transit_script_keeps_invariants() {
    let dir = tempfile::tempdir().unwrap();
    let b = perturbed(dir.path(), "5");
    let script = dir.path().join("moves.txt");
    std::fs::write(&script, "# forward\n2-3 0\nbubble+ 1\n").unwrap();
    let out = dir.path().join("after.json");
    let o = qhi(&["transit", &b, "--script", script.to_str().unwrap(), "--N", "3", "--output", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("step 2 H_N phase-equal"));
    let v = qhi(&["validate", out.to_str().unwrap()]);
    assert_eq!(v.status.code(), Some(0), "{}", stdout(&v));
}

#[test]
fn bad_script_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let b = perturbed(dir.path(), "6");
    let script = dir.path().join("bad.txt");
    std::fs::write(&script, "2-3 0\nflip 1\n").unwrap();
    let o = qhi(&["transit", &b, "--script", script.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));
}

#[test]
fn verify_suite_passes() {
    let o = qhi(&["verify", "--suite", "dilog", "--seed", "7"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("config.seed: 7"));
    assert_eq!(qhi(&["verify", "--suite", "nonsense"]).status.code(), Some(1));
}

#[test]
fn failed_check_exits_three() {
    let o = qhi(&["verify", "--suite", "dilog", "--tol", "0"]);
    assert_eq!(o.status.code(), Some(3), "{}", stdout(&o));
    assert!(stdout(&o).contains("FAIL"));
}

#[test]
fn validation_failures_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let b = perturbed(dir.path(), "8");
    let mut v: Value = serde_json::from_str(&std::fs::read_to_string(&b).unwrap()).unwrap();
    v["cocycle"][3]["matrix"][0] = serde_json::json!([5.0, 0.0]);
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, v.to_string()).unwrap();
    let o = qhi(&["validate", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("edge 3"));

    let broken = dir.path().join("broken.json");
    std::fs::write(&broken, "{\n \"name\": \"x\",\n ]").unwrap();
    let o = qhi(&["validate", broken.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));

    assert_eq!(qhi(&["rogers", UNKNOT]).status.code(), Some(2));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(qhi(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(qhi(&["validate", "builtin:nope"]).status.code(), Some(1));
    assert_eq!(qhi(&["validate", "/nonexistent/bundle.json"]).status.code(), Some(1));
    assert_eq!(qhi(&["--help"]).status.code(), Some(0));
}

#[test]
fn flatten_charge_and_export() {
    let dir = tempfile::tempdir().unwrap();
    let b = perturbed(dir.path(), "9");
    let flat = dir.path().join("flat.json");
    assert_eq!(qhi(&["flatten", &b, "--output", flat.to_str().unwrap()]).status.code(), Some(0));
    let charged = dir.path().join("charged.json");
    assert_eq!(qhi(&["charge", flat.to_str().unwrap(), "--output", charged.to_str().unwrap()]).status.code(), Some(0));
    let o = qhi(&["validate", charged.to_str().unwrap()]);
    assert!(stdout(&o).contains("flattening is global"));
    assert!(stdout(&o).contains("charge is global"));
    let e = qhi(&["--format", "machine", "export-class", charged.to_str().unwrap(), "--decoration", "charge"]);
    assert_eq!(e.status.code(), Some(0));
    let v: Value = serde_json::from_str(&stdout(&e)).unwrap();
    let first = &v["fields"]["entry 0"];
    assert!(first["sign"].is_i64() && first["triple"].as_array().unwrap().len() == 3);
}

#[test]
fn asymptotics_reports_each_n() {
    let o = qhi(&["asymptotics", "--x", "1", "--z", "2", "--n", "0", "--N-list", "11,21"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.contains("N 11: ratio") && out.contains("N 21: ratio"));
}
