use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn qtrack(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qtrack")).current_dir(dir).args(args).output().expect("spawn qtrack")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = qtrack(dir, args);
    assert!(out.status.success(), "{args:?} failed:\n{}", String::from_utf8_lossy(&out.stderr));
    out
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn model_round_trips_through_file() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["model", "--gamma", "2", "--omega", "0.3", "--out", "m.json"]);
    let first = fs::read_to_string(dir.path().join("m.json")).unwrap();
    ok(dir.path(), &["model", "--model", "m.json", "--out", "m2.json"]);
    assert_eq!(first, fs::read_to_string(dir.path().join("m2.json")).unwrap());
    assert_eq!(read_json(&dir.path().join("m.json"))["dim"], 2);
}

#[test]
fn omega_and_epsilon_conflict() {
    let dir = tempfile::tempdir().unwrap();
    let out = qtrack(dir.path(), &["model", "--omega", "0.1", "--epsilon", "0.01"]);
    assert!(!out.status.success());
}

#[test]
fn three_two_state_ensembles_below_threshold() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["ensembles", "--epsilon", "0.04", "--k", "2", "--out", "e.json"]);
    let doc = read_json(&dir.path().join("e.json"));
    let ens = doc["ensembles"].as_array().unwrap();
    assert_eq!(ens.len(), 3);
    for e in ens {
        assert!(e["entropy_bits"].as_f64().unwrap() >= doc["S_vn_bits"].as_f64().unwrap());
    }
}

#[test]
fn scheme_reports_one_setting_per_state() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["scheme", "--epsilon", "0.04", "--out", "s.json"]);
    let doc = read_json(&dir.path().join("s.json"));
    assert_eq!(doc["betas"].as_array().unwrap().len(), 2);
    assert!(doc["jump_rates"].as_array().unwrap().iter().all(|r| r.as_f64().unwrap() > 0.0));
}

#[test]
fn out_of_range_index_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = qtrack(dir.path(), &["scheme", "--epsilon", "0.07", "--index", "1"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("out of range"));
}

#[test]
fn simulate_writes_trajectory_and_stats() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["simulate", "--epsilon", "0.04", "--t-final", "100", "--seed", "3", "--resolution", "0.01"]);
    let csv = fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("time,memory_state,event"));
    assert!(csv.trim_end().ends_with(",end"));
    let stats = read_json(&dir.path().join("stats.json"));
    assert_eq!(stats["distinct_states"], 2);
    assert!(stats["max_state_deviation"].as_f64().unwrap() < 1e-6);
    let total: f64 = stats["empirical_probs"].as_array().unwrap().iter().map(|p| p.as_f64().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-12);
}

#[test]
fn small_sweep_has_header_and_rows() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["sweep", "--epsilon-grid", "0,0.04,0.07", "--k", "2"]);
    let csv = fs::read_to_string(dir.path().join("entropy_sweep.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("epsilon,family_id,K,h_bits,S_vn_bits,exists"));
    // Three families at three grid points.
    assert_eq!(lines.count(), 9);
}

#[test]
fn geometry_refuses_pure_steady_state() {
    let dir = tempfile::tempdir().unwrap();
    let out = qtrack(dir.path(), &["geometry", "--epsilon", "0", "--k", "2"]);
    assert!(!out.status.success());
    ok(dir.path(), &["geometry", "--epsilon", "0.04", "--k", "2"]);
    let doc = read_json(&dir.path().join("geometry.json"));
    assert_eq!(doc["ensembles"].as_array().unwrap().len(), 3);
}

#[test]
fn verify_exit_code_tracks_verdicts() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(dir.path(), &["verify", "--criteria", "11,2"]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("[PASS]"));
    assert_eq!(read_json(&dir.path().join("verify_report.json"))["all_passed"], true);

    let out = qtrack(dir.path(), &["verify", "--criteria", "1", "--tolerance-scale", "1e-20", "--out", "tight.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(read_json(&dir.path().join("tight.json"))["all_passed"], false);
}

#[test]
fn cheap_verdicts_do_not_depend_on_seed() {
    let dir = tempfile::tempdir().unwrap();
    let verdicts: Vec<Vec<bool>> = ["1", "7"]
        .iter()
        .map(|seed| {
            let path = format!("v{seed}.json");
            ok(dir.path(), &["verify", "--criteria", "1,2,11", "--seed", seed, "--out", &path]);
            read_json(&dir.path().join(&path))["criteria"]
                .as_array()
                .unwrap()
                .iter()
                .map(|c| c["passed"].as_bool().unwrap())
                .collect()
        })
        .collect();
    assert_eq!(verdicts[0], verdicts[1]);
}
