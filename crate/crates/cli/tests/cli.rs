use std::process::{Command, Output};

use serde_json::Value;
use wkserver::{ConstantTable, PotentialTable};

fn wkserver(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wkserver")).args(args).output().expect("binary runs")
}

fn json(args: &[&str]) -> Value {
    let out = wkserver(args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("json output")
}

#[test]
fn constants_alpha_values() {
    let v = json(&["constants", "--k", "2"]);
    assert_eq!(v["alpha"], serde_json::json!(["1", "5"]));
    let v = json(&["constants", "--k", "3"]);
    assert_eq!(v["alpha"][2], "41");
    assert_eq!(v["identities"]["scaling"], true);
    assert_eq!(v["alpha_below_growth_bound"], true);
}

#[test]
fn constants_k1_single_row() {
    let out = wkserver(&["constants", "--k", "1", "--out", "csv"]);
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap(), "mask,C\n1,2\n");
}

#[test]
fn constants_dump_round_trips() {
    let v = json(&["constants", "--k", "5"]);
    let t = ConstantTable::from_json(&v).unwrap();
    assert_eq!(t, ConstantTable::build(5).unwrap());
}

#[test]
fn potentials_dump_round_trips() {
    for backend in ["direct", "gs"] {
        let v = json(&["potentials", "--p", "0.9,0.5,0.3,0.1", "--backend", backend]);
        let t = PotentialTable::from_json(&v).unwrap();
        assert_eq!(t.to_json(), v);
    }
    let v = json(&["potentials", "--p", "3,2"]);
    assert_eq!(v["phi"]["3"], 4.0 / 3.0);
    assert_eq!(v["f"]["2"], 1.2);
}

#[test]
fn ratio_reports_user_order() {
    let v = json(&["ratio", "--beta", "100,1", "--p", "0.02,3"]);
    assert_eq!(v["alpha_tilde"], 5.0);
    assert_eq!(v["arg_t"], 0);
    assert_eq!(v["s"], 0.01);
}

#[test]
fn verify_sweeps() {
    let v = json(&["verify", "--k", "4", "--trials", "100", "--seed", "3"]);
    assert_eq!(v["failures"], 0);
    assert!(v["checks"].as_u64().unwrap() > 0);
    assert!(v["max_defect"].as_f64().unwrap() < 1e-9);

    let v = json(&["verify", "--k", "1", "--trials", "5"]);
    assert_eq!(v["failures"], 0);

    let v = json(&["verify", "--k", "3", "--trials", "0"]);
    assert_eq!(v["checks"], 0);
}

#[test]
fn simulate_k1_is_exactly_one() {
    let v = json(&["simulate", "--beta", "1", "--p", "1", "--steps", "1000"]);
    assert_eq!(v["pooled"]["ratio"], 1.0);
    assert_eq!(v["trials"][0]["alg"], 1000.0);
    assert_eq!(v["trials"][0]["adv"], 1000.0);
}

#[test]
fn simulate_harmonic_below_k_alpha_k() {
    let v = json(&["simulate", "--beta", "1,10", "--harmonic", "--steps", "100000", "--trials", "4", "--seed", "1"]);
    assert!(v["pooled"]["ratio"].as_f64().unwrap() <= 10.0);
    assert_eq!(v["pooled"]["audit_failures"], 0);
}

#[test]
fn simulate_is_deterministic() {
    let args = ["simulate", "--beta", "1,30,200", "--optimal", "--steps", "20000", "--trials", "3", "--seed", "5"];
    let a = wkserver(&args);
    let b = wkserver(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn simulate_writes_transcript() {
    let dir = std::env::temp_dir().join(format!("wkserver-transcript-{}", std::process::id()));
    let path = dir.with_extension("csv");
    let out = wkserver(&["simulate", "--beta", "1,2", "--optimal", "--steps", "10", "--transcript", path.to_str().unwrap()]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&path).unwrap();
    std::fs::remove_file(&path).unwrap();
    assert!(text.starts_with("step,phase,request,mover,cost,state_mask,phi\n"));
    assert_eq!(text.lines().filter(|l| l.contains(",algorithm,")).count(), 10);
}

#[test]
fn sweep_k2_passes() {
    let v = json(&["sweep", "--k", "2"]);
    assert_eq!(v["sweep"]["report"]["failures"], 0);
    assert_eq!(v["limit"]["report"]["failures"], 0);
}

#[test]
fn usage_errors_exit_1() {
    for args in [
        &["ratio", "--beta", "1,2"][..],
        &["ratio", "--beta", "1,2", "--optimal", "--harmonic"],
        &["ratio", "--k", "3", "--beta", "1,2", "--optimal"],
        &["constants", "--k", "0"],
        &["potentials", "--p", "1,-2"],
        &["no-such-command"],
    ] {
        assert_eq!(wkserver(args).status.code(), Some(1), "{args:?}");
    }
    assert_eq!(wkserver(&["--help"]).status.code(), Some(0));
}

#[test]
fn failed_checks_exit_2() {
    // The absolute gap threshold is out of reach at k = 4.
    assert_eq!(wkserver(&["sweep", "--k", "4", "--out", "human"]).status.code(), Some(2));
}
