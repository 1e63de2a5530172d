use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn wqed(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wqed")).args(args).output().expect("binary runs")
}

fn ok_json(args: &[&str]) -> Value {
    let out = wqed(args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("summary is JSON")
}

fn err_json(args: &[&str], code: i32) -> Value {
    let out = wqed(args);
    assert_eq!(out.status.code(), Some(code), "{}", String::from_utf8_lossy(&out.stdout));
    serde_json::from_slice(&out.stderr).expect("error is JSON")
}

fn write_tmp(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.display().to_string()
}

const MINIMAL: &str = r#"{
  "emitters": [{"label": "q", "kind": "qubit"}],
  "coupling_points": [{"emitter": 0, "tau": 0.0, "phi": 0.0}],
  "gamma": 1.0
}"#;

#[test]
fn minimal_scenario_gets_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let f = write_tmp(dir.path(), "min.json", MINIMAL);
    let v = ok_json(&["check", &f]);
    assert_eq!(v["scenario_json"]["simulation"]["bin_cutoff"], 3);
    assert_eq!(v["scenario_json"]["simulation"]["dt"], 1e-3);
}

#[test]
fn shipped_scenarios_validate_and_braided_order() {
    for entry in std::fs::read_dir(scenario("")).unwrap() {
        let p = entry.unwrap().path();
        ok_json(&["check", p.to_str().unwrap()]);
    }
    let v = ok_json(&["check", scenario("braided.json").to_str().unwrap()]);
    let owners: Vec<u64> = v["scenario_json"]["coupling_points"].as_array().unwrap().iter().map(|p| p["emitter"].as_u64().unwrap()).collect();
    assert_eq!(owners, vec![0, 1, 0, 1]);
}

#[test]
fn inadmissible_moments_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let text = MINIMAL.replace("\"gamma\": 1.0", "\"gamma\": 1.0, \"field\": {\"n\": 1.0, \"m\": [2.0, 0.0]}");
    let f = write_tmp(dir.path(), "bad.json", &text);
    let e = err_json(&["me", &f], 2);
    assert!(e["error"]["message"].as_str().unwrap().contains("|M|² ≤ N(N+1)"));
    assert_eq!(e["error"]["kind"], "inadmissible");
}

#[test]
fn unknown_keys_listed_together() {
    let dir = tempfile::tempdir().unwrap();
    let text = MINIMAL.replace("\"gamma\": 1.0", "\"gamma\": 1.0, \"gama\": 2, \"simulation\": {\"steps\": 3}");
    let f = write_tmp(dir.path(), "unk.json", &text);
    let msg = err_json(&["coeffs", &f], 2)["error"]["message"].as_str().unwrap().to_string();
    assert!(msg.contains("gama (line 4") && msg.contains("simulation.steps (line 4"), "{msg}");
}

#[test]
fn compare_single_qubit_halves() {
    let dir = tempfile::tempdir().unwrap();
    let v = ok_json(&["compare", scenario("single_qubit_vacuum.json").to_str().unwrap(), "--out-dir", dir.path().to_str().unwrap()]);
    for r in v["ratios"].as_array().unwrap() {
        let r = r.as_f64().unwrap();
        assert!((1.7..=2.3).contains(&r), "{r}");
    }
    assert!(v["discrepancies"][2].as_f64().unwrap() <= 2e-2);
    assert!(v["trajectories"]["max_population_deviation_in_stderr"].as_f64().unwrap() < 4.0);
    let csv = std::fs::read_to_string(dir.path().join("compare.csv")).unwrap();
    assert!(csv.starts_with("dt,trace_norm_discrepancy,ratio\n"));
}

#[test]
fn coeffs_on_decoherence_free_braided() {
    let dir = tempfile::tempdir().unwrap();
    let v = ok_json(&["coeffs", scenario("df_braided.json").to_str().unwrap(), "--out-dir", dir.path().to_str().unwrap(), "--format", "json"]);
    assert!(v["max_dissipative"].as_f64().unwrap() < 1e-12);
    assert_eq!(v["decoherence_free"], true);
    assert!((v["table"]["H"][0][1][0].as_f64().unwrap() - 1.0).abs() < 1e-12);
    let file: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("coeffs.json")).unwrap()).unwrap();
    assert_eq!(file["H"], v["table"]["H"]);
}

#[test]
fn df_scan_finds_giant_atom_point() {
    let dir = tempfile::tempdir().unwrap();
    let v = ok_json(&["df-scan", scenario("giant_atom.json").to_str().unwrap(), "--out-dir", dir.path().to_str().unwrap()]);
    let pts = v["df_points"].as_array().unwrap();
    assert_eq!(pts.len(), 1);
    let phis = pts[0]["point_phases"].as_array().unwrap();
    assert!((phis[1].as_f64().unwrap() - std::f64::consts::PI).abs() < 1e-12);
    assert_eq!(pts[0]["hvac_zero"], true);
}

#[test]
fn traj_is_deterministic_across_threads() {
    let dir = tempfile::tempdir().unwrap();
    let f = scenario("coherent_counting.json");
    let run = |threads: &str, sub: &str| {
        let out = dir.path().join(sub);
        ok_json(&["traj", f.to_str().unwrap(), "--n-traj", "200", "--seed", "11", "--threads", threads, "--out-dir", out.to_str().unwrap()]);
        std::fs::read(out.join("traj.csv")).unwrap()
    };
    let a = run("1", "a");
    assert_eq!(a, run("4", "b"));
    let header = String::from_utf8(a).unwrap().lines().next().unwrap().to_string();
    assert_eq!(header, "t,pop_0,purity,p_0,p_0_stderr,p_1,p_1_stderr");
}

#[test]
fn me_writes_full_precision_and_state_dump() {
    let dir = tempfile::tempdir().unwrap();
    let text = MINIMAL.replace(
        "\"gamma\": 1.0",
        "\"gamma\": 1.0, \"initial_state\": {\"levels\": [1]}, \"simulation\": {\"t_end\": 0.5, \"stride\": 250, \"dump_states\": true}",
    );
    let f = write_tmp(dir.path(), "s.json", &text);
    let out = dir.path().to_str().unwrap();
    ok_json(&["me", &f, "--out-dir", out]);
    let csv = std::fs::read_to_string(dir.path().join("me.csv")).unwrap();
    let last: Vec<f64> = csv.lines().last().unwrap().split(',').map(|x| x.parse().unwrap()).collect();
    assert_eq!(csv.lines().count(), 4);
    assert!((last[1] - (-0.5f64).exp()).abs() < 1e-10);
    assert!(csv.lines().nth(1).unwrap().contains("e0"));
    let bytes = std::fs::read(dir.path().join("me_states.bin")).unwrap();
    let (dims, recs) = wqed::io::read_density_matrices(&bytes[..]).unwrap();
    assert_eq!(dims, vec![2]);
    assert_eq!(recs.iter().map(|r| r.0).collect::<Vec<_>>(), vec![0, 250, 500]);
}

#[test]
fn flags_override_and_invalid_values_fail() {
    let dir = tempfile::tempdir().unwrap();
    let f = write_tmp(dir.path(), "min.json", MINIMAL);
    let out = dir.path().to_str().unwrap();
    ok_json(&["collide", &f, "--dt", "0.01", "--stride", "50", "--out-dir", out]);
    let csv = std::fs::read_to_string(dir.path().join("collide.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    let e = err_json(&["collide", &f, "--dt=-1", "--out-dir", out], 2);
    assert_eq!(e["exit_code"], 2);
    let e = err_json(&["me", dir.path().join("missing.json").to_str().unwrap()], 2);
    assert!(e["error"]["message"].as_str().unwrap().contains("cannot read"));
}
