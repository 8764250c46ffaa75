use std::f64::consts::PI;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn pertorb(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pertorb"))
        .args(args)
        .arg("--output-dir")
        .arg(dir)
        .env_remove("PERTORB_OUTPUT_DIR")
        .output()
        .expect("binary runs")
}

fn result(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn cycle_report_for_greenspan_holmes() {
    let dir = tempfile::tempdir().unwrap();
    let r = result(&pertorb(dir.path(), &["cycle", "--scenario", "greenspan_holmes", "--params", r#"{"delta":0.02}"#]));
    let period = r["period"].as_f64().unwrap();
    assert!((period - 2.0 * PI / 0.98).abs() < 1e-9, "period {period}");
    for f in ["cycle.json", "cycle.csv", "multipliers.csv", "cycle_report.json"] {
        assert!(dir.path().join(f).exists(), "{f} missing");
    }
    let rep = read_json(&dir.path().join("cycle_report.json"));
    assert_eq!(rep["config"]["scenario"]["name"], "greenspan_holmes");
    assert_eq!(rep["config"]["scenario"]["params"]["delta"], 0.02);
    let rec = read_json(&dir.path().join("cycle.json"));
    assert!((rec["T"].as_f64().unwrap() - period).abs() < 1e-12);
}

#[test]
fn degenerate_ring_has_double_unit_multiplier() {
    let dir = tempfile::tempdir().unwrap();
    let r = result(&pertorb(dir.path(), &["cycle", "--scenario", "degenerate_ring", "--params", r#"{"mu":1,"nu":0,"alpha":1}"#]));
    assert_eq!(r["monodromy"]["unit_multiplicity"], 2);
    assert_eq!(r["simple"], false);
}

#[test]
fn harmonic_guess_gives_period_two_pi() {
    let dir = tempfile::tempdir().unwrap();
    let r = result(&pertorb(dir.path(), &["cycle", "--scenario", "linear_asym", "--set", "cycle.guess=[1,0]", "--set", "cycle.normal=[0,1]"]));
    assert!((r["period"].as_f64().unwrap() - 2.0 * PI).abs() < 1e-8);
}

#[test]
fn biffun_matches_closed_form_averaging_function() {
    let dir = tempfile::tempdir().unwrap();
    let r = result(&pertorb(dir.path(), &["biffun", "--scenario", "linear_asym", "--params", r#"{"mu":1,"nu":0}"#]));
    let phis = r["phi"].as_array().unwrap();
    assert_eq!(phis.len(), 4);
    for p in phis {
        assert!(p["closed_form_deviation"].as_f64().unwrap() < 1e-6, "{p}");
    }
    let csv = std::fs::read_to_string(dir.path().join("phi_s3.csv")).unwrap();
    assert!(csv.lines().count() > 100);
}

#[test]
fn zero_forcing_gives_zero_tables() {
    let dir = tempfile::tempdir().unwrap();
    let r = result(&pertorb(dir.path(), &["biffun", "--scenario", "greenspan_holmes", "--set", "scenario.zero_forcing=true"]));
    assert!(r["malkin_integral"]["max_abs"].as_f64().unwrap() < 1e-12);
    assert!(r["melnikov"]["max_abs"].as_f64().unwrap() < 1e-12);
    for p in r["phi"].as_array().unwrap() {
        assert!(p["min_norm"].as_f64().unwrap() < 1e-8);
    }
}

#[test]
fn symmetry_summary_for_greenspan_holmes() {
    let dir = tempfile::tempdir().unwrap();
    let r = result(&pertorb(dir.path(), &["biffun", "--scenario", "greenspan_holmes"]));
    let xi = &r["symmetry_integrals"]["xi_tilde"];
    assert_eq!(xi.as_array().unwrap().len(), 2);
    assert_eq!(r["symmetry_integrals"]["xi_tilde_1_positive"], true);
}

#[test]
fn degree_on_linear_system() {
    let dir = tempfile::tempdir().unwrap();
    let r = result(&pertorb(dir.path(), &["degree", "--scenario", "linear_asym", "--params", r#"{"mu":1,"nu":0}"#]));
    assert_eq!(r["field_on_cycle"]["value"], 1);
    let d = r["minus_phi_t"]["degree"].as_i64().unwrap();
    assert!(d == 0 || d == 2, "degree {d}");
    assert_eq!(r["two_zero_certificate"]["holds"], true);
}

#[test]
fn degree_formula_near_the_inner_equilibrium() {
    let dir = tempfile::tempdir().unwrap();
    let r = result(&pertorb(
        dir.path(),
        &[
            "degree",
            "--scenario",
            "predator_prey",
            "--set",
            r#"degree.circle={"center":[0.6666666666666667,1.2962962962962963],"radius":0.05}"#,
            "--set",
            "degree.eps=1e-3",
        ],
    ));
    let b = &r["boundary"];
    assert_eq!(b["direct_degree"]["value"], 1);
    assert_eq!(b["formula_degree"], 1);
    assert_eq!(b["formula_matches_direct"], true);
}

#[test]
fn predict_separates_admissible_and_large_delta() {
    let verdict = |delta: &str| {
        let dir = tempfile::tempdir().unwrap();
        let params = format!(r#"{{"delta":{delta}}}"#);
        let r = result(&pertorb(dir.path(), &["predict", "--scenario", "greenspan_holmes", "--params", &params]));
        assert!(dir.path().join("prediction.json").exists());
        let e = r["entries"].as_array().unwrap().iter().find(|e| e["name"] == "symmetric_two_sided").cloned().unwrap();
        e["verdict"].as_bool().unwrap()
    };
    assert!(verdict("0.025"));
    assert!(!verdict("0.1"));
}

#[test]
fn verify_without_forcing_stays_on_the_cycle() {
    let dir = tempfile::tempdir().unwrap();
    let r = result(&pertorb(
        dir.path(),
        &["verify", "--scenario", "greenspan_holmes", "--set", "scenario.zero_forcing=true", "--set", "grids.eps=[1e-2,1e-3]", "--svg"],
    ));
    for e in r["sweep"]["entries"].as_array().unwrap() {
        assert!(e["dist0"].as_f64().unwrap() < 1e-9);
    }
    assert!(dir.path().join("sweep.csv").exists());
    assert!(dir.path().join("sweep.svg").exists());
}

#[test]
fn demo_writes_one_consolidated_report() {
    let dir = tempfile::tempdir().unwrap();
    let r = result(&pertorb(dir.path(), &["demo", "duffing"]));
    let s = &r["summary"];
    let passing: Vec<&str> = s["passing_predictions"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    assert!(passing.contains(&"decomposition_no_crossing"));
    assert_eq!(s["two_sided"][0]["found_both"], true);
    let base = dir.path().join("demo-duffing");
    assert!(base.join("demo_report.json").exists());
    for stage in ["cycle", "biffun", "degree", "predict", "verify"] {
        assert!(base.join(stage).is_dir(), "{stage}");
    }
}

#[test]
fn outputs_are_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        result(&pertorb(d.path(), &["cycle", "--scenario", "duffing"]));
    }
    for f in ["cycle.csv", "multipliers.csv", "cycle.json"] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn config_file_env_and_flags_compose() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"scenario": {"name": "duffing"}, "output_dir": "ignored"}"#).unwrap();
    let env_dir = dir.path().join("from-env");
    let out = Command::new(env!("CARGO_BIN_EXE_pertorb"))
        .args(["cycle", "--config"])
        .arg(&cfg)
        .env("PERTORB_OUTPUT_DIR", &env_dir)
        .output()
        .unwrap();
    result(&out);
    let rep = read_json(&env_dir.join("cycle_report.json"));
    assert_eq!(rep["scenario"], "duffing");
    let flag_dir = dir.path().join("from-flag");
    let out = Command::new(env!("CARGO_BIN_EXE_pertorb"))
        .args(["cycle", "--scenario", "greenspan_holmes", "--config"])
        .arg(&cfg)
        .arg("--output-dir")
        .arg(&flag_dir)
        .env("PERTORB_OUTPUT_DIR", &env_dir)
        .output()
        .unwrap();
    result(&out);
    assert_eq!(read_json(&flag_dir.join("cycle_report.json"))["scenario"], "greenspan_holmes");
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(pertorb(dir.path(), &["cycle", "--scenario", "nope"]).status.code(), Some(1));
    assert_eq!(pertorb(dir.path(), &["cycle", "--set", "integrator.nope=1"]).status.code(), Some(1));
    assert_eq!(pertorb(dir.path(), &["cycle", "--bogus"]).status.code(), Some(1));
    assert_eq!(pertorb(dir.path(), &["cycle", "--params", r#"{"delta":2}"#]).status.code(), Some(1));
    assert_eq!(pertorb(dir.path(), &["cycle", "--set", "integrator.max_steps=5"]).status.code(), Some(2));
}
