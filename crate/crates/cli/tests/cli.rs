use std::fs;
use std::path::Path;
use std::process::Command;

use nls_cli::manifest::{RunManifest, MANIFEST_NAME};
use nls_cli::{dispatch, BranchConfig, EvolveConfig};
use serde_json::Value;

fn nlslab(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_nlslab")).args(args).output().unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn manifest(dir: &Path) -> RunManifest {
    serde_json::from_str(&fs::read_to_string(dir.join(MANIFEST_NAME)).unwrap()).unwrap()
}

#[test]
fn admissible_cubic_three_d() {
    let (code, out, _) = nlslab(&["admissible", "--N", "3", "--m1", "3", "--m2", "3"]);
    assert_eq!(code, 0);
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["admissible"], Value::Bool(true));
    assert_eq!(v["sigma_p"].as_f64().unwrap(), 0.75);
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let (code, _, err) = nlslab(&["frobnicate"]);
    assert_eq!(code, 1);
    let v: Value = serde_json::from_str(err.trim()).unwrap();
    assert_eq!(v["error"]["kind"], "usage");
}

#[test]
fn region_in_one_dimension_is_a_runtime_error() {
    let (code, _, err) = nlslab(&["region", "--N", "1"]);
    assert_eq!(code, 2);
    let v: Value = serde_json::from_str(err.trim()).unwrap();
    assert_eq!(v["error"]["message"], "q selection requires N ≥ 2");
}

#[test]
fn region_csv_has_header_and_rows() {
    let (code, out, _) = nlslab(&["region", "--N", "3", "--samples", "5"]);
    assert_eq!(code, 0);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "N,m2,bound1,bound2");
    assert_eq!(lines.len(), 6);
}

#[test]
fn missing_config_is_a_usage_error() {
    let mut out = Vec::new();
    let mut err = Vec::new();
    assert_eq!(dispatch(["nlslab", "evolve"], &mut out, &mut err), 1);
    assert_eq!(dispatch(["nlslab", "profile"], &mut out, &mut err), 1);
}

#[test]
fn profile_writes_csv_summary_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("p");
    let (code, stdout, _) =
        nlslab(&["profile", "--N", "1", "--omega", "1", "--nodes", "2000", "--radius", "20", "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0, "{stdout}");
    let v: Value = serde_json::from_str(&stdout).unwrap();
    assert!((v["phi0"].as_f64().unwrap() - 2f64.sqrt()).abs() < 1e-4);
    let csv = fs::read_to_string(out.join("profile.csv")).unwrap();
    assert!(csv.starts_with("r,phi\n"));
    assert_eq!(csv.lines().count(), 2001);
    let m = manifest(&out);
    assert_eq!(m.command, "profile");
    assert!(m.outputs.contains(&"profile.csv".to_string()));
    // the emitted config re-parses to the same config
    let cfg: BranchConfig = serde_json::from_str(&fs::read_to_string(out.join("config.json")).unwrap()).unwrap();
    assert_eq!(cfg.omega, 1.0);
    assert_eq!(nls_core::dichotomy::config_hash(&cfg), m.config_hash);
}

#[test]
fn spectrum_of_unstable_cubic() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s");
    let (code, stdout, err) =
        nlslab(&["spectrum", "--N", "3", "--omega", "1", "--nodes", "400", "--radius", "15", "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    let v: Value = serde_json::from_str(&stdout).unwrap();
    let e = v["e_plus"].as_f64().unwrap();
    assert!(e > 5.0 && e < 6.0, "{e}");
    assert!((v["normalization_check"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    let csv = fs::read_to_string(out.join("eigenfunction.csv")).unwrap();
    assert!(csv.starts_with("r,y_re,y_im\n"));
}

#[test]
fn spectrum_of_stable_branch_fails_with_json_error() {
    let (code, _, err) = nlslab(&["spectrum", "--N", "1", "--omega", "1", "--nodes", "400"]);
    assert_eq!(code, 2);
    let v: Value = serde_json::from_str(err.trim()).unwrap();
    assert_eq!(v["error"]["kind"], "spectral");
}

fn write(path: &Path, text: &str) {
    fs::write(path, text).unwrap();
}

#[test]
fn evolve_then_decompose_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("evolve.json");
    write(
        &cfg_path,
        r#"{
          "model": {"dim": 1, "kind": "pure_power", "m": 3},
          "grid": {"nodes": 600, "radius": 20},
          "dt": 0.002, "horizon": 0.2, "observe_every": 10,
          "initial": {"soliton": {"omega": 1.0, "theta": 0.3},
                      "gaussian": {"amplitude_re": 0.001, "width": 2.0}}
        }"#,
    );
    let out = dir.path().join("ev");
    let (code, stdout, err) = nlslab(&["evolve", "--config", cfg_path.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    let v: Value = serde_json::from_str(&stdout).unwrap();
    assert!(v["mass_drift"].as_f64().unwrap() < 1e-12);
    let obs = fs::read_to_string(out.join("observations.csv")).unwrap();
    assert!(obs.starts_with("t,mass,energy,l2,sup\n"));
    assert_eq!(obs.lines().count(), 1 + 11);
    let emitted: EvolveConfig = serde_json::from_str(&fs::read_to_string(out.join("config.json")).unwrap()).unwrap();
    let original: EvolveConfig = serde_json::from_str(&fs::read_to_string(&cfg_path).unwrap()).unwrap();
    assert_eq!(emitted, original);

    let dec_path = dir.path().join("decompose.json");
    write(
        &dec_path,
        r#"{
          "model": {"dim": 1, "kind": "pure_power", "m": 3},
          "grid": {"nodes": 600, "radius": 20},
          "interval": [0.5, 2.0], "omega_ref": 1.0, "t": 0.2,
          "field": "ev/final_field.csv", "guess": [0.5, 1.0]
        }"#,
    );
    let out2 = dir.path().join("dec");
    let (code, stdout, err) = nlslab(&["decompose", "--config", dec_path.to_str().unwrap(), "--out", out2.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    let v: Value = serde_json::from_str(&stdout).unwrap();
    assert!((v["omega"].as_f64().unwrap() - 1.0).abs() < 1e-2);
    assert!(v["orth_residuals"].as_array().unwrap().iter().all(|x| x.as_f64().unwrap().abs() < 1e-8));
    assert_eq!(v["has_real_pair"], Value::Bool(false));
    assert_eq!(manifest(&out2).inputs.len(), 2);
}

const EXPERIMENT: &str = r#"{
  "schema_version": 1,
  "model": {"dim": 3, "kind": "pure_power", "m": 3},
  "grid": {"nodes": 300, "radius": 15},
  "interval": [0.5, 2.0],
  "omega0": 1.0,
  "perturbation": {"c_plus": 0.001},
  "alpha0": 0.01,
  "dt": 0.004,
  "horizon": 4.0,
  "observe_every": 5,
  "r0": 8.0
}"#;

#[test]
fn dichotomy_run_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    write(&cfg, EXPERIMENT);
    let mut series = Vec::new();
    for name in ["a", "b"] {
        let out = dir.path().join(name);
        let (code, stdout, err) = nlslab(&["dichotomy", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert_eq!(code, 0, "{err}");
        let v: Value = serde_json::from_str(&stdout).unwrap();
        assert_eq!(v["classification"], "Escaped");
        assert!(v.get("series").is_none());
        series.push(fs::read(out.join("series.csv")).unwrap());
        assert_eq!(manifest(&out).command, "dichotomy");
    }
    assert_eq!(series[0], series[1]);
}

#[test]
fn sweep_reports_failures_with_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let good: Value = serde_json::from_str(EXPERIMENT).unwrap();
    let mut bad = good.clone();
    bad["omega0"] = Value::from(0.5001);
    let sweep = serde_json::json!({ "schema_version": 1, "runs": [good, bad] });
    let cfg = dir.path().join("sweep.json");
    write(&cfg, &sweep.to_string());
    let out = dir.path().join("sw");
    let (code, stdout, err) =
        nlslab(&["sweep", "--config", cfg.to_str().unwrap(), "--parallel", "2", "--out", out.to_str().unwrap()]);
    assert_eq!(code, 2, "{err}");
    let rows: Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(rows.as_array().unwrap().len(), 2);
    assert!(rows[1]["error"].is_string());
    let table = fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_eq!(table.lines().count(), 3);
    assert!(out.join("run_000").join(MANIFEST_NAME).exists());
    assert!(!out.join("run_001").exists());
    let v: Value = serde_json::from_str(err.trim()).unwrap();
    assert_eq!(v["error"]["kind"], "sweep");
}

#[test]
fn config_hash_ignores_key_order() {
    let a: Value = serde_json::from_str(EXPERIMENT).unwrap();
    let mut keys: Vec<(String, Value)> = a.as_object().unwrap().clone().into_iter().collect();
    keys.reverse();
    let text = format!(
        "{{{}}}",
        keys.iter().map(|(k, v)| format!("\"{k}\":{v}")).collect::<Vec<_>>().join(",")
    );
    let x: nls_core::dichotomy::ExperimentConfig = serde_json::from_str(EXPERIMENT).unwrap();
    let y: nls_core::dichotomy::ExperimentConfig = serde_json::from_str(&text).unwrap();
    assert_eq!(x.hash(), y.hash());
}
