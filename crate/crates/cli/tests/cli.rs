//! End-to-end runs of the ddctl binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ddctl::config::ScenarioConfig;
use ddctl::scenarios::builtin;
use serde_json::Value;
use tempfile::TempDir;

fn ddctl(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ddctl"))
        .args(args)
        .arg("--out-dir")
        .arg(out)
        .env("DDCTL_SCENARIO_PATH", "")
        .output()
        .expect("binary runs")
}

fn bare(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ddctl")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, cfg: &ScenarioConfig) -> PathBuf {
    let path = dir.join(format!("{}.json", cfg.name));
    std::fs::write(&path, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
    path
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

const UNCONTROLLABLE: &str = r#"{
  "name": "uncontrollable",
  "plant": {"a": [[1.0, 0.0], [0.0, -2.0]], "b": [[0.0], [1.0]], "c": [[1.0, 1.0]]},
  "excitation": {"channels": [{"terms": [
    {"amplitude": 1.0, "frequency": 1.0, "phase": 0.0},
    {"amplitude": 1.0, "frequency": 2.3, "phase": 0.5},
    {"amplitude": 1.0, "frequency": 3.7, "phase": 1.0},
    {"amplitude": 1.0, "frequency": 5.1, "phase": 1.5}]}]},
  "horizon": 3.0,
  "samples": 40,
  "tuning": {"lambda": [[0.0, 1.0], [-2.0, -3.0]], "ell": [0.0, 1.0]},
  "x0": [1.0, 0.5]
}"#;

#[test]
fn stabilize_writes_a_verified_run_directory() {
    let tmp = TempDir::new().unwrap();
    let out = ddctl(&["synth", "--scenario", "batch_reactor"], tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let dir = tmp.path().join("batch_reactor-stabilize");
    let manifest = json(&dir.join("manifest.json"));
    assert_eq!(manifest["outcome"]["exit_code"], 0);
    for f in ["informativity.json", "lmi.json", "certificate.json", "gains.json", "controller.json"] {
        assert!(dir.join(f).exists(), "{f} missing");
    }

    let rep = bare(&["report", dir.to_str().unwrap()]);
    assert_eq!(rep.status.code(), Some(0));
    let text = String::from_utf8_lossy(&rep.stdout);
    assert_eq!(text.lines().filter(|l| l.trim_end().ends_with('i') && l.starts_with("  ")).count(), 12);
    assert!(dir.join("report.json").exists());
}

#[test]
fn reruns_are_byte_identical() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    for t in [&a, &b] {
        assert_eq!(ddctl(&["simulate", "--scenario", "batch_reactor"], t.path()).status.code(), Some(0));
    }
    let files: Vec<_> = std::fs::read_dir(a.path().join("batch_reactor-simulate"))
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .filter(|n| n.to_string_lossy().ends_with(".csv"))
        .collect();
    assert!(!files.is_empty());
    for f in files {
        let x = std::fs::read(a.path().join("batch_reactor-simulate").join(&f)).unwrap();
        let y = std::fs::read(b.path().join("batch_reactor-simulate").join(&f)).unwrap();
        assert_eq!(x, y, "{f:?} differs");
    }
}

#[test]
fn unknown_field_is_a_config_error() {
    let tmp = TempDir::new().unwrap();
    let mut v: Value = serde_json::from_str(UNCONTROLLABLE).unwrap();
    v["plant"]["d_matrix"] = serde_json::json!([[0.0]]);
    let path = tmp.path().join("bad.json");
    std::fs::write(&path, v.to_string()).unwrap();
    let out = ddctl(&["synth", "--config", path.to_str().unwrap()], tmp.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_scenario_and_empty_report_dir_are_config_errors() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(ddctl(&["synth", "--scenario", "no_such_plant"], tmp.path()).status.code(), Some(2));
    assert_eq!(ddctl(&["synth"], tmp.path()).status.code(), Some(2));
    assert_eq!(bare(&["report", tmp.path().to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn single_tone_excitation_is_not_informative() {
    let tmp = TempDir::new().unwrap();
    let mut cfg = builtin("batch_reactor").unwrap();
    cfg.name = "one_tone".into();
    for ch in &mut cfg.excitation.channels {
        ch.terms.truncate(1);
    }
    let path = write_config(tmp.path(), &cfg);
    let out = ddctl(&["synth", "--config", path.to_str().unwrap()], tmp.path());
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(json(&tmp.path().join("one_tone-stabilize/informativity.json"))["informative"], false);
}

#[test]
fn uncontrollable_unstable_mode_makes_the_lmi_infeasible() {
    let tmp = TempDir::new().unwrap();
    let path = tmp.path().join("uncontrollable.json");
    std::fs::write(&path, UNCONTROLLABLE).unwrap();
    let out = ddctl(&["synth", "--config", path.to_str().unwrap()], tmp.path());
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
    let dir = tmp.path().join("uncontrollable-stabilize");
    assert_eq!(json(&dir.join("informativity.json"))["informative"], true);
    assert_ne!(json(&dir.join("lmi.json"))["verdict"], "feasible");
}

#[test]
fn unreachable_margin_fails_certification() {
    let tmp = TempDir::new().unwrap();
    let mut cfg = builtin("batch_reactor").unwrap();
    cfg.name = "greedy".into();
    cfg.tolerances.hurwitz_margin = 100.0;
    let path = write_config(tmp.path(), &cfg);
    let out = ddctl(&["synth", "--config", path.to_str().unwrap()], tmp.path());
    assert_eq!(out.status.code(), Some(5));
    assert_eq!(json(&tmp.path().join("greedy-stabilize/certificate.json"))["pass"], false);
}

#[test]
fn duplicate_names_are_rejected() {
    let tmp = TempDir::new().unwrap();
    let out = ddctl(&["synth", "--scenario", "batch_reactor", "--scenario", "batch_reactor"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn list_includes_files_from_extra_dirs() {
    let tmp = TempDir::new().unwrap();
    std::fs::write(tmp.path().join("uncontrollable.json"), UNCONTROLLABLE).unwrap();
    std::fs::write(tmp.path().join("broken.json"), "{ not json").unwrap();
    let out = bare(&["list", "--dir", tmp.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    for name in ["batch_reactor", "surface_vessel", "uncontrollable"] {
        assert!(text.contains(name), "{name} not listed:\n{text}");
    }
    assert!(text.contains("invalid"));
}

#[test]
fn schema_is_json() {
    let out = bare(&["schema"]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v.get("properties").is_some() || v.get("$defs").is_some());
}
