use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn holonomy(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_holonomy"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &TempDir, name: &str, text: &str) -> String {
    let path = dir.path().join(name);
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!("bad json ({e}): {}\n{}", String::from_utf8_lossy(&out.stdout), String::from_utf8_lossy(&out.stderr))
    })
}

const QUICK: [&str; 4] = ["--step", "1e-2", "--curves", "5"];

#[test]
fn verify_fixtures_exit_zero() {
    for name in ["euclidean_flat", "scaled_euclidean_incompatible", "rotated_blend"] {
        let mut args = vec!["verify", name];
        args.extend(QUICK);
        let out = holonomy(&args);
        assert_eq!(out.status.code(), Some(0), "{name}: {}", String::from_utf8_lossy(&out.stderr));
        let report = json(&out);
        assert_eq!(report["fixture"], name);
        assert_eq!(report["pass"], true);
    }
}

#[test]
fn expected_failures_are_recorded() {
    let mut args = vec!["verify", "scaled_euclidean_incompatible"];
    args.extend(QUICK);
    let report = json(&holonomy(&args));
    let compat = report["checks"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["check"] == "parallelism_compat")
        .unwrap();
    assert_eq!(compat["pass"], false);
    assert_eq!(compat["expected_pass"], false);
    assert_eq!(compat["expectation_met"], true);
    let ratio = compat["witness"]["ratio"].as_f64().unwrap();
    assert!((ratio - std::f64::consts::E).abs() < 1e-12);
}

#[test]
fn report_schema() {
    let mut args = vec!["verify", "euclidean_flat"];
    args.extend(QUICK);
    let report = json(&holonomy(&args));
    for check in report["checks"].as_array().unwrap() {
        for key in ["check", "samples", "max_abs_error", "max_rel_error", "tolerance", "pass", "witness", "seed", "step"] {
            assert!(check.get(key).is_some(), "missing {key} in {check}");
        }
    }
}

#[test]
fn configuration_errors_exit_two() {
    assert_eq!(holonomy(&["verify", "no_such_fixture"]).status.code(), Some(2));
    let dir = TempDir::new().unwrap();
    let bad = write(&dir, "bad.json", r#"{"fixture": "section5", "check": "holonomy_invariance", "colour": "red"}"#);
    assert_eq!(holonomy(&["check", "--config", &bad]).status.code(), Some(2));
    let missing = dir.path().join("missing.json");
    assert_eq!(holonomy(&["check", "--config", &missing.to_string_lossy()]).status.code(), Some(2));
    let bad_norm = write(&dir, "norm.json", r#"{"manifold": {"dim": 2, "norm": {"expression": "sqrt(a^2 +"}}, "check": "isometry_group"}"#);
    assert_eq!(holonomy(&["check", "--config", &bad_norm]).status.code(), Some(2));
    assert_eq!(holonomy(&["verify", "section5", "--step", "-1"]).status.code(), Some(2));
}

#[test]
fn inline_check_failure_exits_one() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "rescale.json",
        r#"{
            "manifold": {
                "dim": 2,
                "norm": "euclidean",
                "connection": {"coordinate": [{"index": [0, 0, 0], "value": "1"}]}
            },
            "check": "holonomy_invariance",
            "curves": 4,
            "step": 0.01
        }"#,
    );
    let out = holonomy(&["check", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json(&out)["pass"], false);
}

#[test]
fn inline_section5_checks_pass() {
    let dir = TempDir::new().unwrap();
    let manifold = r#"{
        "dim": 2,
        "frame": [["x", "1"], ["-1", "0"]],
        "norm": {"randers": {"q": [[4, 0], [0, 12]], "beta": [-1, 0]}},
        "connection": "frame_parallel",
        "other_connection": {"coordinate": [{"index": [0, 0, 1], "value": "-1"}]}
    }"#;
    for check in ["holonomy_invariance", "parallelism_compat", "compalg_criterion", "uniqueness", "generalized_berwald"] {
        let cfg = write(
            &dir,
            "s5.json",
            &format!(r#"{{"manifold": {manifold}, "check": "{check}", "curves": 5, "step": 0.01, "samples": 20}}"#),
        );
        let out = holonomy(&["check", "--config", &cfg]);
        assert_eq!(out.status.code(), Some(0), "{check}: {}", String::from_utf8_lossy(&out.stdout));
    }
    let cfg = write(&dir, "tor.json", &format!(r#"{{"manifold": {manifold}, "check": "berwald_obstruction", "samples": 10}}"#));
    let out = holonomy(&["check", "--config", &cfg]);
    assert!((json(&out)["torsion_max"].as_f64().unwrap() - 1.0).abs() < 1e-9);
}

#[test]
fn uniqueness_refuses_continuous_groups() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "u.json",
        r#"{"manifold": {"dim": 2, "norm": "euclidean", "connection": "flat", "other_connection": "flat"},
            "check": "uniqueness", "curves": 2, "step": 0.01}"#,
    );
    let out = holonomy(&["check", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(1));
    let v = json(&out);
    assert_eq!(v["applicable"], false);
    assert!(v["reason"].as_str().unwrap().contains("continuous"));
}

#[test]
fn synthesize_blends_cover() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "cover.json",
        r#"{
            "manifold": {
                "dim": 2,
                "norm": "euclidean",
                "cover": [
                    {"box": {"lower": [null, null], "upper": [1, null]}},
                    {"box": {"lower": [-1, null], "upper": [null, null]},
                     "frame": [["cos((1 + tanh(x))/2)", "sin((1 + tanh(x))/2)"], ["-sin((1 + tanh(x))/2)", "cos((1 + tanh(x))/2)"]]}
                ]
            },
            "region": {"lower": [-2, -2], "upper": [2, 2]},
            "grid": 5
        }"#,
    );
    let out_path = dir.path().join("conn.json");
    let out = holonomy(&["synthesize", "--config", &cfg, "--out", &out_path.to_string_lossy()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
    let samples = v["samples"].as_array().unwrap();
    assert_eq!(samples.len(), 25);
    for s in samples {
        let x = s["point"][0].as_f64().unwrap();
        let g: Vec<f64> = s["christoffels"].as_array().unwrap().iter().map(|e| e.as_f64().unwrap()).collect();
        let w: f64 = s["weights"].as_array().unwrap().iter().map(|e| e.as_f64().unwrap()).sum();
        assert!((w - 1.0).abs() < 1e-12);
        if x <= -1.0 {
            assert!(g.iter().all(|e| e.abs() < 1e-15));
        }
        // Γ_x is antisymmetric, Γ_y vanishes
        assert!((g[1] + g[4]).abs() < 1e-12 && g[0].abs() < 1e-12 && g[5].abs() < 1e-12);
        assert!(g[2].abs() + g[3].abs() + g[6].abs() + g[7].abs() < 1e-15);
    }
}

#[test]
fn isometry_group_command() {
    let out = holonomy(&["isometry-group", "--norm", "sqrt(4*a^2+12*b^2) - a"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["count"], 2);
    let out = holonomy(&["isometry-group", "--norm", "sqrt(a^2+b^2)"]);
    assert_eq!(json(&out)["continuous"], true);
    assert_eq!(holonomy(&["isometry-group", "--norm", "a +* b"]).status.code(), Some(2));
}

#[test]
fn same_seed_same_bytes() {
    let dir = TempDir::new().unwrap();
    let paths: Vec<_> = (0..2).map(|i| dir.path().join(format!("r{i}.json"))).collect();
    for p in &paths {
        let out = holonomy(&["verify", "rotated_blend", "--step", "1e-2", "--curves", "5", "--seed", "7", "--out", &p.to_string_lossy()]);
        assert_eq!(out.status.code(), Some(0));
        assert!(out.stdout.is_empty());
    }
    assert_eq!(std::fs::read(&paths[0]).unwrap(), std::fs::read(&paths[1]).unwrap());
    assert!(Path::new(&paths[0]).exists());
}
