use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use nemytskii::scenario::{load_config, parse_config};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_nemytskii"))
}

fn scenario(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name)
}

fn run(config: &Path, out: &Path, jobs: usize) -> Output {
    bin()
        .arg("run")
        .arg(config)
        .arg("--output-dir")
        .arg(out)
        .arg("--jobs")
        .arg(jobs.to_string())
        .output()
        .unwrap()
}

fn listing(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    names
}

fn without_timestamp(summary: &str) -> String {
    summary
        .lines()
        .filter(|l| !l.starts_with("generated_at:"))
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn presets_are_listed() {
    let out = bin().arg("presets").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for name in ["linear-heat", "cubic-tanh", "logistic-b"] {
        assert!(text.contains(name), "{text}");
    }
}

#[test]
fn heat_superposition_run_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let first = run(&scenario("heat-superposition.json"), &a, 1);
    assert_eq!(
        first.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&first.stderr)
    );
    assert_eq!(
        listing(&a),
        [
            "ensemble.csv",
            "monitors.csv",
            "summary.txt",
            "superposition.csv",
            "trajectory.csv"
        ]
    );
    assert_eq!(run(&scenario("heat-superposition.json"), &b, 3).status.code(), Some(0));
    for f in ["ensemble.csv", "monitors.csv", "superposition.csv", "trajectory.csv"] {
        assert!(
            fs::read(a.join(f)).unwrap() == fs::read(b.join(f)).unwrap(),
            "{f} differs"
        );
    }
    let sa = fs::read_to_string(a.join("summary.txt")).unwrap();
    let sb = fs::read_to_string(b.join("summary.txt")).unwrap();
    assert_eq!(without_timestamp(&sa), without_timestamp(&sb));
    assert!(sa.contains("status: PASS"));
}

#[test]
fn cubic_full_runs_all_experiments() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&scenario("cubic-full.json"), tmp.path(), 4);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let summary = fs::read_to_string(tmp.path().join("summary.txt")).unwrap();
    for kind in [
        "superposition",
        "coupling",
        "lipschitz_certificate",
        "weak_form_residual",
    ] {
        assert_eq!(summary.matches(&format!("] {kind}:")).count(), 1, "{summary}");
    }
    for f in ["coupling.csv", "lipschitz.csv", "weak_form.csv"] {
        let csv = fs::read_to_string(tmp.path().join(f)).unwrap();
        assert!(csv.starts_with("report_type,key,value\n"), "{f}");
    }
}

#[test]
fn validate_reports_config_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let ok = bin().arg("validate").arg(scenario("cubic-full.json")).output().unwrap();
    assert_eq!(ok.status.code(), Some(0));

    let text = fs::read_to_string(scenario("heat-superposition.json")).unwrap();
    let cases = [
        (
            "small.json",
            text.replace("\"n_cells\": 400", "\"n_cells\": 2"),
            "mesh.n_cells",
        ),
        ("unknown.json", text.replace("\"name\"", "\"foo\": 1, \"name\""), "foo"),
        ("broken.json", text.replace('}', ""), "line"),
    ];
    for (file, body, needle) in cases {
        let path = tmp.path().join(file);
        fs::write(&path, body).unwrap();
        let out = bin().arg("validate").arg(&path).output().unwrap();
        assert_eq!(out.status.code(), Some(2), "{file}");
        let err = String::from_utf8(out.stderr).unwrap();
        assert!(err.contains(needle), "{file}: {err}");
    }
}

#[test]
fn cfl_violation_is_reported_in_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("cfl.json");
    fs::write(
        &cfg,
        r#"{"name": "cfl",
            "coefficients": {"beta": [0, 1], "gamma0": 1, "b": {"kind": "constant", "value": 1},
                             "drift": {"kind": "constant", "value": 50}},
            "mesh": {"x_min": -8, "x_max": 8, "n_cells": 200},
            "solver": {"dt": 0.01, "t_final": 0.5}}"#,
    )
    .unwrap();
    let out_dir = tmp.path().join("out");
    let out = run(&cfg, &out_dir, 1);
    assert_eq!(out.status.code(), Some(2));
    let summary = fs::read_to_string(out_dir.join("summary.txt")).unwrap();
    assert!(summary.contains("CFL"), "{summary}");
}

#[test]
fn failed_tolerance_exits_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(scenario("heat-superposition.json"))
        .unwrap()
        .replace("\"tolerance\": 0.05", "\"tolerance\": 1e-6")
        .replace("\"n\": 10000", "\"n\": 500");
    let cfg = tmp.path().join("strict.json");
    fs::write(&cfg, text).unwrap();
    let out = run(&cfg, &tmp.path().join("out"), 1);
    assert_eq!(out.status.code(), Some(1));
    let summary = fs::read_to_string(tmp.path().join("out/summary.txt")).unwrap();
    assert!(summary.contains("[FAIL] superposition"), "{summary}");
}

#[test]
fn bundled_configs_round_trip() {
    for name in ["heat-superposition.json", "cubic-full.json"] {
        let cfg = load_config(&scenario(name)).unwrap();
        assert_eq!(parse_config(&cfg.to_json()).unwrap(), cfg, "{name}");
    }
}
