use std::path::Path;
use std::process::Command;

use rfl_lab::cli::run::{CONFIG_FILE, MANIFEST_FILE, PLOT_FILE, REPORT_FILE, TABLE_FILE};
use rfl_lab::cli::load_config;

const SMALL: &str = r#"{
  "grid": {"dim": 1, "extent": 8.0, "points": 96},
  "sweep": {"eps": [0.5, 0.25], "sobolev_iters": 20},
  "sobolev": {"theta": 1.0, "iters": 20},
  "lambdas": [1.0, 5.0, 10.0],
  "seed": 7
}"#;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rfl-lab"))
}

fn run(dir: &Path, sub: &str, config: &str, threads: usize) -> std::process::Output {
    let cfg = dir.join("input.json");
    std::fs::write(&cfg, config).unwrap();
    bin()
        .arg(sub)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .arg("--threads")
        .arg(threads.to_string())
        .env_remove("RFL_LAB_OUT")
        .output()
        .unwrap()
}

fn read(dir: &Path, file: &str) -> String {
    std::fs::read_to_string(dir.join("out").join(file)).unwrap()
}

#[test]
fn artifacts_do_not_depend_on_thread_count() {
    for sub in ["solve", "sweep"] {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        assert!(run(a.path(), sub, SMALL, 1).status.success());
        assert!(run(b.path(), sub, SMALL, 4).status.success());
        for file in [TABLE_FILE, PLOT_FILE, REPORT_FILE] {
            assert_eq!(read(a.path(), file), read(b.path(), file), "{sub}/{file}");
        }
    }
}

#[test]
fn tables_carry_hash_schema_and_columns() {
    let cases = [
        ("sweep", "eps,c_value,y_eps,eps_y_eps,mass,ratio,prediction"),
        ("concentration", "x,H"),
        ("lambda-scan", "lambda,c_value,bound,satisfied"),
        ("limit", "x,u"),
        ("sobolev", "x,u"),
    ];
    for (sub, header) in cases {
        let d = tempfile::tempdir().unwrap();
        let out = run(d.path(), sub, SMALL, 2);
        assert!(out.status.success(), "{sub}: {}", String::from_utf8_lossy(&out.stderr));
        let table = read(d.path(), TABLE_FILE);
        let mut lines = table.lines();
        assert!(lines.next().unwrap().starts_with("# config_hash: "));
        assert_eq!(lines.next().unwrap(), "# schema_version: 1");
        assert_eq!(lines.next().unwrap(), header, "{sub}");
        assert!(lines.next().is_some());
        let manifest: serde_json::Value = serde_json::from_str(&read(d.path(), MANIFEST_FILE)).unwrap();
        assert_eq!(manifest["status"], "ok");
    }
}

#[test]
fn echoed_config_reproduces_the_hash() {
    let d = tempfile::tempdir().unwrap();
    assert!(run(d.path(), "solve", SMALL, 1).status.success());
    let echoed = load_config(&d.path().join("out").join(CONFIG_FILE)).unwrap();
    let report: serde_json::Value = serde_json::from_str(&read(d.path(), REPORT_FILE)).unwrap();
    assert_eq!(report["config_hash"], echoed.hash());
    let table = read(d.path(), TABLE_FILE);
    assert!(table.starts_with(&format!("# config_hash: {}", echoed.hash())));
}

#[test]
fn invalid_config_reports_json_and_fails() {
    let d = tempfile::tempdir().unwrap();
    let out = run(d.path(), "solve", r#"{"params": {"q": 0.5}}"#, 1);
    assert_eq!(out.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert!(err["error"]["message"].as_str().unwrap().contains("params.q"), "{err}");

    let out = run(d.path(), "solve", "{\n  \"grid\": [1,\n", 1);
    assert_eq!(out.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert!(err["error"]["message"].as_str().unwrap().contains("line"), "{err}");
}

#[test]
fn concentration_without_negative_h_fails_with_a_manifest() {
    let d = tempfile::tempdir().unwrap();
    let config = r#"{"scope": {"kind": "constant", "value": 2.0, "rho0": 2.0, "rho_inf": 2.0}}"#;
    let out = run(d.path(), "concentration", config, 1);
    assert_eq!(out.status.code(), Some(1));
    let manifest: serde_json::Value = serde_json::from_str(&read(d.path(), MANIFEST_FILE)).unwrap();
    assert_eq!(manifest["status"], "failed");
}
