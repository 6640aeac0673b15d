use std::path::Path;
use std::process::{Command, Output};

fn ventbench(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ventbench"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(args: &[&str]) -> i32 {
    ventbench(args).status.code().expect("exited normally")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn help_and_version_succeed() {
    assert_eq!(code(&["--help"]), 0);
    assert_eq!(code(&["run", "--help"]), 0);
    assert_eq!(code(&["--version"]), 0);
}

#[test]
fn usage_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    assert_eq!(code(&[]), 1);
    assert_eq!(code(&["frobnicate"]), 1);
    assert_eq!(code(&["run"]), 1, "missing --out");
    assert_eq!(code(&["run", "--patients", "ten", "--out", p(&out)]), 1);
    assert_eq!(code(&["run", "--policies", "bogus", "--out", p(&out)]), 1);
    assert_eq!(code(&["run", "--patients", "3", "--out", p(&out)]), 1, "odd cohort");
    assert_eq!(code(&["run", "--K", "0", "--patients", "2", "--out", p(&out)]), 1);
    assert_eq!(code(&["run", "--policies", "e2c_smpc", "--patients", "2", "--out", p(&out)]), 1);
    let missing = dir.path().join("no-model");
    let o = ventbench(&[
        "run", "--policies", "e2c_mppi", "--patients", "2", "--model-path", p(&missing), "--out", p(&out),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("no-model"));

    let bad_cfg = dir.path().join("bad.toml");
    std::fs::write(&bad_cfg, "[sim]\nno_such_key = 1\n").unwrap();
    assert_eq!(code(&["cohort", "--config", p(&bad_cfg)]), 1);
    assert_eq!(code(&["cohort", "--config", p(&dir.path().join("absent.toml"))]), 1);
}

#[test]
fn runtime_failures_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&["report", "--input", p(&dir.path().join("absent.json"))]), 2);
    let garbage = dir.path().join("garbage.json");
    std::fs::write(&garbage, "{ not json").unwrap();
    assert_eq!(code(&["report", "--input", p(&garbage)]), 2);
    let wrong = dir.path().join("wrong.json");
    std::fs::write(&wrong, r#"{"schema_version": 999}"#).unwrap();
    let o = ventbench(&["report", "--input", p(&wrong)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("schema version"));
}

#[test]
fn cohort_prints_json() {
    let o = ventbench(&["cohort", "--patients", "6", "--seed", "3"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["patients"].as_array().unwrap().len(), 6);
    assert_eq!(v["seed"], 3);
}

#[test]
fn run_then_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = ventbench(&[
        "run", "--policies", "random,ardsnet,smpc", "--patients", "2", "--steps", "3", "--K", "4", "--H", "2",
        "--seed", "9", "--out", p(&out),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["report.json", "summary.csv", "per_patient.csv", "curves.csv", "table.txt", "timings.json"] {
        assert!(out.join(f).exists(), "{f} missing");
    }
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["seed"], 9);
    assert_eq!(report["steps"], 3);
    assert_eq!(report["config"]["control"]["k_exact"], 4);
    assert_eq!(report["config"]["control"]["horizon"], 2);

    let text = ventbench(&["report", "--input", p(&out.join("report.json"))]);
    assert_eq!(text.status.code(), Some(0));
    let text = String::from_utf8(text.stdout).unwrap();
    assert!(text.contains("ardsnet") && text.contains("Pplat"));
    let csv = ventbench(&["report", "--input", p(&out.join("report.json")), "--format", "csv"]);
    assert_eq!(csv.status.code(), Some(0));
    assert_eq!(String::from_utf8(csv.stdout).unwrap().lines().count(), 4);
}

#[test]
fn generate_train_and_run_learned_policies() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.csv");
    let model = dir.path().join("model");
    let o = ventbench(&["generate-data", "--patients", "2", "--runs", "1", "--steps", "6", "--out", p(&data)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = std::fs::read_to_string(&data).unwrap().lines().count();
    assert_eq!(rows, 1 + 2 * 5);

    let o = ventbench(&["train", "--data", p(&data), "--epochs", "2", "--out", p(&model)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["encoder.bin", "decoder.bin", "dynamics.bin", "normalization.json", "autoencoder_loss.csv", "training.json"] {
        assert!(model.join(f).exists(), "{f} missing");
    }

    let out = dir.path().join("run");
    let o = ventbench(&[
        "run", "--policies", "e2c_smpc,e2c_mppi", "--patients", "2", "--steps", "2", "--K", "8", "--lambda", "5",
        "--model-path", p(&model), "--out", p(&out),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
}
