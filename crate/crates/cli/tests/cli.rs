use std::path::Path;
use std::process::{Command, Output};

fn sgap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sgap")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn synth(dir: &Path, extra: &[&str]) -> String {
    let d = dir.join("ds");
    let mut args = vec!["synth", "--out", d.to_str().unwrap(), "--n", "120", "--seed", "1"];
    args.extend_from_slice(extra);
    let o = sgap(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    d.to_str().unwrap().to_string()
}

#[test]
fn preset_prints_architecture_json() {
    let o = sgap(&["preset", "--name", "pasca-v3"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(
        stdout(&o).trim(),
        r#"{"k_pre":6,"ga_pre":"aug_na","ma":"adaptive","k_trans":3,"k_post":4,"ga_post":{"ppr":0.3}}"#
    );
    let o = sgap(&["preset", "--name", "nope"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("pasca-v2"));
}

#[test]
fn enumerate_lists_every_config() {
    assert_eq!(stdout(&sgap(&["enumerate", "--count-only"])).trim(), "156060");
    let o = sgap(&["enumerate"]);
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 156_060);
    assert_eq!(
        lines[0],
        r#"{"k_pre":0,"ga_pre":"unused","ma":"none","k_trans":1,"k_post":0,"ga_post":"unused"}"#
    );
}

#[test]
fn usage_errors_exit_one() {
    let o = sgap(&["run", "--bogus"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
    assert_eq!(sgap(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(sgap(&["--help"]).status.code(), Some(0));
}

#[test]
fn runtime_and_validation_errors() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("absent");
    let o = sgap(&["run", "--data", missing.to_str().unwrap(), "--preset", "sgc"]);
    assert_eq!(o.status.code(), Some(2));

    let data = synth(dir.path(), &[]);
    let arch = dir.path().join("arch.json");
    std::fs::write(&arch, r#"{"k_pre":12,"ga_pre":"aug_na","ma":"mean","k_trans":1,"k_post":0,"ga_post":"unused"}"#)
        .unwrap();
    let o = sgap(&["run", "--data", &data, "--arch", arch.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    std::fs::write(&arch, r#"{"k_pre":2,"ga_pre":"aug_na","ma":"mean","k_trans":1,"k_post":0,"extra":1}"#).unwrap();
    assert_eq!(sgap(&["run", "--data", &data, "--arch", arch.to_str().unwrap()]).status.code(), Some(1));
    let o = sgap(&["search", "--analytic", "--budget", "5", "--init", "10"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn run_writes_result_log_and_weights() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), &["--format", "bin"]);
    assert!(Path::new(&data).join("features.bin").exists());
    let arch = dir.path().join("arch.json");
    std::fs::write(&arch, stdout(&sgap(&["preset", "--name", "gbp"]))).unwrap();
    let train = dir.path().join("train.json");
    std::fs::write(&train, r#"{"max_epochs": 30, "hidden_dim": 16}"#).unwrap();
    let out = dir.path().join("r.json");
    let log = dir.path().join("log.csv");
    let w = dir.path().join("w.bin");
    let o = sgap(&[
        "run", "--data", &data, "--arch", arch.to_str().unwrap(), "--train", train.to_str().unwrap(),
        "--out", out.to_str().unwrap(), "--log", log.to_str().unwrap(), "--weights", w.to_str().unwrap(),
        "--timings",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(r["config"]["ma"], "weighted");
    assert!(r["wall_times"]["train"].as_f64().unwrap() >= 0.0);
    let acc = r["test_accuracy"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&acc));
    let csv = std::fs::read_to_string(&log).unwrap();
    assert!(csv.starts_with("epoch,train_loss,val_acc\n"));
    assert_eq!(csv.lines().count() - 1, r["epochs_run"].as_u64().unwrap() as usize);
    assert_eq!(&std::fs::read(&w).unwrap()[..6], b"SGAPW1");
}

#[test]
fn async_training_flag() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), &[]);
    let o = sgap(&["run", "--data", &data, "--preset", "sgc", "--train-workers", "3", "--train-batch", "16"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(r["test_accuracy"].as_f64().unwrap() > 0.5);
    assert_eq!(sgap(&["run", "--data", &data, "--preset", "sgc", "--train-workers", "0"]).status.code(), Some(1));
}

#[test]
fn search_outputs_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("pareto.json");
    let csv = dir.path().join("front.csv");
    let o = sgap(&[
        "search", "--analytic", "--budget", "20", "--init", "10", "--candidates", "50", "--seed", "3",
        "--out", out.to_str().unwrap(), "--front-csv", csv.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let front = doc["front"].as_array().unwrap();
    assert_eq!(doc["history"].as_array().unwrap().len(), 20);
    let rows = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(rows.lines().count(), front.len() + 1);
    for entry in front {
        let cfg: sgap_core::ArchitectureConfig = serde_json::from_value(entry["config"].clone()).unwrap();
        assert!(cfg.is_canonical());
    }
}

#[test]
fn search_cost_scope_changes_objectives() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), &[]);
    let run = |scope: &str| {
        let o = sgap(&[
            "search", "--data", &data, "--budget", "3", "--init", "3", "--seed", "0", "--cost-scope", scope,
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        serde_json::from_str::<serde_json::Value>(&stdout(&o)).unwrap()
    };
    let (full, online) = (run("full"), run("online"));
    assert_eq!(full["history"][0]["config"], online["history"][0]["config"]);
    assert_ne!(full["history"], online["history"]);
    assert_eq!(sgap(&["search", "--data", &data, "--cost-scope", "offline"]).status.code(), Some(1));
}

#[test]
fn bench_reports_identity() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), &[]);
    let o = sgap(&["bench", "--data", &data, "--workers", "1,2,4", "--repeats", "1"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let rows: Vec<Vec<&str>> = text.lines().skip(1).take(3).map(|l| l.split('\t').collect()).collect();
    assert_eq!(rows[0][0], "1");
    assert_eq!(rows[0][2], "1.000");
    for r in &rows {
        let s: f64 = r[2].parse().unwrap();
        assert!(s.is_finite() && s >= 0.0);
    }
    assert!(text.contains("bitwise_identical\ttrue"));
}
