use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn fedcal(dir: &Path, args: &[&str]) -> Output {
    let out = Command::new(env!("CARGO_BIN_EXE_fedcal"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spawn fedcal");
    assert!(
        out.status.success(),
        "fedcal {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

const CONFIG: &str = r#"
seed = 2
repeats = 1

[data]
source = "file"
path = "part.csv"

[partition]
beta = 0.5
clients = 8

[rounds]
rounds = 2
participation = 0.5

[[methods]]
kind = "fed_temp"

[[methods]]
kind = "fed_bbq"
weighting = "all_weight"
"#;

#[test]
fn generate_partition_calibrate_eval() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    fedcal(dir, &["generate", "--classes", "3", "--samples", "600", "--seed", "4", "--out", "raw.csv"]);
    let raw = fs::read_to_string(dir.join("raw.csv")).unwrap();
    assert!(raw.starts_with("label,logit_0,logit_1,logit_2\n"));
    assert_eq!(raw.lines().count(), 601);

    fedcal(
        dir,
        &["partition", "--input", "raw.csv", "--beta", "0.5", "--clients", "8", "--out", "part.csv"],
    );
    let part = fs::read_to_string(dir.join("part.csv")).unwrap();
    assert!(part.starts_with("client_id,split,label,"));
    assert_eq!(part.lines().count(), 601);

    fs::write(dir.join("cfg.toml"), CONFIG).unwrap();
    let out = fedcal(dir, &["calibrate", "--config", "cfg.toml", "--out", "run"]);
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("fed_temp,") && stdout.contains("fed_bbq_all_weight,"), "{stdout}");
    for f in ["report.json", "rounds.jsonl", "summary.csv", "run_meta.json", "calibrator-fed_temp.json"] {
        assert!(dir.join("run").join(f).is_file(), "missing {f}");
    }
    assert_eq!(fs::read_to_string(dir.join("run/rounds.jsonl")).unwrap().lines().count(), 4);

    let out = fedcal(
        dir,
        &[
            "eval",
            "--input",
            "part.csv",
            "--split",
            "test",
            "--calibrator",
            "run/calibrator-fed_temp.json",
            "--reliability",
            "rel.csv",
        ],
    );
    let summary: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let cwece = summary["cwece"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&cwece));
    // header plus 3 classes x 15 bins
    assert_eq!(fs::read_to_string(dir.join("rel.csv")).unwrap().lines().count(), 46);
}

#[test]
fn sweep_writes_one_row_per_point_and_method() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    fedcal(dir, &["generate", "--classes", "3", "--samples", "400", "--out", "raw.csv"]);
    fedcal(
        dir,
        &["partition", "--input", "raw.csv", "--beta", "1", "--clients", "8", "--out", "part.csv"],
    );
    fs::write(dir.join("cfg.toml"), CONFIG).unwrap();
    fedcal(
        dir,
        &["sweep", "--config", "cfg.toml", "--axis", "T", "--values", "1,3", "--out", "sw"],
    );
    let csv = fs::read_to_string(dir.join("sw/sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2 * 2);
    assert!(dir.join("sw/rounds=3/report.json").is_file());
}

#[test]
fn dp_plan_reports_noise() {
    let tmp = tempfile::tempdir().unwrap();
    let out = fedcal(
        tmp.path(),
        &["dp-plan", "--epsilon", "1", "--rounds", "12", "--classes", "10", "--mode", "binning"],
    );
    let plan: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(plan["mechanism_count"].as_u64(), Some(240));
    let z = plan["noise_multiplier"].as_f64().unwrap();
    let sigma = plan["sigma"].as_f64().unwrap();
    assert!((sigma - 50.0 * z).abs() < 1e-9 * sigma);
}

#[test]
fn bad_config_names_the_field() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("cfg.toml"), CONFIG.replace("participation = 0.5", "participation = 2")).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_fedcal"))
        .current_dir(tmp.path())
        .args(["calibrate", "--config", "cfg.toml", "--out", "run"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("rounds.participation"), "{err}");
}
