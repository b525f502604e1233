use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bin(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fairclass")).args(args).current_dir(cwd).output().expect("spawn fairclass")
}

fn ok(args: &[&str], cwd: &Path) -> Output {
    let out = bin(args, cwd);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn json(path: impl AsRef<Path>) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn generate(dir: &Path, out: &str, extra: &[&str]) {
    let mut args = vec!["generate", "--n", "5000", "--seed", "7", "--out", out];
    args.extend_from_slice(extra);
    ok(&args, dir);
}

#[test]
fn generate_is_deterministic_and_splits_one_percent() {
    let dir = tempfile::tempdir().unwrap();
    generate(dir.path(), "a", &[]);
    generate(dir.path(), "b", &[]);
    for f in ["train.csv", "test.csv", "manifest.json"] {
        assert_eq!(fs::read(dir.path().join("a").join(f)).unwrap(), fs::read(dir.path().join("b").join(f)).unwrap());
    }
    let m = json(dir.path().join("a/manifest.json"));
    assert_eq!(m["n_train"], 50);
    assert_eq!(m["n_test"], 4950);
    assert_eq!(m["spec"]["seed"], 7);
}

#[test]
fn generate_mixed_writes_group_column() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["generate", "--family", "melr", "--n", "20000", "--out", "m"], dir.path());
    let head = fs::read_to_string(dir.path().join("m/train.csv")).unwrap();
    assert!(head.lines().next().unwrap().ends_with(",y,group"));
    assert_eq!(json(dir.path().join("m/manifest.json"))["spec"]["k"], 100);
}

#[test]
fn fit_predict_reports_appendix_fields() {
    let dir = tempfile::tempdir().unwrap();
    generate(dir.path(), "d", &[]);
    ok(&["fit-predict", "--train", "d/train.csv", "--test", "d/test.csv", "--out", "r"], dir.path());
    let r = json(dir.path().join("r/result.json"));
    assert_eq!(r["classifications"].as_array().unwrap().len(), 4950);
    assert_eq!(r["solver"]["status"], "optimal");
    for field in ["accuracy", "fpr", "fnr", "tpr", "tnr", "recall", "tp", "fp", "tn", "fn"] {
        assert!(r["metrics"]["test"].get(field).is_some(), "missing {field}");
        assert!(r["metrics"]["train"].get(field).is_some(), "missing {field}");
    }
    assert!(r["metrics"]["test"]["fairness"]["s"]["di"].is_number());
    let classified = fs::read_to_string(dir.path().join("r/classifications.csv")).unwrap();
    assert_eq!(classified.lines().count(), 4951);
}

#[test]
fn di_constraint_lowers_training_di() {
    let dir = tempfile::tempdir().unwrap();
    generate(dir.path(), "d", &[]);
    let base = ["fit-predict", "--train", "d/train.csv", "--test", "d/test.csv"];
    ok(&[&base[..], &["--out", "free"]].concat(), dir.path());
    ok(&[&base[..], &["--constraint", "di", "--c", "0.1", "--out", "fair"]].concat(), dir.path());
    let di = |d: &str| {
        json(dir.path().join(d).join("result.json"))["metrics"]["train"]["fairness"]["s"]["di"].as_f64().unwrap()
    };
    assert!(di("fair") <= di("free"), "{} > {}", di("fair"), di("free"));
}

#[test]
fn post_processing_reports_cutoff_and_trace() {
    let dir = tempfile::tempdir().unwrap();
    generate(dir.path(), "d", &[]);
    ok(
        &[
            "fit-predict",
            "--train",
            "d/train.csv",
            "--test",
            "d/test.csv",
            "--post",
            "di",
            "--sfpost",
            "s",
            "--out",
            "r",
        ],
        dir.path(),
    );
    let r = json(dir.path().join("r/result.json"));
    let b = r["cutoff"].as_f64().unwrap();
    assert!((0.01..=0.99).contains(&b));
    assert_eq!(r["cutoff_trace"], "cutoff_trace.csv");
    let trace = fs::read_to_string(dir.path().join("r/cutoff_trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 100);
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    generate(dir.path(), "d", &[]);
    fs::write(dir.path().join("fit.toml"), "family = \"svm\"\nconstraint = \"dm\"\nc = 0.2\nR = 3\ntime-limit = 5.0\n")
        .unwrap();
    ok(
        &[
            "fit-predict",
            "--train",
            "d/train.csv",
            "--test",
            "d/test.csv",
            "--config",
            "fit.toml",
            "--c",
            "0.05",
            "--out",
            "r",
        ],
        dir.path(),
    );
    let cfg = &json(dir.path().join("r/result.json"))["config"];
    assert_eq!(cfg["family"], "svm");
    assert_eq!(cfg["constraint"], "dm");
    assert_eq!(cfg["c"], 0.05);
    assert_eq!(cfg["R"], 3);
    assert_eq!(cfg["time_limit"], 5.0);

    fs::write(dir.path().join("bad.toml"), "colour = \"red\"\n").unwrap();
    let out =
        bin(&["fit-predict", "--train", "d/train.csv", "--test", "d/test.csv", "--config", "bad.toml"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn evaluate_matches_fit_predict_metrics() {
    let dir = tempfile::tempdir().unwrap();
    generate(dir.path(), "d", &[]);
    ok(
        &["fit-predict", "--train", "d/train.csv", "--test", "d/test.csv", "--constraint", "dm", "--out", "r"],
        dir.path(),
    );
    let out = ok(&["evaluate", "--data", "d/test.csv", "--pred", "r/classifications.csv"], dir.path());
    let eval: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(eval, json(dir.path().join("r/result.json"))["metrics"]["test"]);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    generate(dir.path(), "d", &[]);
    assert_eq!(bin(&["frobnicate"], dir.path()).status.code(), Some(1));
    assert_eq!(bin(&["generate", "--split", "1.5"], dir.path()).status.code(), Some(1));
    assert_eq!(
        bin(&["fit-predict", "--train", "missing.csv", "--test", "d/test.csv"], dir.path()).status.code(),
        Some(2)
    );
    let mixed_pre =
        ["fit-predict", "--train", "d/train.csv", "--test", "d/test.csv", "--family", "melr", "--pre", "di"];
    assert_eq!(bin(&mixed_pre, dir.path()).status.code(), Some(1));
    assert_eq!(bin(&["--help"], dir.path()).status.code(), Some(0));
}

fn simulate(dir: &Path, out: &str, workers: &str, audit: Option<&str>) {
    let mut args = vec![
        "simulate",
        "--runs",
        "2",
        "--n",
        "3000",
        "--scenarios",
        "1,8,19,45,61",
        "--workers",
        workers,
        "--out",
        out,
    ];
    if let Some(a) = audit {
        args.extend(["--audit", a]);
    }
    ok(&args, dir);
}

#[test]
fn simulate_is_deterministic_across_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), "one.csv", "1", None);
    simulate(dir.path(), "four.csv", "4", None);
    let one = fs::read_to_string(dir.path().join("one.csv")).unwrap();
    assert_eq!(one, fs::read_to_string(dir.path().join("four.csv")).unwrap());
    assert!(one.starts_with("scenario_id,mixed,preprocess,inprocess,postprocess,run,seed,status,metric,value\n"));
    let mut rdr = csv::Reader::from_reader(one.as_bytes());
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    let groups: std::collections::BTreeSet<(String, String)> =
        rows.iter().map(|r| (r[0].to_string(), r[5].to_string())).collect();
    assert_eq!(groups.len(), 10);
    for r in rows.iter().filter(|r| &r[7] != "failed") {
        assert!(["accuracy", "di", "dm", "fpr_gap", "fnr_gap", "tpr_gap", "tnr_gap"].contains(&&r[8]));
    }
}

#[test]
fn simulate_replays_and_detects_tampering() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), "sim.csv", "0", Some("audit"));
    let out = ok(&["replay", "--results", "sim.csv", "--audit", "audit"], dir.path());
    assert!(String::from_utf8_lossy(&out.stdout).contains("0 mismatches"));

    let text = fs::read_to_string(dir.path().join("sim.csv")).unwrap();
    let tampered: String = text
        .lines()
        .map(|l| {
            if l.starts_with("1,") && l.contains(",accuracy,") {
                format!("{},0.123", &l[..l.rfind(',').unwrap()])
            } else {
                l.to_string()
            }
        })
        .collect::<Vec<_>>()
        .join("\n");
    fs::write(dir.path().join("bad.csv"), tampered + "\n").unwrap();
    assert_eq!(bin(&["replay", "--results", "bad.csv", "--audit", "audit"], dir.path()).status.code(), Some(3));
}

#[test]
fn mixed_grid_has_thirty_scenarios() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(bin(&["simulate", "--mixed", "--runs", "1", "--scenarios", "31"], dir.path()).status.code(), Some(1));
    ok(&["simulate", "--mixed", "--runs", "1", "--n", "20000", "--scenarios", "1,30", "--out", "m.csv"], dir.path());
    let text = fs::read_to_string(dir.path().join("m.csv")).unwrap();
    assert!(text.lines().skip(1).all(|l| l.split(',').nth(2) == Some("id")));
    assert!(text.contains(",mesvm_dm,dm,"));
}
