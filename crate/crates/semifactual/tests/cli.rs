use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use proptest::prelude::*;
use serde_json::Value;

use semifactual::{RunConfig, ThetaSetting};

fn wine() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/wine.csv")
}

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_semifactual")).args(args).output().expect("binary runs")
}

fn with_wine(args: &[&str]) -> Output {
    let path = wine();
    let mut all = args.to_vec();
    all.extend(["--dataset", path.to_str().unwrap()]);
    cli(&all)
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn accepted_input_exits_two() {
    let o = with_wine(&["explain", "--row", "0", "--theta", "0.0001"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("input not rejected; nothing to explain"));
}

#[test]
fn invalid_k_exits_one() {
    let o = with_wine(&["explain", "--row", "0", "--k", "0"]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
}

#[test]
fn missing_dataset_exits_one() {
    let o = cli(&["benchmark", "--dataset", "/nonexistent/data.csv"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("error:"));
}

#[test]
fn unknown_config_key_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "seed = 1\nbogus = 2\n").unwrap();
    let o = with_wine(&["inspect", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("bogus"), "{}", stderr(&o));
}

/// First rejected Wine row under GNB with theta = 1, with its explanation.
fn explained_row(k: &str) -> Value {
    for row in 0..60 {
        let o = with_wine(&["explain", "--model", "gnb", "--theta", "1.0", "--k", k, "--row", &row.to_string()]);
        match o.status.code() {
            Some(0) => return serde_json::from_slice(&o.stdout).unwrap(),
            Some(2) => continue,
            other => panic!("unexpected exit {other:?}: {}", stderr(&o)),
        }
    }
    panic!("no rejected row found");
}

#[test]
fn explanation_sets_do_not_share_features() {
    let v = explained_row("3");
    let sfs = v["semifactuals"].as_array().unwrap();
    assert!(!sfs.is_empty());
    assert_eq!(v["k"], 3);
    let mut seen = BTreeSet::new();
    for sf in sfs {
        for name in sf["changed_features"].as_array().unwrap() {
            assert!(seen.insert(name.as_str().unwrap().to_string()), "{name} changed twice");
        }
        assert_eq!(sf["delta"].as_array().unwrap().len(), 13);
    }
}

#[test]
fn explains_a_literal_vector() {
    let v = explained_row("1");
    let x: Vec<String> = v["x"].as_array().unwrap().iter().map(|c| c.as_f64().unwrap().to_string()).collect();
    let o = with_wine(&["explain", "--model", "gnb", "--theta", "1.0", "--k", "1", "--x", &x.join(",")]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let w: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(w["credibility"], v["credibility"]);
    assert!(w.get("row").is_none());
}

#[test]
fn wrong_vector_length_exits_one() {
    let o = with_wine(&["explain", "--x", "1,2,3"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn benchmark_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = with_wine(&["benchmark", "--model", "gnb", "--jobs", "2", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["report.json", "report.csv", "explanations.jsonl"] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    let csv = fs::read_to_string(out.join("report.csv")).unwrap();
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with("dataset,model,feasibility,sparsity,diversity,recall"));
    let row = lines.next().unwrap();
    assert!(row.starts_with("wine,gnb,"));
    assert_eq!(row.matches('±').count(), 4);
    let report: Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["folds"].as_array().unwrap().len(), 5);
    assert!(report["config"].get("jobs").is_none());
}

#[test]
fn inspect_prints_every_fold() {
    let o = with_wine(&["inspect", "--model", "gnb", "--theta", "1.0"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(text.matches("fold").count(), 5, "{text}");
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, format!("k = 0\ntheta = 0.0001\n\n[data]\npath = {:?}\n\n[model]\nkind = \"gnb\"\n", wine())).unwrap();
    let cfg = cfg.to_str().unwrap();
    let invalid = cli(&["explain", "--row", "0", "--config", cfg]);
    assert_eq!(invalid.status.code(), Some(1), "{}", stderr(&invalid));
    let fixed = cli(&["explain", "--row", "0", "--config", cfg, "--k", "2"]);
    assert_eq!(fixed.status.code(), Some(2), "{}", stderr(&fixed));
    let parsed = RunConfig::from_file(Path::new(cfg)).unwrap();
    assert_eq!(parsed.theta, ThetaSetting::Fixed(0.0001));
}

proptest! {
    #[test]
    fn theta_setting_round_trips(t in 1e-6f64..=1.0) {
        let s = ThetaSetting::Fixed(t);
        prop_assert_eq!(s.to_string().parse::<ThetaSetting>().unwrap(), s);
        let cfg = RunConfig::from_toml(&format!("theta = {t:?}")).unwrap();
        prop_assert_eq!(cfg.theta, s);
    }
}
