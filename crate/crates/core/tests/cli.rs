use std::path::Path;
use std::process::{Command, Output};

use recourse_core::cli::{sha256_file, CandidateSet, Manifest, RunConfig};
use recourse_core::evalkit::{score, MetricsReport};
use serde_json::{json, Value};

const BIN: &str = env!("CARGO_BIN_EXE_recourse");

fn small_config(out: &Path, seed: u64) -> Value {
    json!({
        "seed": seed,
        "out": out,
        "dataset": {"source": "toy", "name": "moons", "n": 400},
        "classifier": {"lr": 0.001, "epochs": 100, "batch": 64, "seed": 0, "restarts": 1},
        "train": {"lambda": 5.0, "gamma": 0.7, "top_k": 100, "lr": 0.001, "batch": 64, "epochs": 2, "seed": 0,
                  "n_bins": 20, "net": {"embed": 8, "heads": 2, "ffn": 8, "enc_layers": 1, "dec_layers": 1}},
        "eval": {"size": 30},
        "sweep": {"lambdas": [1.0, 10.0]},
        "contours": {"resolution": 9}
    })
}

fn run(config: &Path, args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env("RECOURSE_CONFIG", config)
        .env_remove("RECOURSE_SEED")
        .env_remove("RECOURSE_OUT")
        .env_remove("RECOURSE_DATASET")
        .output()
        .unwrap()
}

fn ok(config: &Path, args: &[&str]) -> String {
    let o = run(config, args);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout).unwrap()
}

const PIPELINE: [&[&str]; 7] = [
    &["data", "gen"],
    &["gold", "train"],
    &["gold", "label"],
    &["clf", "train"],
    &["train"],
    &["sample"],
    &["eval"],
];

fn pipeline(root: &Path, name: &str) -> (std::path::PathBuf, String) {
    let out = root.join(name);
    let cfg = root.join(format!("{name}.json"));
    std::fs::write(&cfg, small_config(&out, 9).to_string()).unwrap();
    let mut table = String::new();
    for args in PIPELINE {
        table = ok(&cfg, args);
    }
    (out, table)
}

#[test]
fn pipeline_is_deterministic_and_consistent() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, table) = pipeline(tmp.path(), "a");
    let (b, _) = pipeline(tmp.path(), "b");
    for f in [
        "data.json",
        "gold.json",
        "labeled.json",
        "classifier.json",
        "model.json",
        "candidates.json",
        "report.json",
        "report.txt",
    ] {
        assert_eq!(
            std::fs::read(a.join(f)).unwrap(),
            std::fs::read(b.join(f)).unwrap(),
            "{f} differs"
        );
    }

    let report: MetricsReport = serde_json::from_slice(&std::fs::read(a.join("report.json")).unwrap()).unwrap();
    assert_eq!(report.methods[0].method, "GenRe");
    assert_eq!(report.methods.len(), 5);
    for m in &report.methods {
        assert!((m.score - score(m.validity, m.lof, m.cost_mean, report.d)).abs() < 1e-12);
    }
    // printed rows: Score column equals Val + LOF − Cost/d within print rounding
    for line in table.lines().skip(1) {
        let cols: Vec<&str> = line.split_whitespace().collect();
        let cost: f64 = cols[1].split('±').next().unwrap().parse().unwrap();
        let (val, lof, s): (f64, f64, f64) = (
            cols[2].parse().unwrap(),
            cols[3].parse().unwrap(),
            cols[4].parse().unwrap(),
        );
        assert!((s - (val + lof - cost / report.d as f64)).abs() < 0.01, "{line}");
    }

    let set: CandidateSet = serde_json::from_slice(&std::fs::read(a.join("candidates.json")).unwrap()).unwrap();
    assert_eq!(set.queries.len(), set.recourse.len());
    assert!(set.recourse.iter().all(|r| r.candidates.len() == 10));

    let manifest: Manifest = serde_json::from_slice(&std::fs::read(a.join("manifest-eval.json")).unwrap()).unwrap();
    assert_eq!(manifest.seed, 9);
    for r in manifest.inputs.iter().chain(&manifest.outputs) {
        assert_eq!(sha256_file(&a.join(&r.path)).unwrap(), r.sha256, "{}", r.path);
    }
    let train: Manifest = serde_json::from_slice(&std::fs::read(a.join("manifest-train.json")).unwrap()).unwrap();
    let ck = train.outputs.iter().find(|r| r.path == "model.json").unwrap();
    let other: Manifest = serde_json::from_slice(&std::fs::read(b.join("manifest-train.json")).unwrap()).unwrap();
    assert_eq!(
        ck.sha256,
        other.outputs.iter().find(|r| r.path == "model.json").unwrap().sha256
    );

    // the run directory can be served as-is
    let snap = recourse_core::service::Snapshot::load_dir(&a).unwrap();
    assert_eq!(snap.checkpoint_sha256, ck.sha256);
    assert!(snap.lof.is_some());
}

#[test]
fn remaining_subcommands_write_their_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let (out, _) = pipeline(tmp.path(), "run");
    let cfg = tmp.path().join("run.json");
    let audit: Value = serde_json::from_str(&ok(&cfg, &["pairs", "audit"])).unwrap();
    assert!(audit["negatives"].as_u64().unwrap() > 0);
    assert!(ok(&cfg, &["data", "inspect"]).contains("\"encoded_dim\": 2"));
    ok(&cfg, &["sweep"]);
    ok(&cfg, &["ablation", "contours"]);
    ok(&cfg, &["plot"]);
    for f in [
        "pairs.jsonl",
        "pairs_audit.json",
        "sweep.json",
        "contours.json",
        "contours_conditional.svg",
        "contours_unconditional.svg",
        "model_unconditional.json",
        "plot.svg",
    ] {
        assert!(out.join(f).is_file(), "{f}");
    }
    let sweep: Value = serde_json::from_slice(&std::fs::read(out.join("sweep.json")).unwrap()).unwrap();
    assert_eq!(sweep["points"].as_array().unwrap().len(), 2);
    let svg = std::fs::read_to_string(out.join("plot.svg")).unwrap();
    assert_eq!(svg.matches("<circle").count(), 300 + 30);
}

#[test]
fn theory_prints_slope_in_range() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("c.json");
    std::fs::write(&cfg, json!({"out": tmp.path().join("t")}).to_string()).unwrap();
    let stdout = ok(&cfg, &["theory"]);
    let slope: f64 = stdout
        .lines()
        .find_map(|l| l.strip_prefix("slope = "))
        .unwrap()
        .parse()
        .unwrap();
    assert!((-1.3..=-0.7).contains(&slope), "{slope}");
}

#[test]
fn flags_override_config_and_env() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("c.json");
    std::fs::write(&cfg, json!({"seed": 1, "out": tmp.path().join("x")}).to_string()).unwrap();
    let out = tmp.path().join("y");
    let o = Command::new(BIN)
        .args(["--seed", "42", "--dataset", "circles", "data", "gen"])
        .env("RECOURSE_CONFIG", &cfg)
        .env("RECOURSE_OUT", &out)
        .env_remove("RECOURSE_SEED")
        .env_remove("RECOURSE_DATASET")
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m: Manifest = serde_json::from_slice(&std::fs::read(out.join("manifest-data-gen.json")).unwrap()).unwrap();
    assert_eq!(m.seed, 42);
    assert_eq!(m.config.dataset, recourse_core::cli::DatasetSpec::from_flag("circles"));
    let back: RunConfig = m.config.clone();
    assert_eq!(back.out, out);
    assert!(!tmp.path().join("x").exists());
}

#[test]
fn errors_are_single_json_lines() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("c.json");
    std::fs::write(&cfg, json!({"out": tmp.path().join("empty")}).to_string()).unwrap();
    for args in [&["train"][..], &["eval"], &["--dataset", "nope.csv", "data", "gen"]] {
        let o = run(&cfg, args);
        assert!(!o.status.success());
        let err = String::from_utf8(o.stderr).unwrap();
        assert_eq!(err.trim_end().lines().count(), 1, "{err}");
        let v: Value = serde_json::from_str(err.trim_end()).unwrap();
        assert!(v["error"].is_string() && v["message"].is_string());
    }
    std::fs::write(&cfg, "{ not json").unwrap();
    let o = run(&cfg, &["theory"]);
    assert_eq!(o.status.code(), Some(1));
}
