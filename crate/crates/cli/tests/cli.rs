use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tablesim::synth::{synth_corpus, SynthConfig};
use tablesim::table::write_tables;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_tablesim"));
    c.env_remove("RUST_LOG");
    c
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn run(args: &[&str], dir: &Path) -> Output {
    bin().args(args).current_dir(dir).output().expect("binary runs")
}

fn ok(args: &[&str], dir: &Path) -> Value {
    let out = run(args, dir);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).expect("one JSON line");
    assert_eq!(v["status"], "ok");
    v
}

fn write_pairs(path: &Path, pairs: &[(&str, &str)]) {
    let lines: String = pairs.iter().map(|(a, b)| format!("{{\"anchor_id\":\"{a}\",\"target_id\":\"{b}\"}}\n")).collect();
    fs::write(path, lines).unwrap();
}

fn small_corpus(dir: &Path, n: usize) -> PathBuf {
    let tables = synth_corpus(&SynthConfig { n_tables: n, n_families: 4, seed: 5, ..Default::default() });
    let path = dir.join("corpus.jsonl");
    write_tables(fs::File::create(&path).unwrap(), &tables).unwrap();
    path
}

#[test]
fn eval_matches_reference_report() {
    let dir = tempfile::tempdir().unwrap();
    let fx = fixture("golden_eval");
    let out = dir.path().to_str().unwrap();
    let v = ok(
        &["eval", "--corpus", "corpus.jsonl", "--pairs", "pairs.jsonl", "--dimension", "64", "--hash-seed", "3", "--k", "1", "--k", "3", "--out", out],
        &fx,
    );
    assert_eq!(v["n_queries"], 9);
    for name in ["report.json", "report.csv"] {
        let got = fs::read_to_string(dir.path().join(name)).unwrap();
        let want = fs::read_to_string(fx.join(format!("expected_{name}"))).unwrap();
        assert_eq!(got, want, "{name}");
    }
}

#[test]
fn audit_counts_chain_leak() {
    let dir = tempfile::tempdir().unwrap();
    write_pairs(&dir.path().join("train.jsonl"), &[("A", "B"), ("B", "C")]);
    write_pairs(&dir.path().join("test.jsonl"), &[("A", "C")]);
    let v = ok(&["audit", "--train", "train.jsonl", "--test", "test.jsonl", "--out", "."], dir.path());
    assert_eq!(v["n_leaked"], 1);
    assert_eq!(v["fraction"], 1.0);
    let report: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("leakage_report.json")).unwrap()).unwrap();
    assert_eq!(report["fraction"], 1.0);
    assert_eq!(report["witnesses"][0], serde_json::json!(["A", "B", "C"]));
}

#[test]
fn audit_repair_removes_leaks() {
    let dir = tempfile::tempdir().unwrap();
    let pairs: Vec<(String, String)> = (0..40).map(|i| (format!("a{}", i / 3), format!("t{i}"))).collect();
    let refs: Vec<(&str, &str)> = pairs.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
    write_pairs(&dir.path().join("pairs.jsonl"), &refs);
    let v = ok(&["audit", "--pairs", "pairs.jsonl", "--repair", "--train-fraction", "0.7", "--out", "."], dir.path());
    assert_eq!(v["n_leaked"], 0);
    let count = |f: &str| fs::read_to_string(dir.path().join(f)).unwrap().lines().count();
    assert_eq!(count("repaired_train.jsonl") + count("repaired_test.jsonl"), 40);
    assert!(count("repaired_test.jsonl") > 0);
    let again = ok(&["audit", "--train", "repaired_train.jsonl", "--test", "repaired_test.jsonl", "--out", "."], dir.path());
    assert_eq!(again["n_leaked"], 0);
}

#[test]
fn generate_two_targets_per_anchor_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    small_corpus(dir.path(), 40);
    let a = ok(&["generate", "--corpus", "corpus.jsonl", "--out", "a", "--seed", "3", "--workers", "1"], dir.path());
    ok(&["generate", "--corpus", "corpus.jsonl", "--out", "b", "--seed", "3", "--workers", "4"], dir.path());
    let lines = |p: &str| fs::read_to_string(dir.path().join(p)).unwrap();
    assert_eq!(a["n_anchors"], 40);
    assert_eq!(a["n_pairs"].as_u64().unwrap() + a["n_rejected"].as_u64().unwrap(), 80);
    assert_eq!(lines("a/pairs.jsonl").lines().count(), 80);
    assert_eq!(lines("a/generation_log.jsonl").lines().count(), 80);
    for f in ["pairs.jsonl", "generated.jsonl", "generation_log.jsonl"] {
        assert_eq!(lines(&format!("a/{f}")), lines(&format!("b/{f}")), "{f}");
    }
}

#[test]
fn describe_resume_is_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    small_corpus(dir.path(), 70);
    let full = ok(&["describe", "--corpus", "corpus.jsonl", "--out", "full"], dir.path());
    assert_eq!(full["complete"], true);
    let expected = fs::read_to_string(dir.path().join("full/described.jsonl")).unwrap();

    // an interrupted run: some records, then a torn line
    fs::create_dir(dir.path().join("part")).unwrap();
    let head: Vec<&str> = expected.lines().skip(10).take(25).collect();
    let torn = format!("{}\n{}", head.join("\n"), &expected.lines().next().unwrap()[..20]);
    fs::write(dir.path().join("part/described.jsonl"), torn).unwrap();
    let resumed = ok(&["describe", "--corpus", "corpus.jsonl", "--out", "part", "--workers", "3"], dir.path());
    assert_eq!(resumed["n_new"], 45);
    assert_eq!(fs::read_to_string(dir.path().join("part/described.jsonl")).unwrap(), expected);

    let noop = ok(&["describe", "--corpus", "corpus.jsonl", "--out", "part"], dir.path());
    assert_eq!(noop["n_new"], 0);
    assert_eq!(fs::read_to_string(dir.path().join("part/described.jsonl")).unwrap(), expected);
}

#[test]
fn training_improves_retrieval() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let tables = synth_corpus(&SynthConfig { n_tables: 1600, seed: 8, ..Default::default() });
    let (background, anchors) = tables.split_at(1200);
    write_tables(fs::File::create(p.join("background.jsonl")).unwrap(), background).unwrap();
    write_tables(fs::File::create(p.join("anchors.jsonl")).unwrap(), anchors).unwrap();
    ok(&["generate", "--corpus", "anchors.jsonl", "--out", "o", "--seed", "1"], p);
    ok(&["split", "--out", "o", "--ratios", "8:0:2"], p);
    let pool = ["--corpus", "background.jsonl", "--corpus", "anchors.jsonl", "--corpus", "o/generated.jsonl", "--out", "o", "--hash-seed", "17", "--seed", "6"];
    let with = |args: &[&'static str]| [&pool[..], args].concat();
    ok(&with(&["mine", "--pairs", "o/pairs_train.jsonl"]), p);
    ok(&with(&["train", "--epochs", "0", "--checkpoint", "o/init.ckpt"]), p);
    let trained = ok(&with(&["train", "--epochs", "3", "--checkpoint", "o/trained.ckpt"]), p);
    let losses = trained["epoch_losses"].as_array().unwrap();
    assert!(losses.last().unwrap().as_f64() < losses[0].as_f64());
    let recall = |ckpt: &'static str| {
        let v = ok(&with(&["eval", "--pairs", "o/pairs_test.jsonl", "--k", "2", "--checkpoint", ckpt]), p);
        v["aggregates"]["recall@2"].as_f64().unwrap()
    };
    let (before, after) = (recall("o/init.ckpt"), recall("o/trained.ckpt"));
    assert!(after > before + 0.05, "recall@2 {before} -> {after}");
}

#[test]
fn missing_inputs_give_error_record() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["generate", "--corpus", "nope.jsonl"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let e: Value = serde_json::from_slice(&out.stderr).expect("JSON error record");
    assert_eq!((e["status"].as_str(), e["command"].as_str(), e["kind"].as_str()), (Some("error"), Some("generate"), Some("input")));
    assert!(e["message"].as_str().unwrap().contains("nope.jsonl"));
    assert!(out.stdout.is_empty());

    let out = run(&["mine"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let e: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(e["kind"], "usage");

    let out = run(&["eval", "--fusion-weight", "2"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["frobnicate"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn config_file_supplies_flags() {
    let dir = tempfile::tempdir().unwrap();
    small_corpus(dir.path(), 12);
    fs::write(dir.path().join("run.toml"), "corpus = [\"corpus.jsonl\"]\nout = \"from_config\"\nn-targets = 1\nseed = 4\n").unwrap();
    let v = ok(&["generate", "--config", "run.toml"], dir.path());
    assert_eq!(v["n_pairs"].as_u64().unwrap() + v["n_rejected"].as_u64().unwrap(), 12);
    assert!(dir.path().join("from_config/pairs.jsonl").exists());
    let v = ok(&["generate", "--config", "run.toml", "--n-targets", "2", "--out", "flag"], dir.path());
    assert_eq!(v["n_pairs"].as_u64().unwrap() + v["n_rejected"].as_u64().unwrap(), 24);
}
