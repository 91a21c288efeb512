use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use proactive_core::corpus::Corpus;

const BIN: &str = env!("CARGO_BIN_EXE_proactive");

fn proactive(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = proactive(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// A small synthetic corpus ingested into `<tmp>/ix`.
fn ingested(tmp: &Path) -> PathBuf {
    let file = tmp.join("c.jsonl");
    let ix = tmp.join("ix");
    ok(&["synth", "--out", s(&file), "--topics", "3", "--docs-per-topic", "10", "--vocab-size", "120", "--length", "40", "--seed", "5"]);
    ok(&["ingest", "--input", s(&file), "--vocab-size", "200", "--out", s(&ix)]);
    ix
}

#[test]
fn ingest_writes_every_artifact() {
    let tmp = tempfile::tempdir().unwrap();
    let ix = ingested(tmp.path());
    for f in ["docs.jsonl", "vocab.txt", "stats.txt", "index.json"] {
        assert!(ix.join(f).is_file(), "{f}");
    }
    let vocab = fs::read_to_string(ix.join("vocab.txt")).unwrap();
    assert!(vocab.starts_with("proactive-vocab\tv1\t"));
    let stats = fs::read_to_string(ix.join("stats.txt")).unwrap();
    assert!(stats.starts_with("proactive-stats\tv1"));
    assert_eq!(
        Corpus::load_jsonl(&ix.join("docs.jsonl")).unwrap().docs(),
        Corpus::load_jsonl(&tmp.path().join("c.jsonl")).unwrap().docs()
    );
}

#[test]
fn query_prints_ranked_tsv() {
    let tmp = tempfile::tempdir().unwrap();
    let ix = ingested(tmp.path());
    let docs = Corpus::load_jsonl(&ix.join("docs.jsonl")).unwrap();
    let text = docs.docs()[7].text.clone();
    let out = ok(&["query", "--index", s(&ix), "--text", &text, "--top-k", "4"]);
    let lines: Vec<Vec<&str>> = out.lines().map(|l| l.split('\t').collect()).collect();
    assert_eq!(lines.len(), 4);
    assert_eq!(lines[0][0], "1");
    assert_eq!(lines[0][1], docs.docs()[7].id);
    assert!((lines[0][2].parse::<f64>().unwrap() - 1.0).abs() < 1e-6);
    let scores: Vec<f64> = lines.iter().map(|l| l[2].parse().unwrap()).collect();
    assert!(scores.windows(2).all(|w| w[0] >= w[1]));
}

#[test]
fn ngram_training_then_expansion() {
    let tmp = tempfile::tempdir().unwrap();
    let ix = ingested(tmp.path());
    let model = tmp.path().join("ng.json");
    ok(&["train-lm", "--model", "ngram", "--corpus", s(&ix), "--order", "3", "--out", s(&model)]);
    let log = fs::read_to_string(tmp.path().join("ng.perplexity.csv")).unwrap();
    assert!(log.starts_with("epoch,perplexity\n1,"));

    let docs = Corpus::load_jsonl(&ix.join("docs.jsonl")).unwrap();
    let context: Vec<String> = docs.docs()[0].tokens().into_iter().take(4).collect();
    let out = ok(&["expand", "--model", s(&model), "--stats", s(&ix), "--text", &context.join(" "), "--n-exp", "5"]);
    let rows: Vec<Vec<&str>> = out.lines().map(|l| l.split('\t').collect()).collect();
    assert!(!rows.is_empty() && rows.len() <= 5);
    for r in &rows {
        assert_eq!(r.len(), 6);
        let (p, idf, score): (f64, f64, f64) = (r[1].parse().unwrap(), r[3].parse().unwrap(), r[4].parse().unwrap());
        assert!((score - p * idf).abs() <= 1e-5 * score.max(1.0));
        assert!(!context.iter().any(|c| c == r[0]));
        assert!(r[5].split(' ').any(|w| w == r[0]));
    }
}

#[test]
fn lstm_training_logs_one_perplexity_per_epoch() {
    let tmp = tempfile::tempdir().unwrap();
    let ix = ingested(tmp.path());
    let model = tmp.path().join("lstm.json");
    let log = tmp.path().join("ppl.csv");
    ok(&[
        "train-lm", "--model", "lstm", "--corpus", s(&ix), "--hidden", "6", "--layers", "1", "--unroll", "8",
        "--epochs", "3", "--lr", "0.3", "--seed", "1", "--out", s(&model), "--log", s(&log),
    ]);
    let lines: Vec<String> = fs::read_to_string(&log).unwrap().lines().map(str::to_owned).collect();
    assert_eq!(lines.len(), 4);
    assert!(model.is_file());
}

#[test]
fn intent_expand_records_its_sample() {
    let tmp = tempfile::tempdir().unwrap();
    let ix = ingested(tmp.path());
    let manifest = tmp.path().join("m.json");
    let docs = Corpus::load_jsonl(&ix.join("docs.jsonl")).unwrap();
    let window: Vec<String> = docs.docs()[3].tokens().into_iter().take(3).collect();
    let args = [
        "intent-expand", "--index", s(&ix), "--sample", "12", "--seed", "3", "--text", &window.join(" "), "--n-exp", "4",
        "--manifest", s(&manifest),
    ];
    let out = ok(&args);
    let rows: Vec<Vec<f64>> = out
        .lines()
        .map(|l| l.split('\t').skip(1).map(|x| x.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 4);
    for r in &rows {
        assert!((r[0] + r[1] - r[2]).abs() < 1e-5);
    }
    assert!(rows.windows(2).all(|w| w[0][2] >= w[1][2]));
    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(&manifest).unwrap()).unwrap();
    assert_eq!(m["doc_ids"].as_array().unwrap().len(), 12);
    assert_eq!(ok(&args), out);
}

#[test]
fn simulate_is_byte_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let ix = ingested(tmp.path());
    let run = |out: &str| {
        let dir = tmp.path().join(out);
        ok(&["simulate", "--corpus", s(&ix), "--n-grid", "3,10", "--trials", "6", "--seed", "9", "--out", s(&dir)]);
        dir
    };
    let (a, b) = (run("a"), run("b"));
    for f in ["report.csv", "windows.csv", "config.json", "curve_exploratory.png", "curve_known-item.png"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let report = fs::read_to_string(a.join("report.csv")).unwrap();
    assert_eq!(report.lines().next(), Some("task,method,n,trials,mean,stderr,skips"));
    assert_eq!(report.lines().count(), 1 + 2 * 3 * 2);
}

#[test]
fn bad_arguments_fail_cleanly() {
    let tmp = tempfile::tempdir().unwrap();
    let ix = ingested(tmp.path());
    let out = proactive(&["simulate", "--corpus", s(&ix), "--method", "oracle", "--out", s(&tmp.path().join("x"))]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("oracle"));
    let out = proactive(&["query", "--index", s(&tmp.path().join("missing")), "--text", "a"]);
    assert!(!out.status.success());
}
