mod common;

use std::collections::BTreeSet;
use std::fs;

use common::*;
use scidfm_core::model::{load_checkpoint, Params};

const GLYCINE: &str = "[START_MOL]C(C(=O)O)N[END_MOL]\n";

#[test]
fn usage_errors_exit_2_and_name_the_flag() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.txt");
    fs::write(&input, "hello").unwrap();

    let out = scidfm(["tokenizer", "encode", "--input", &s(&input), "--out", &s(&dir.path().join("a"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--vocab"));

    let missing = dir.path().join("nope.json");
    let out = scidfm([
        "tokenizer",
        "encode",
        "--vocab",
        &s(&missing),
        "--input",
        &s(&input),
        "--out",
        &s(&dir.path().join("b")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--vocab"));

    assert_eq!(scidfm(["train", "--bogus"]).status.code(), Some(2));
    assert_eq!(scidfm(Vec::<String>::new()).status.code(), Some(2));
}

#[test]
fn output_collision_needs_force() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("synth");
    let args = |force: bool| {
        let mut a = vec!["synth", "--kind", "pattern", "--length", "8"].into_iter().map(String::from).collect::<Vec<_>>();
        a.extend(["--out".into(), s(&out)]);
        if force {
            a.push("--force".into());
        }
        a
    };
    ok(args(false));
    assert_eq!(scidfm(args(false)).status.code(), Some(2));
    ok(args(true));
}

#[test]
fn encode_decode_round_trip_and_glycine_stream() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    fs::create_dir(&corpus).unwrap();
    let text = "Glycine, [START_MOL]C(C(=O)O)N[END_MOL], pairs with a short chain \
                [START_PROT]MIRLGAPQTL[END_PROT].\nSecond line: ünïcödé → 42 °C\n";
    fs::write(corpus.join("doc.txt"), text).unwrap();
    fs::write(corpus.join("glycine.txt"), GLYCINE).unwrap();
    let tok = dir.path().join("tok");
    ok(["tokenizer", "train", "--corpus", &s(&corpus), "--size", "480", "--out", &s(&tok)]);
    let vocab = tok.join("vocab.json");

    for name in ["doc.txt", "glycine.txt"] {
        let enc = dir.path().join(format!("enc-{name}"));
        ok([
            "tokenizer",
            "encode",
            "--vocab",
            &s(&vocab),
            "--input",
            &s(&corpus.join(name)),
            "--out",
            &s(&enc),
        ]);
        let dec = dir.path().join(format!("dec-{name}"));
        ok([
            "tokenizer",
            "decode",
            "--vocab",
            &s(&vocab),
            "--input",
            &s(&enc.join("tokens.txt")),
            "--out",
            &s(&dec),
        ]);
        assert_eq!(read(&dec.join("decoded.txt")), read(&corpus.join(name)), "{name}");
        if name == "glycine.txt" {
            // Wrapper, ten atoms and symbols, wrapper, then the newline.
            let ids = String::from_utf8(read(&enc.join("tokens.txt"))).unwrap();
            assert_eq!(ids.split_whitespace().count(), 13);
        }
    }
}

#[test]
fn zero_steps_checkpoint_is_the_initialization() {
    let dir = tempfile::tempdir().unwrap();
    let run = pattern_setup(dir.path());
    let out = dir.path().join("train");
    train(&run, &out, 0, 11);
    let (params, cfg, step) = load_checkpoint(&out.join("checkpoint")).unwrap();
    assert_eq!(step, 0);
    let init = Params::init(&cfg, 11).unwrap();
    for (a, b) in params.tensors().iter().zip(init.tensors()) {
        // Checkpoints store f32.
        let rounded: Vec<f64> = b.data().iter().map(|&x| x as f32 as f64).collect();
        assert_eq!(a.data(), rounded.as_slice());
    }
    assert_eq!(lm_losses(&out.join("history.csv")).len(), 0);
}

#[test]
fn same_seed_gives_identical_history_and_generation() {
    let dir = tempfile::tempdir().unwrap();
    let run = pattern_setup(dir.path());
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
    train(&run, &a, 150, 3);
    train(&run, &b, 150, 3);
    train(&run, &c, 150, 4);
    assert_eq!(read(&a.join("history.csv")), read(&b.join("history.csv")));
    assert_eq!(read(&a.join("checkpoint/weights.bin")), read(&b.join("checkpoint/weights.bin")));
    assert_ne!(read(&a.join("history.csv")), read(&c.join("history.csv")));

    let gen = |prompt: &str, n: usize| {
        let out = ok([
            "generate",
            "--checkpoint",
            &s(&a),
            "--vocab",
            &s(&run.vocab),
            "--prompt",
            prompt,
            "--max-tokens",
            &n.to_string(),
        ]);
        String::from_utf8(out.stdout).unwrap().trim_end_matches('\n').to_string()
    };
    assert_eq!(gen("abba", 0), "abba");
    let first = gen("a", 8);
    assert!(first.starts_with("ab"), "{first:?}");
    assert_eq!(first, gen("a", 8));
}

#[test]
fn generate_rejects_context_overflow() {
    let dir = tempfile::tempdir().unwrap();
    let run = pattern_setup(dir.path());
    let out = dir.path().join("t");
    train(&run, &out, 0, 0);
    let prompt = "ab".repeat(100);
    let res = scidfm([
        "generate",
        "--checkpoint",
        &s(&out),
        "--vocab",
        &s(&run.vocab),
        "--prompt",
        &prompt,
        "--max-tokens",
        "4",
    ]);
    assert_eq!(res.status.code(), Some(1));
}

fn labeled_setup(root: &std::path::Path, labels: &str, per_label: usize) -> (std::path::PathBuf, std::path::PathBuf) {
    let corpus = root.join("corpus");
    ok([
        "synth",
        "--kind",
        "domains",
        "--labels",
        labels,
        "--per-label",
        &per_label.to_string(),
        "--out",
        &s(&corpus),
    ]);
    let tok = root.join("tok");
    ok(["tokenizer", "train", "--corpus", &s(&corpus), "--size", "512", "--out", &s(&tok)]);
    let model = root.join("model");
    ok([
        "train",
        "--corpus",
        &s(&corpus),
        "--vocab",
        &s(&tok.join("vocab.json")),
        "--steps",
        "0",
        "--out",
        &s(&model),
    ]);
    (corpus, tok.join("vocab.json"))
}

fn analyze(root: &std::path::Path, corpus: &std::path::Path, vocab: &std::path::Path, name: &str, extra: &[&str]) -> std::path::PathBuf {
    let out = root.join(name);
    let mut args = vec![
        "analyze".to_string(),
        "--checkpoint".into(),
        s(&root.join("model")),
        "--vocab".into(),
        s(vocab),
        "--corpus".into(),
        s(corpus),
        "--iterations".into(),
        "300".into(),
        "--out".into(),
        s(&out),
    ];
    args.extend(extra.iter().map(|x| x.to_string()));
    ok(args);
    out
}

#[test]
fn analyze_six_labels() {
    let dir = tempfile::tempdir().unwrap();
    let (corpus, vocab) = labeled_setup(dir.path(), "math,physics,chemistry,biology,molecule,protein", 8);
    let a = analyze(dir.path(), &corpus, &vocab, "a", &["--seed", "5"]);
    let b = analyze(dir.path(), &corpus, &vocab, "b", &["--seed", "5"]);
    for f in ["profiles.csv", "embedding.csv", "plot.svg", "cluster_report.json", "manifest.json"] {
        assert!(a.join(f).is_file(), "{f}");
    }
    assert_eq!(read(&a.join("embedding.csv")), read(&b.join("embedding.csv")));

    let profiles = String::from_utf8(read(&a.join("profiles.csv"))).unwrap();
    let labels: BTreeSet<&str> = profiles.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(labels.len(), 6);
    assert_eq!(profiles.lines().count(), 1 + 6 * 8);
    // Two layers of four experts.
    assert_eq!(profiles.lines().next().unwrap().split(',').count(), 1 + 8);

    let svg = String::from_utf8(read(&a.join("plot.svg"))).unwrap();
    let colors: BTreeSet<&str> = svg
        .lines()
        .filter(|l| l.contains("class=\"marker\""))
        .filter_map(|l| l.split("fill=\"").nth(1).and_then(|r| r.split('"').next()))
        .collect();
    assert_eq!(colors.len(), 6);

    let report: serde_json::Value = serde_json::from_slice(&read(&a.join("cluster_report.json"))).unwrap();
    assert_eq!(report["labels"].as_array().unwrap().len(), 6);
    assert!(report["silhouette_embedding"].is_number());
}

#[test]
fn analyze_without_reducer_and_with_too_few_labels() {
    let dir = tempfile::tempdir().unwrap();
    let (corpus, vocab) = labeled_setup(dir.path(), "math,molecule", 5);
    let out = analyze(dir.path(), &corpus, &vocab, "raw", &["--reducer", "none", "--pooling", "mean"]);
    assert!(out.join("profiles.csv").is_file());
    assert!(out.join("cluster_report.json").is_file());
    assert!(!out.join("embedding.csv").exists());
    assert!(!out.join("plot.svg").exists());
    let report: serde_json::Value = serde_json::from_slice(&read(&out.join("cluster_report.json"))).unwrap();
    assert!(report["silhouette_embedding"].is_null());
    assert_eq!(report["pooling"], "mean");

    fs::remove_dir_all(corpus.join("math")).unwrap();
    let res = scidfm([
        "analyze",
        "--checkpoint",
        &s(&dir.path().join("model")),
        "--vocab",
        &s(&vocab),
        "--corpus",
        &s(&corpus),
        "--out",
        &s(&dir.path().join("one")),
    ]);
    assert_eq!(res.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&res.stderr).contains("at least 2 label"));
}

#[test]
fn replay_reproduces_artifacts_and_checks_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let run = pattern_setup(dir.path());
    let first = dir.path().join("first");
    train(&run, &first, 20, 9);
    let manifest: serde_json::Value = serde_json::from_slice(&read(&first.join("manifest.json"))).unwrap();
    assert_eq!(manifest["complete"], true);
    assert_eq!(manifest["command"], "train");
    assert_eq!(manifest["seed"], 9);

    let again = dir.path().join("again");
    ok(["replay", "--manifest", &s(&first.join("manifest.json")), "--out", &s(&again)]);
    let replayed: serde_json::Value = serde_json::from_slice(&read(&again.join("manifest.json"))).unwrap();
    assert_eq!(manifest["outputs"], replayed["outputs"]);
    assert_eq!(manifest["invocation"], replayed["invocation"]);
    assert_eq!(read(&first.join("history.csv")), read(&again.join("history.csv")));

    // An edited input invalidates the manifest.
    fs::write(&run.corpus, "abababab").unwrap();
    let res = scidfm(["replay", "--manifest", &s(&first.join("manifest.json")), "--out", &s(&dir.path().join("x"))]);
    assert_eq!(res.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&res.stderr).contains("inputs changed"));
}

#[test]
fn corpus_location_does_not_change_training() {
    let dir = tempfile::tempdir().unwrap();
    let mut histories = Vec::new();
    for name in ["one", "somewhere/else"] {
        let root = dir.path().join(name);
        let corpus = root.join("corpus");
        ok(["synth", "--kind", "domains", "--labels", "math,protein", "--per-label", "4", "--out", &s(&corpus)]);
        let tok = root.join("tok");
        ok(["tokenizer", "train", "--corpus", &s(&corpus), "--size", "500", "--out", &s(&tok)]);
        let out = root.join("train");
        ok([
            "train",
            "--corpus",
            &s(&corpus),
            "--vocab",
            &s(&tok.join("vocab.json")),
            "--steps",
            "10",
            "--out",
            &s(&out),
        ]);
        histories.push((read(&tok.join("vocab.json")), read(&out.join("history.csv"))));
    }
    assert!(histories[0] == histories[1]);
}
