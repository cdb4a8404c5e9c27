#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn scidfm<I, S>(args: I) -> Output
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    Command::new(env!("CARGO_BIN_EXE_scidfm"))
        .args(args)
        .output()
        .expect("spawning scidfm")
}

/// Runs and panics with stderr unless the exit code is 0.
pub fn ok<I, S>(args: I) -> Output
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    let out = scidfm(args);
    assert!(
        out.status.success(),
        "scidfm failed ({:?}): {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

pub fn s(p: &Path) -> String {
    p.display().to_string()
}

pub fn read(p: &Path) -> Vec<u8> {
    std::fs::read(p).unwrap_or_else(|e| panic!("reading {}: {e}", p.display()))
}

/// Pattern corpus and its tokenizer.
pub struct PatternRun {
    pub corpus: PathBuf,
    pub vocab: PathBuf,
}

/// Synthesizes an "abab..." corpus and a tokenizer with no merges beyond
/// the reserved tables plus its two characters.
pub fn pattern_setup(root: &Path) -> PatternRun {
    let synth = root.join("synth");
    ok(["synth", "--kind", "pattern", "--length", "4096", "--out", &s(&synth)]);
    let tok = root.join("tok");
    ok(["tokenizer", "train", "--corpus", &s(&synth), "--size", "440", "--out", &s(&tok)]);
    PatternRun {
        corpus: synth.join("pattern.txt"),
        vocab: tok.join("vocab.json"),
    }
}

pub fn train(run: &PatternRun, out: &Path, steps: usize, seed: u64) -> Output {
    ok([
        "train",
        "--corpus",
        &s(&run.corpus),
        "--vocab",
        &s(&run.vocab),
        "--preset",
        "tiny",
        "--steps",
        &steps.to_string(),
        "--seed",
        &seed.to_string(),
        "--out",
        &s(out),
    ])
}

/// The lm_loss column of a history file.
pub fn lm_losses(history: &Path) -> Vec<f64> {
    let text = String::from_utf8(read(history)).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = header.iter().position(|h| *h == "lm_loss").expect("lm_loss column");
    lines.map(|l| l.split(',').nth(col).unwrap().parse().unwrap()).collect()
}
