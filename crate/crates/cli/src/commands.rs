//! The work behind each subcommand. Every function writes its artifacts into
//! `out` and returns their paths relative to it.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use scidfm_core::lens::{
    cluster_report, collect_profiles, embedding_csv, emit_plot, profiles_csv, tsne_reduce, ClusterReport,
    LabeledTokens, Pooling, TsneConfig,
};
use scidfm_core::model::{generate, load_checkpoint, save_checkpoint, ModelConfig, Params};
use scidfm_core::synth::{labeled_corpus, pattern_text, Domain};
use scidfm_core::tokenizer::{decode, encode_marked, train_bpe, Document, TokenSequence, Vocabulary};
use scidfm_core::train::{train, write_history_csv, TrainConfig};
use scidfm_core::Exec;
use serde::Serialize;

use crate::manifest::{Invocation, PoolingArg, Reducer, SynthKind};
use crate::util::{list_files, read_text};

pub const VOCAB_FILE: &str = "vocab.json";
pub const TOKENS_FILE: &str = "tokens.txt";
pub const DECODED_FILE: &str = "decoded.txt";
pub const CHECKPOINT_DIR: &str = "checkpoint";
pub const HISTORY_FILE: &str = "history.csv";
pub const GENERATION_FILE: &str = "generation.txt";
pub const PROFILES_FILE: &str = "profiles.csv";
pub const EMBEDDING_FILE: &str = "embedding.csv";
pub const PLOT_FILE: &str = "plot.svg";
pub const REPORT_FILE: &str = "cluster_report.json";

/// Largest model the CLI will try to train in memory.
const MAX_TRAIN_PARAMS: usize = 50_000_000;

pub fn execute(inv: &Invocation, out: &Path) -> Result<Vec<String>> {
    match inv {
        Invocation::TokenizerTrain { corpus, size } => tokenizer_train(corpus, *size, out),
        Invocation::TokenizerEncode { vocab, input } => tokenizer_encode(vocab, input, out),
        Invocation::TokenizerDecode { vocab, input } => tokenizer_decode(vocab, input, out),
        Invocation::Train {
            corpus,
            vocab,
            model,
            train,
            cycle,
        } => run_train(corpus, vocab, model, train, *cycle, out),
        Invocation::Generate {
            checkpoint,
            vocab,
            prompt,
            max_tokens,
        } => {
            let text = generate_text(checkpoint, vocab, prompt, *max_tokens)?;
            println!("{text}");
            std::fs::write(out.join(GENERATION_FILE), &text)?;
            Ok(vec![GENERATION_FILE.into()])
        }
        Invocation::Analyze { .. } => analyze(inv, out),
        Invocation::Synth {
            kind,
            unit,
            length,
            labels,
            per_label,
            seed,
        } => synth(*kind, unit, *length, labels, *per_label, *seed, out),
    }
}

fn load_vocab(path: &Path) -> Result<Vocabulary> {
    Vocabulary::load(path).with_context(|| format!("loading vocabulary {}", path.display()))
}

/// Accepts either a checkpoint directory or a training run directory that
/// holds one.
fn checkpoint_dir(path: &Path) -> PathBuf {
    let nested = path.join(CHECKPOINT_DIR);
    if !path.join("checkpoint.json").exists() && nested.join("checkpoint.json").exists() {
        nested
    } else {
        path.to_path_buf()
    }
}

fn load_model(path: &Path, vocab: &Vocabulary) -> Result<(Params, ModelConfig)> {
    let (params, cfg, _) = load_checkpoint(&checkpoint_dir(path))
        .with_context(|| format!("loading checkpoint {}", path.display()))?;
    if cfg.vocab_size < vocab.size() {
        bail!(
            "checkpoint vocabulary ({}) is smaller than the tokenizer's ({})",
            cfg.vocab_size,
            vocab.size()
        );
    }
    Ok((params, cfg))
}

fn tokenizer_train(corpus: &[PathBuf], size: usize, out: &Path) -> Result<Vec<String>> {
    let ids = scidfm_core::tokenizer::Identifiers::default();
    let mut docs = Vec::new();
    for root in corpus {
        for file in list_files(root)? {
            let text = read_text(&file)?;
            docs.push(Document::parse_marked(&text, &ids).with_context(|| format!("parsing {}", file.display()))?);
        }
    }
    let vocab = train_bpe(&docs, size)?;
    vocab.save(&out.join(VOCAB_FILE))?;
    println!("trained vocabulary of {} tokens from {} documents", vocab.size(), docs.len());
    Ok(vec![VOCAB_FILE.into()])
}

fn tokenizer_encode(vocab: &Path, input: &Path, out: &Path) -> Result<Vec<String>> {
    let vocab = load_vocab(vocab)?;
    let seq = encode_marked(&read_text(input)?, &vocab).with_context(|| format!("encoding {}", input.display()))?;
    let mut text = seq.ids.iter().map(u32::to_string).collect::<Vec<_>>().join(" ");
    text.push('\n');
    std::fs::write(out.join(TOKENS_FILE), text)?;
    println!("{} tokens", seq.len());
    Ok(vec![TOKENS_FILE.into()])
}

fn parse_ids(path: &Path) -> Result<Vec<u32>> {
    read_text(path)?
        .split_whitespace()
        .map(|t| t.parse::<u32>().with_context(|| format!("{}: bad token id {t:?}", path.display())))
        .collect()
}

fn tokenizer_decode(vocab: &Path, input: &Path, out: &Path) -> Result<Vec<String>> {
    let vocab = load_vocab(vocab)?;
    let text = decode(&TokenSequence::new(parse_ids(input)?), &vocab)?;
    std::fs::write(out.join(DECODED_FILE), text)?;
    Ok(vec![DECODED_FILE.into()])
}

/// Token stream of every corpus file in sorted order, each followed by the
/// end-of-document token.
fn corpus_stream(corpus: &Path, vocab: &Vocabulary) -> Result<Vec<u32>> {
    let mut stream = Vec::new();
    for file in list_files(corpus)? {
        let seq = encode_marked(&read_text(&file)?, vocab).with_context(|| format!("encoding {}", file.display()))?;
        stream.extend(seq.ids);
        stream.push(vocab.end_of_doc_id());
    }
    Ok(stream)
}

fn run_train(
    corpus: &Path,
    vocab: &Path,
    model: &ModelConfig,
    tcfg: &TrainConfig,
    cycle: bool,
    out: &Path,
) -> Result<Vec<String>> {
    let vocab = load_vocab(vocab)?;
    if model.vocab_size != vocab.size() {
        bail!(
            "model vocab_size {} does not match the tokenizer's {}",
            model.vocab_size,
            vocab.size()
        );
    }
    model.validate()?;
    tcfg.validate()?;
    if model.param_count() > MAX_TRAIN_PARAMS {
        bail!(
            "model has {} parameters; training is limited to {MAX_TRAIN_PARAMS} at desk scale",
            model.param_count()
        );
    }
    let stream = corpus_stream(corpus, &vocab)?;
    if stream.is_empty() {
        bail!("corpus {} is empty", corpus.display());
    }
    let mut params = Params::init(model, tcfg.seed)?;
    let outcome = if cycle {
        train(&mut params, model, stream.iter().copied().cycle(), tcfg, Exec::default())?
    } else {
        train(&mut params, model, stream.iter().copied(), tcfg, Exec::default())?
    };
    if outcome.exhausted {
        log::warn!("corpus exhausted after {} steps", outcome.history.len());
    }
    save_checkpoint(&out.join(CHECKPOINT_DIR), &params, model, outcome.history.len())?;
    std::fs::write(out.join(HISTORY_FILE), write_history_csv(&outcome.history))?;
    match outcome.history.last() {
        Some(last) => println!(
            "trained {} steps; first lm_loss {:.4}, final lm_loss {:.4}",
            outcome.history.len(),
            outcome.history[0].lm_loss,
            last.lm_loss
        ),
        None => println!("no training steps run; checkpoint holds the initialization"),
    }
    Ok(vec![
        format!("{CHECKPOINT_DIR}/checkpoint.json"),
        format!("{CHECKPOINT_DIR}/weights.bin"),
        HISTORY_FILE.into(),
    ])
}

/// Greedy continuation of `prompt`, decoded back to text including the
/// prompt itself.
pub fn generate_text(checkpoint: &Path, vocab: &Path, prompt: &str, max_tokens: usize) -> Result<String> {
    let vocab = load_vocab(vocab)?;
    let (params, cfg) = load_model(checkpoint, &vocab)?;
    let ids = encode_marked(prompt, &vocab)?.ids;
    if ids.is_empty() {
        bail!("prompt encodes to no tokens");
    }
    let seq = generate(&params, &cfg, &ids, max_tokens)?;
    Ok(decode(&TokenSequence::new(seq), &vocab)?)
}

/// Labeled documents: one subdirectory per label, every file beneath it a
/// document.
fn labeled_documents(corpus: &Path, vocab: &Vocabulary) -> Result<Vec<LabeledTokens>> {
    let mut dirs: Vec<PathBuf> = std::fs::read_dir(corpus)
        .with_context(|| format!("reading {}", corpus.display()))?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<_, _>>()?;
    dirs.retain(|p| p.is_dir() && !p.file_name().is_some_and(|n| n.to_string_lossy().starts_with('.')));
    dirs.sort();
    if dirs.len() < 2 {
        bail!(
            "{} must hold at least 2 label subdirectories, found {}",
            corpus.display(),
            dirs.len()
        );
    }
    let mut docs = Vec::new();
    for dir in dirs {
        let label = dir.file_name().expect("directory name").to_string_lossy().into_owned();
        for file in list_files(&dir)? {
            let seq =
                encode_marked(&read_text(&file)?, vocab).with_context(|| format!("encoding {}", file.display()))?;
            docs.push(LabeledTokens {
                label: label.clone(),
                tokens: seq.ids,
            });
        }
    }
    Ok(docs)
}

#[derive(Serialize)]
struct AnalysisReport {
    pooling: &'static str,
    reducer: Reducer,
    documents: usize,
    skipped_empty: usize,
    truncated: usize,
    perplexity: Option<f64>,
    final_kl: Option<f64>,
    #[serde(flatten)]
    clusters: ClusterReport,
}

fn analyze(inv: &Invocation, out: &Path) -> Result<Vec<String>> {
    let Invocation::Analyze {
        checkpoint,
        vocab,
        corpus,
        reducer,
        pooling,
        perplexity,
        iterations,
        seed,
    } = inv
    else {
        unreachable!("analyze called with {}", inv.name());
    };
    let vocab = load_vocab(vocab)?;
    let (params, cfg) = load_model(checkpoint, &vocab)?;
    let docs = labeled_documents(corpus, &vocab)?;
    let pooling = match pooling {
        PoolingArg::Sum => Pooling::Sum,
        PoolingArg::Mean => Pooling::Mean,
    };
    let set = collect_profiles(&params, &cfg, &docs, pooling, Exec::default())?;
    let labels = set.labels();
    let vectors = set.vectors();
    let mut written = vec![PROFILES_FILE.to_string()];
    std::fs::write(out.join(PROFILES_FILE), profiles_csv(&labels, &vectors, cfg.num_experts)?)?;

    let embedding = match reducer {
        Reducer::Tsne => {
            let tcfg = TsneConfig {
                perplexity: *perplexity,
                iterations: *iterations,
                seed: *seed,
                ..TsneConfig::default()
            };
            let emb = tsne_reduce(&vectors, &tcfg)?;
            std::fs::write(out.join(EMBEDDING_FILE), embedding_csv(&labels, &emb.coords)?)?;
            let title = format!("Expert-choice profiles, {} documents", labels.len());
            std::fs::write(out.join(PLOT_FILE), emit_plot(&emb.coords, &labels, &title))?;
            written.push(EMBEDDING_FILE.into());
            written.push(PLOT_FILE.into());
            Some(emb)
        }
        Reducer::None => None,
    };
    let clusters = cluster_report(&vectors, &labels, embedding.as_ref().map(|e| e.coords.as_slice()))?;
    let report = AnalysisReport {
        pooling: pooling.name(),
        reducer: *reducer,
        documents: labels.len(),
        skipped_empty: set.skipped,
        truncated: set.truncated,
        perplexity: embedding.as_ref().map(|e| e.perplexity),
        final_kl: embedding.as_ref().map(|e| e.final_kl()),
        clusters,
    };
    let mut json = serde_json::to_string_pretty(&report)?;
    json.push('\n');
    std::fs::write(out.join(REPORT_FILE), json)?;
    written.push(REPORT_FILE.into());
    println!(
        "{} profiles over {} labels; intra {:.4}, inter {:.4}, silhouette (raw) {:.4}{}",
        report.documents,
        report.clusters.labels.len(),
        report.clusters.intra_mean,
        report.clusters.inter_mean,
        report.clusters.silhouette_raw,
        report
            .clusters
            .silhouette_embedding
            .map(|s| format!(", silhouette (3D) {s:.4}"))
            .unwrap_or_default()
    );
    Ok(written)
}

fn synth(
    kind: SynthKind,
    unit: &str,
    length: usize,
    labels: &[String],
    per_label: usize,
    seed: u64,
    out: &Path,
) -> Result<Vec<String>> {
    match kind {
        SynthKind::Pattern => {
            let name = "pattern.txt".to_string();
            std::fs::write(out.join(&name), pattern_text(unit, length))?;
            Ok(vec![name])
        }
        SynthKind::Domains => {
            let domains = labels
                .iter()
                .map(|l| Domain::from_label(l).with_context(|| format!("unknown domain {l:?}")))
                .collect::<Result<Vec<_>>>()?;
            let mut written = Vec::new();
            let mut index = std::collections::BTreeMap::<String, usize>::new();
            for doc in labeled_corpus(&domains, per_label, seed) {
                let n = index.entry(doc.label.clone()).or_default();
                let rel = format!("{}/{:04}.txt", doc.label, n);
                *n += 1;
                std::fs::create_dir_all(out.join(&doc.label))?;
                std::fs::write(out.join(&rel), format!("{}\n", doc.text))?;
                written.push(rel);
            }
            Ok(written)
        }
    }
}
