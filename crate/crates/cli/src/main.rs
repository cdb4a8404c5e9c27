//! `scidfm`: tokenizer training, corpus encoding, model training, greedy
//! generation and expert-choice analysis from the command line.
//!
//! Exit codes: 0 on success, 1 when a command fails while running, 2 for
//! usage errors (bad or missing flags, output directory collisions).

mod commands;
mod manifest;
mod util;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use scidfm_core::model::ModelConfig;
use scidfm_core::tokenizer::Vocabulary;
use scidfm_core::train::TrainConfig;
use serde::{Deserialize, Serialize};

use manifest::{run_recorded, Invocation, PoolingArg, Reducer, SynthKind};
use util::{existing, usage, CliResult};

#[derive(Parser)]
#[command(name = "scidfm", version, about = "Desk-scale scientific mixture-of-experts language model toolkit")]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train, apply or invert the tokenizer.
    #[command(subcommand)]
    Tokenizer(TokenizerCommand),
    /// Train a model on a corpus and write a checkpoint plus loss history.
    Train(TrainArgs),
    /// Greedy continuation of a prompt.
    Generate(GenerateArgs),
    /// Expert-choice profiles, t-SNE embedding, plot and cluster report.
    Analyze(AnalyzeArgs),
    /// Write a synthetic corpus.
    Synth(SynthArgs),
    /// Re-run the command recorded in a run manifest.
    Replay(ReplayArgs),
}

#[derive(Subcommand)]
enum TokenizerCommand {
    /// Learn a vocabulary from marked-up text files.
    Train(TokenizerTrainArgs),
    /// Encode a marked-up text file into token ids.
    Encode(CodecArgs),
    /// Decode a token id file back into text.
    Decode(CodecArgs),
}

#[derive(Args)]
struct OutArgs {
    /// Directory for artifacts and the run manifest.
    #[arg(long)]
    out: PathBuf,
    /// Reuse a non-empty output directory, overwriting its artifacts.
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct TokenizerTrainArgs {
    /// Corpus files or directories (searched recursively).
    #[arg(long, required = true, num_args = 1..)]
    corpus: Vec<PathBuf>,
    /// Target vocabulary size, including the reserved tokens.
    #[arg(long, default_value_t = 512)]
    size: usize,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct CodecArgs {
    /// Vocabulary file written by `tokenizer train`.
    #[arg(long)]
    vocab: Option<PathBuf>,
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    out: OutArgs,
}

/// Model and optimizer settings, the format read by `train --config`.
#[derive(Serialize, Deserialize)]
struct TrainSettings {
    model: ModelConfig,
    train: TrainConfig,
}

#[derive(Args)]
struct TrainArgs {
    /// Corpus file or directory of marked-up text.
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    vocab: Option<PathBuf>,
    /// Named model and optimizer settings.
    #[arg(long, value_parser = ["tiny", "table1"], conflicts_with = "config")]
    preset: Option<String>,
    /// JSON file with `model` and `train` sections.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the number of optimizer steps.
    #[arg(long)]
    steps: Option<usize>,
    /// Override the initialization seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Stop when the corpus runs out instead of cycling through it again.
    #[arg(long)]
    no_cycle: bool,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct GenerateArgs {
    /// Checkpoint directory, or a `train` output directory.
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    vocab: Option<PathBuf>,
    /// Prompt text; entity markup is allowed.
    #[arg(long)]
    prompt: String,
    #[arg(long, default_value_t = 16)]
    max_tokens: usize,
    /// Also record the generation and a manifest in this directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    vocab: Option<PathBuf>,
    /// Directory with one subdirectory of documents per label.
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, value_enum, default_value_t = Reducer::Tsne)]
    reducer: Reducer,
    /// Token pooling before the softmax; `mean` divides the sum by length.
    #[arg(long, value_enum, default_value_t = PoolingArg::Sum)]
    pooling: PoolingArg,
    /// Capped at (n - 1) / 3 for n documents.
    #[arg(long, default_value_t = 30.0)]
    perplexity: f64,
    #[arg(long, default_value_t = 1000)]
    iterations: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, value_enum)]
    kind: SynthKind,
    /// Repeating unit of a pattern corpus.
    #[arg(long, default_value = "ab")]
    unit: String,
    /// Characters in a pattern corpus.
    #[arg(long, default_value_t = 4096)]
    length: usize,
    /// Domains of a labeled corpus.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "math,physics,chemistry,biology,molecule,protein"
    )]
    labels: Vec<String>,
    #[arg(long, default_value_t = 100)]
    per_label: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct ReplayArgs {
    /// A `manifest.json` written by an earlier run.
    #[arg(long)]
    manifest: PathBuf,
    #[command(flatten)]
    out: OutArgs,
}

fn vocab_flag(path: Option<&PathBuf>) -> CliResult<PathBuf> {
    util::required("--vocab", path)
}

/// Tiny-model optimizer settings: the default AdamW betas, decay and
/// clipping with a learning rate suited to a 32-wide model.
fn train_preset(name: &str) -> TrainConfig {
    match name {
        "table1" => TrainConfig {
            total_steps: 1000,
            batch_tokens: 4 * 1024 * 1024,
            seq_len: 8192,
            ..TrainConfig::default()
        },
        _ => TrainConfig {
            lr_init: 3e-3,
            total_steps: 500,
            batch_tokens: 128,
            seq_len: 32,
            ..TrainConfig::default()
        },
    }
}

fn resolve_train(args: &TrainArgs) -> CliResult<Invocation> {
    let vocab = vocab_flag(args.vocab.as_ref())?;
    let corpus = existing("--corpus", &args.corpus)?;
    let TrainSettings { mut model, mut train } = match &args.config {
        Some(path) => {
            let path = existing("--config", path)?;
            let text = util::read_text(&path)?;
            serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?
        }
        None => {
            let name = args.preset.as_deref().unwrap_or("tiny");
            TrainSettings {
                model: ModelConfig::preset(name)?,
                train: train_preset(name),
            }
        }
    };
    if let Some(steps) = args.steps {
        train.total_steps = steps;
    }
    if let Some(seed) = args.seed {
        train.seed = seed;
    }
    let vocab_size = Vocabulary::load(&vocab)
        .with_context(|| format!("loading vocabulary {}", vocab.display()))?
        .size();
    if model.vocab_size != vocab_size {
        log::info!("model vocab_size set to the tokenizer's {vocab_size} (was {})", model.vocab_size);
        model.vocab_size = vocab_size;
    }
    Ok(Invocation::Train {
        corpus,
        vocab,
        model,
        train,
        cycle: !args.no_cycle,
    })
}

fn run(cli: Cli) -> CliResult<()> {
    let (inv, out): (Invocation, &OutArgs) = match &cli.command {
        Command::Tokenizer(TokenizerCommand::Train(a)) => {
            let corpus = a
                .corpus
                .iter()
                .map(|p| existing("--corpus", p))
                .collect::<CliResult<Vec<_>>>()?;
            (Invocation::TokenizerTrain { corpus, size: a.size }, &a.out)
        }
        Command::Tokenizer(TokenizerCommand::Encode(a)) => (
            Invocation::TokenizerEncode {
                vocab: vocab_flag(a.vocab.as_ref())?,
                input: existing("--input", &a.input)?,
            },
            &a.out,
        ),
        Command::Tokenizer(TokenizerCommand::Decode(a)) => (
            Invocation::TokenizerDecode {
                vocab: vocab_flag(a.vocab.as_ref())?,
                input: existing("--input", &a.input)?,
            },
            &a.out,
        ),
        Command::Train(a) => (resolve_train(a)?, &a.out),
        Command::Generate(a) => {
            let checkpoint = existing("--checkpoint", &a.checkpoint)?;
            let vocab = vocab_flag(a.vocab.as_ref())?;
            let Some(out) = &a.out else {
                let text = commands::generate_text(&checkpoint, &vocab, &a.prompt, a.max_tokens)?;
                println!("{text}");
                return Ok(());
            };
            let inv = Invocation::Generate {
                checkpoint,
                vocab,
                prompt: a.prompt.clone(),
                max_tokens: a.max_tokens,
            };
            report(&run_recorded(&inv, out, a.force)?.out_dir);
            return Ok(());
        }
        Command::Analyze(a) => {
            if !(a.perplexity > 0.0) {
                return usage(format!("--perplexity must be positive, got {}", a.perplexity));
            }
            (
                Invocation::Analyze {
                    checkpoint: existing("--checkpoint", &a.checkpoint)?,
                    vocab: vocab_flag(a.vocab.as_ref())?,
                    corpus: existing("--corpus", &a.corpus)?,
                    reducer: a.reducer,
                    pooling: a.pooling,
                    perplexity: a.perplexity,
                    iterations: a.iterations,
                    seed: a.seed,
                },
                &a.out,
            )
        }
        Command::Synth(a) => {
            if a.kind == SynthKind::Pattern && a.unit.is_empty() {
                return usage("--unit must not be empty");
            }
            (
                Invocation::Synth {
                    kind: a.kind,
                    unit: a.unit.clone(),
                    length: a.length,
                    labels: a.labels.clone(),
                    per_label: a.per_label,
                    seed: a.seed,
                },
                &a.out,
            )
        }
        Command::Replay(a) => {
            let path = existing("--manifest", &a.manifest)?;
            report(&manifest::replay(&path, &a.out.out, a.out.force)?.out_dir);
            return Ok(());
        }
    };
    let manifest = run_recorded(&inv, &out.out, out.force)?;
    report(&manifest.out_dir);
    Ok(())
}

fn report(out_dir: &Path) {
    eprintln!("wrote {}", out_dir.join(manifest::MANIFEST_FILE).display());
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
