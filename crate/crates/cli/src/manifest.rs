//! Run manifests: the fully resolved invocation of a command plus checksums
//! of everything it read and wrote.
//!
//! A manifest is written before any artifact and rewritten once the command
//! finishes, both times through a temporary file and a rename. Replaying a
//! manifest runs the same invocation again into a fresh directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use scidfm_core::model::ModelConfig;
use scidfm_core::train::TrainConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::commands;
use crate::util::{list_files, prepare_out_dir, write_atomic, CliResult};

pub const MANIFEST_FILE: &str = "manifest.json";
const FORMAT: &str = "scidfm-run";
const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Reducer {
    Tsne,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum PoolingArg {
    Sum,
    Mean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SynthKind {
    Pattern,
    Domains,
}

/// Everything a command needs, with every default filled in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Invocation {
    TokenizerTrain {
        corpus: Vec<PathBuf>,
        size: usize,
    },
    TokenizerEncode {
        vocab: PathBuf,
        input: PathBuf,
    },
    TokenizerDecode {
        vocab: PathBuf,
        input: PathBuf,
    },
    Train {
        corpus: PathBuf,
        vocab: PathBuf,
        model: ModelConfig,
        train: TrainConfig,
        cycle: bool,
    },
    Generate {
        checkpoint: PathBuf,
        vocab: PathBuf,
        prompt: String,
        max_tokens: usize,
    },
    Analyze {
        checkpoint: PathBuf,
        vocab: PathBuf,
        corpus: PathBuf,
        reducer: Reducer,
        pooling: PoolingArg,
        perplexity: f64,
        iterations: usize,
        seed: u64,
    },
    Synth {
        kind: SynthKind,
        unit: String,
        length: usize,
        labels: Vec<String>,
        per_label: usize,
        seed: u64,
    },
}

impl Invocation {
    pub fn name(&self) -> &'static str {
        match self {
            Invocation::TokenizerTrain { .. } => "tokenizer-train",
            Invocation::TokenizerEncode { .. } => "tokenizer-encode",
            Invocation::TokenizerDecode { .. } => "tokenizer-decode",
            Invocation::Train { .. } => "train",
            Invocation::Generate { .. } => "generate",
            Invocation::Analyze { .. } => "analyze",
            Invocation::Synth { .. } => "synth",
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            Invocation::Train { train, .. } => Some(train.seed),
            Invocation::Analyze { seed, .. } | Invocation::Synth { seed, .. } => Some(*seed),
            _ => None,
        }
    }

    /// Files and directories the command reads.
    pub fn inputs(&self) -> Vec<&Path> {
        match self {
            Invocation::TokenizerTrain { corpus, .. } => corpus.iter().map(PathBuf::as_path).collect(),
            Invocation::TokenizerEncode { vocab, input } | Invocation::TokenizerDecode { vocab, input } => {
                vec![vocab, input]
            }
            Invocation::Train { corpus, vocab, .. } => vec![corpus, vocab],
            Invocation::Generate { checkpoint, vocab, .. } => vec![checkpoint, vocab],
            Invocation::Analyze {
                checkpoint,
                vocab,
                corpus,
                ..
            } => vec![checkpoint, vocab, corpus],
            Invocation::Synth { .. } => vec![],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub format: String,
    pub version: u32,
    pub tool_version: String,
    pub command: String,
    pub seed: Option<u64>,
    pub out_dir: PathBuf,
    pub invocation: Invocation,
    /// SHA-256 of every input file, keyed by path.
    pub inputs: BTreeMap<String, String>,
    /// SHA-256 of every artifact, keyed by path relative to `out_dir`.
    pub outputs: BTreeMap<String, String>,
    /// False until every artifact has been written.
    pub complete: bool,
}

impl RunManifest {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let m: RunManifest =
            serde_json::from_str(&text).with_context(|| format!("parsing run manifest {}", path.display()))?;
        if m.format != FORMAT || m.version != VERSION {
            bail!("{}: unsupported manifest {} v{}", path.display(), m.format, m.version);
        }
        Ok(m)
    }

    fn save(&self) -> anyhow::Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        write_atomic(&self.out_dir.join(MANIFEST_FILE), text.as_bytes())
    }
}

pub fn sha256_file(path: &Path) -> anyhow::Result<String> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(format!("{:x}", Sha256::digest(&bytes)))
}

fn input_checksums(inv: &Invocation) -> anyhow::Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for input in inv.inputs() {
        for file in list_files(input)? {
            out.insert(file.display().to_string(), sha256_file(&file)?);
        }
    }
    Ok(out)
}

/// Runs `inv` into `out`, bracketing it with manifest writes.
pub fn run_recorded(inv: &Invocation, out: &Path, force: bool) -> CliResult<RunManifest> {
    prepare_out_dir(out, force)?;
    let out_dir = std::path::absolute(out)?;
    let mut manifest = RunManifest {
        format: FORMAT.into(),
        version: VERSION,
        tool_version: env!("CARGO_PKG_VERSION").into(),
        command: inv.name().into(),
        seed: inv.seed(),
        out_dir: out_dir.clone(),
        invocation: inv.clone(),
        inputs: input_checksums(inv)?,
        outputs: BTreeMap::new(),
        complete: false,
    };
    manifest.save()?;
    let written = commands::execute(inv, &out_dir)?;
    for rel in written {
        let sum = sha256_file(&out_dir.join(&rel))?;
        manifest.outputs.insert(rel, sum);
    }
    manifest.complete = true;
    manifest.save()?;
    Ok(manifest)
}

/// Re-runs the invocation recorded in `manifest_path` into `out`. Inputs
/// must still match their recorded checksums.
pub fn replay(manifest_path: &Path, out: &Path, force: bool) -> CliResult<RunManifest> {
    let recorded = RunManifest::load(manifest_path)?;
    let current = input_checksums(&recorded.invocation)?;
    if current != recorded.inputs {
        let changed: Vec<&String> = recorded
            .inputs
            .iter()
            .filter(|(k, v)| current.get(*k) != Some(v))
            .map(|(k, _)| k)
            .chain(current.keys().filter(|k| !recorded.inputs.contains_key(*k)))
            .collect();
        return Err(anyhow::anyhow!("inputs changed since the recorded run: {changed:?}").into());
    }
    run_recorded(&recorded.invocation, out, force)
}
