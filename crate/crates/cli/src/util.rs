//! Error classification and filesystem helpers shared by the commands.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;

use crate::manifest::MANIFEST_FILE;

/// Failure of a command, split by exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags or arguments: exit code 2.
    Usage(String),
    /// Anything that went wrong while running: exit code 1.
    Failed(anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Failed(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Failed(e) => write!(f, "{e:#}"),
        }
    }
}

macro_rules! failed_from {
    ($($t:ty),*) => {
        $(impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Failed(e.into())
            }
        })*
    };
}

failed_from!(anyhow::Error, scidfm_core::Error, std::io::Error, serde_json::Error);

pub type CliResult<T> = Result<T, CliError>;

pub fn usage<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(CliError::Usage(msg.into()))
}

/// Checks that a path given through `flag` exists and returns it made
/// absolute, so manifests stay valid from any working directory.
pub fn existing(flag: &str, path: &Path) -> CliResult<PathBuf> {
    if !path.exists() {
        return usage(format!("{flag}: no such file or directory: {}", path.display()));
    }
    Ok(std::path::absolute(path).with_context(|| format!("resolving {}", path.display()))?)
}

/// Like [`existing`] but for an optional flag that the command needs.
pub fn required(flag: &str, path: Option<&PathBuf>) -> CliResult<PathBuf> {
    match path {
        Some(p) => existing(flag, p),
        None => usage(format!("missing required flag {flag}")),
    }
}

/// Makes sure `out` can receive artifacts. An existing non-empty directory
/// is only reused with `force`; existing files are then overwritten.
pub fn prepare_out_dir(out: &Path, force: bool) -> CliResult<()> {
    if out.exists() {
        if !out.is_dir() {
            return usage(format!("--out: {} exists and is not a directory", out.display()));
        }
        let occupied = fs::read_dir(out)?.next().is_some();
        if occupied && !force {
            return usage(format!(
                "--out: {} already exists and is not empty; pass --force to overwrite",
                out.display()
            ));
        }
    }
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    Ok(())
}

/// Every regular file under `path` (or `path` itself), in sorted order.
/// Hidden entries and run manifests are skipped: a manifest records
/// absolute paths, so reading one as corpus text would tie the results to
/// where the corpus was written.
pub fn list_files(path: &Path) -> anyhow::Result<Vec<PathBuf>> {
    if path.is_file() {
        return Ok(vec![path.to_path_buf()]);
    }
    let mut entries: Vec<PathBuf> = fs::read_dir(path)
        .with_context(|| format!("reading {}", path.display()))?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<_, _>>()?;
    entries.sort();
    let mut out = Vec::new();
    for e in entries {
        let name = e.file_name().and_then(|n| n.to_str()).unwrap_or_default();
        if name.starts_with('.') || (name == MANIFEST_FILE && e.is_file()) {
            continue;
        }
        if e.is_dir() {
            out.extend(list_files(&e)?);
        } else if e.is_file() {
            out.push(e);
        }
    }
    Ok(out)
}

pub fn read_text(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

/// Writes through a temporary sibling and renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> anyhow::Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, contents).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}
