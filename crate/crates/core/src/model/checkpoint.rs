//! Checkpoint format: a versioned JSON manifest listing every tensor's name,
//! shape and byte offset, plus one blob of little-endian `f32` values in
//! manifest order.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ModelConfig;
use super::params::Params;
use crate::error::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "scidfm-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "checkpoint.json";
pub const BLOB_FILE: &str = "weights.bin";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    /// Byte offset into the blob.
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub format: String,
    pub version: u32,
    pub dtype: String,
    pub blob: String,
    pub step: usize,
    pub config: ModelConfig,
    pub tensors: Vec<TensorEntry>,
}

/// Serializes weights to `(manifest JSON, blob bytes)`.
pub fn encode_checkpoint(params: &Params, cfg: &ModelConfig, step: usize) -> Result<(String, Vec<u8>)> {
    let mut blob = Vec::with_capacity(params.num_params() * 4);
    let mut tensors = Vec::new();
    for (name, t) in params.named_tensors() {
        tensors.push(TensorEntry {
            name,
            shape: t.shape().to_vec(),
            offset: blob.len(),
        });
        for &x in t.data() {
            blob.extend_from_slice(&(x as f32).to_le_bytes());
        }
    }
    let manifest = CheckpointManifest {
        format: CHECKPOINT_FORMAT.into(),
        version: CHECKPOINT_VERSION,
        dtype: "f32-le".into(),
        blob: BLOB_FILE.into(),
        step,
        config: cfg.clone(),
        tensors,
    };
    Ok((serde_json::to_string_pretty(&manifest)? + "\n", blob))
}

pub fn decode_checkpoint(manifest: &str, blob: &[u8]) -> Result<(Params, ModelConfig, usize)> {
    let m: CheckpointManifest = serde_json::from_str(manifest)?;
    if m.format != CHECKPOINT_FORMAT || m.version != CHECKPOINT_VERSION || m.dtype != "f32-le" {
        return Err(Error::Invalid(format!(
            "unsupported checkpoint {} v{} ({})",
            m.format, m.version, m.dtype
        )));
    }
    m.config.validate()?;
    let mut params = Params::zeros(&m.config);
    let slots = params.named_tensors_mut();
    if slots.len() != m.tensors.len() {
        return Err(Error::Shape(format!(
            "checkpoint lists {} tensors, config needs {}",
            m.tensors.len(),
            slots.len()
        )));
    }
    let mut expected_offset = 0;
    for ((name, t), entry) in slots.into_iter().zip(&m.tensors) {
        if name != entry.name || t.shape() != entry.shape.as_slice() || entry.offset != expected_offset {
            return Err(Error::Shape(format!(
                "tensor {} {:?}@{} does not match expected {} {:?}@{}",
                entry.name,
                entry.shape,
                entry.offset,
                name,
                t.shape(),
                expected_offset
            )));
        }
        let bytes = t.len() * 4;
        let chunk = blob
            .get(entry.offset..entry.offset + bytes)
            .ok_or_else(|| Error::Shape(format!("blob truncated inside {name}")))?;
        for (x, b) in t.data_mut().iter_mut().zip(chunk.chunks_exact(4)) {
            *x = f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64;
        }
        expected_offset += bytes;
    }
    if expected_offset != blob.len() {
        return Err(Error::Shape(format!(
            "blob has {} bytes, manifest accounts for {expected_offset}",
            blob.len()
        )));
    }
    Ok((params, m.config, m.step))
}

pub fn save_checkpoint(dir: &Path, params: &Params, cfg: &ModelConfig, step: usize) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let (manifest, blob) = encode_checkpoint(params, cfg, step)?;
    std::fs::write(dir.join(BLOB_FILE), blob)?;
    std::fs::write(dir.join(MANIFEST_FILE), manifest)?;
    Ok(())
}

pub fn load_checkpoint(dir: &Path) -> Result<(Params, ModelConfig, usize)> {
    let manifest_path = dir.join(MANIFEST_FILE);
    let manifest = std::fs::read_to_string(&manifest_path)?;
    let blob = std::fs::read(dir.join(BLOB_FILE))?;
    decode_checkpoint(&manifest, &blob).map_err(|e| Error::Format {
        path: manifest_path,
        msg: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let cfg = ModelConfig::tiny();
        let p = Params::init(&cfg, 11).unwrap();
        let (m, blob) = encode_checkpoint(&p, &cfg, 42).unwrap();
        let (q, cfg2, step) = decode_checkpoint(&m, &blob).unwrap();
        assert_eq!(p, q);
        assert_eq!(cfg, cfg2);
        assert_eq!(step, 42);
        let (m2, blob2) = encode_checkpoint(&q, &cfg2, 42).unwrap();
        assert_eq!(m, m2);
        assert_eq!(blob, blob2);
    }

    #[test]
    fn rejects_truncated_blob() {
        let cfg = ModelConfig::tiny();
        let p = Params::init(&cfg, 1).unwrap();
        let (m, blob) = encode_checkpoint(&p, &cfg, 0).unwrap();
        assert!(decode_checkpoint(&m, &blob[..blob.len() - 4]).is_err());
        let mut extra = blob.clone();
        extra.push(0);
        assert!(decode_checkpoint(&m, &extra).is_err());
    }

    #[test]
    fn save_and_load_files() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ModelConfig::tiny();
        let p = Params::init(&cfg, 2).unwrap();
        save_checkpoint(dir.path(), &p, &cfg, 3).unwrap();
        let (q, _, step) = load_checkpoint(dir.path()).unwrap();
        assert_eq!((p, 3), (q, step));
    }
}
