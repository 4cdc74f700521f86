//! Checkpoint files: `"HOMN"`, u32 LE version, u64 LE header length, a JSON
//! header, then little-endian f32 blobs at the offsets the header states.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::adam::AdamMoments;
use crate::model::{ModelConfig, ModelError, ModelState};
use crate::numerics::Tensor;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"HOMN";
pub const CHECKPOINT_VERSION: u32 = 1;

const MOMENT_M: &str = "adam.m.";
const MOMENT_V: &str = "adam.v.";

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("not a checkpoint file (bad magic {0:?})")]
    BadMagic([u8; 4]),
    #[error("checkpoint version {0} is not supported (expected {CHECKPOINT_VERSION})")]
    VersionUnsupported(u32),
    #[error("checkpoint tensors do not match the embedded config: {0}")]
    ShapeMismatch(String),
    #[error("truncated checkpoint: {0}")]
    TruncatedFile(String),
    #[error("malformed checkpoint header: {0}")]
    Header(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<ModelError> for CheckpointError {
    fn from(e: ModelError) -> Self {
        CheckpointError::ShapeMismatch(e.to_string())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    /// Epoch the stored weights come from.
    pub epoch: usize,
    /// Optimizer steps taken up to that epoch.
    pub step: u64,
    /// Monitored validation metric at that epoch.
    pub best_metric: Option<f64>,
    /// Name of the monitored metric.
    pub monitor: String,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub config: ModelConfig,
    pub state: ModelState<f32>,
    /// First and second Adam moments, if saved.
    pub moments: Option<(ModelState<f32>, ModelState<f32>)>,
    pub metadata: CheckpointMeta,
}

impl Checkpoint {
    pub fn new(config: ModelConfig, state: &ModelState<f64>, moments: Option<&AdamMoments>, metadata: CheckpointMeta) -> Self {
        Self {
            config,
            state: state.cast(),
            moments: moments.map(|m| (m.m.cast(), m.v.cast())),
            metadata,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
    dtype: String,
    /// Byte offset from the start of the blob section.
    offset: u64,
    /// Number of values.
    len: u64,
}

#[derive(Serialize, Deserialize)]
struct Header {
    config: ModelConfig,
    tensors: Vec<TensorEntry>,
    metadata: CheckpointMeta,
}

pub fn write_checkpoint<W: Write>(ckpt: &Checkpoint, mut w: W) -> Result<(), CheckpointError> {
    let mut named: Vec<(String, &Tensor<f32>)> = ckpt.state.iter().map(|(n, t)| (n.to_string(), t)).collect();
    if let Some((m, v)) = &ckpt.moments {
        named.extend(m.iter().map(|(n, t)| (format!("{MOMENT_M}{n}"), t)));
        named.extend(v.iter().map(|(n, t)| (format!("{MOMENT_V}{n}"), t)));
    }
    let mut offset = 0u64;
    let tensors = named
        .iter()
        .map(|(name, t)| {
            let entry = TensorEntry {
                name: name.clone(),
                shape: t.shape().to_vec(),
                dtype: "f32".into(),
                offset,
                len: t.len() as u64,
            };
            offset += 4 * t.len() as u64;
            entry
        })
        .collect();
    let header = Header {
        config: ckpt.config.clone(),
        tensors,
        metadata: ckpt.metadata.clone(),
    };
    let json = serde_json::to_vec(&header).map_err(|e| CheckpointError::Header(e.to_string()))?;
    w.write_all(CHECKPOINT_MAGIC)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    w.write_all(&(json.len() as u64).to_le_bytes())?;
    w.write_all(&json)?;
    let mut buf = Vec::with_capacity(offset as usize);
    for (_, t) in &named {
        for v in t.data() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    w.write_all(&buf)?;
    Ok(())
}

fn read_exact_or_truncated<R: Read>(r: &mut R, buf: &mut [u8], what: &str) -> Result<(), CheckpointError> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => CheckpointError::TruncatedFile(format!("while reading {what}")),
        _ => CheckpointError::Io(e),
    })
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<Checkpoint, CheckpointError> {
    let mut magic = [0u8; 4];
    read_exact_or_truncated(&mut r, &mut magic, "magic")?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(CheckpointError::BadMagic(magic));
    }
    let mut word = [0u8; 4];
    read_exact_or_truncated(&mut r, &mut word, "version")?;
    let version = u32::from_le_bytes(word);
    if version != CHECKPOINT_VERSION {
        return Err(CheckpointError::VersionUnsupported(version));
    }
    let mut dword = [0u8; 8];
    read_exact_or_truncated(&mut r, &mut dword, "header length")?;
    let header_len = usize::try_from(u64::from_le_bytes(dword))
        .map_err(|_| CheckpointError::Header("header length overflows".into()))?;
    let mut json = Vec::new();
    r.by_ref().take(header_len as u64).read_to_end(&mut json)?;
    if json.len() != header_len {
        return Err(CheckpointError::TruncatedFile(format!(
            "header declares {header_len} bytes, found {}",
            json.len()
        )));
    }
    let header: Header = serde_json::from_slice(&json).map_err(|e| CheckpointError::Header(e.to_string()))?;
    let mut blobs = Vec::new();
    r.read_to_end(&mut blobs)?;

    let declared: u64 = header.tensors.iter().map(|t| 4 * t.len).sum();
    if declared != blobs.len() as u64 {
        return Err(CheckpointError::TruncatedFile(format!(
            "header describes {declared} blob bytes, file holds {}",
            blobs.len()
        )));
    }
    let mut state = BTreeMap::new();
    let mut m = BTreeMap::new();
    let mut v = BTreeMap::new();
    for entry in header.tensors {
        if entry.dtype != "f32" {
            return Err(CheckpointError::Header(format!("{}: dtype {} unsupported", entry.name, entry.dtype)));
        }
        let start = entry.offset as usize;
        let end = start + 4 * entry.len as usize;
        let bytes = blobs
            .get(start..end)
            .ok_or_else(|| CheckpointError::TruncatedFile(format!("{} lies outside the blob section", entry.name)))?;
        let data = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        let t = Tensor::new(entry.shape, data).map_err(|e| CheckpointError::ShapeMismatch(format!("{}: {e}", entry.name)))?;
        let (map, name) = if let Some(n) = entry.name.strip_prefix(MOMENT_M) {
            (&mut m, n.to_string())
        } else if let Some(n) = entry.name.strip_prefix(MOMENT_V) {
            (&mut v, n.to_string())
        } else {
            (&mut state, entry.name.clone())
        };
        if map.insert(name, t).is_some() {
            return Err(CheckpointError::Header(format!("tensor {} appears twice", entry.name)));
        }
    }
    let config = header.config;
    config.validate().map_err(|e| CheckpointError::Header(e.to_string()))?;
    let state = ModelState::from_tensors(&config, state)?;
    let moments = match (m.is_empty(), v.is_empty()) {
        (true, true) => None,
        _ => Some((ModelState::from_tensors(&config, m)?, ModelState::from_tensors(&config, v)?)),
    };
    Ok(Checkpoint {
        config,
        state,
        moments,
        metadata: header.metadata,
    })
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: &Path) -> Result<(), CheckpointError> {
    crate::fsutil::write_atomic_with(path, |f| {
        let mut w = std::io::BufWriter::new(f);
        write_checkpoint(ckpt, &mut w)?;
        w.flush()?;
        Ok(())
    })
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, CheckpointError> {
    read_checkpoint(std::io::BufReader::new(std::fs::File::open(path)?))
}
