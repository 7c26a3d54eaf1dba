//! Versioned binary container for model weights.
//!
//! Layout (little endian): magic `DGCK`, format version `u32`, metadata
//! length `u64`, metadata JSON, tensor count `u64`, then per tensor the
//! name (`u32` length + UTF-8), rank `u32`, dims `u64 × rank` and values as
//! `f64`. Values round-trip bit for bit.

use std::fs;
use std::io::{Cursor, Read};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::autodiff::{NumArray, ParamSet};
use crate::corpus::Vocabulary;
use crate::discriminator::{Discriminator, DiscriminatorConfig, Role};
use crate::error::{Error, Result};
use crate::generator::{Generator, GeneratorConfig};

const MAGIC: &[u8; 4] = b"DGCK";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelMeta {
    Generator {
        config: GeneratorConfig,
    },
    Discriminator {
        config: DiscriminatorConfig,
        role: Role,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub model: ModelMeta,
    pub vocab_fingerprint: String,
    /// Stored so a classifier checkpoint is usable on its own.
    pub vocabulary: Option<Vocabulary>,
}

fn format_err(path: &Path, msg: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        msg: msg.into(),
    }
}

pub fn encode(meta: &CheckpointMeta, params: &ParamSet) -> Vec<u8> {
    let meta_json = serde_json::to_vec(meta).expect("checkpoint metadata serializes");
    let mut out = Vec::with_capacity(64 + meta_json.len() + 8 * params.num_scalars());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(meta_json.len() as u64).to_le_bytes());
    out.extend_from_slice(&meta_json);
    out.extend_from_slice(&(params.len() as u64).to_le_bytes());
    for (_, name, value) in params.iter() {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(value.shape().len() as u32).to_le_bytes());
        for &d in value.shape() {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for v in value.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    inner: Cursor<&'a [u8]>,
    path: &'a Path,
}

impl Reader<'_> {
    fn bytes(&mut self, n: usize) -> Result<Vec<u8>> {
        let remaining = self.inner.get_ref().len() - self.inner.position() as usize;
        if n > remaining {
            return Err(format_err(self.path, "truncated checkpoint"));
        }
        let mut buf = vec![0u8; n];
        self.inner
            .read_exact(&mut buf)
            .map_err(|_| format_err(self.path, "truncated checkpoint"))?;
        Ok(buf)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.bytes(8)?.try_into().expect("8 bytes")))
    }

    fn len(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| format_err(self.path, "length overflow"))
    }
}

pub fn decode(bytes: &[u8], path: &Path) -> Result<(CheckpointMeta, ParamSet)> {
    let mut r = Reader {
        inner: Cursor::new(bytes),
        path,
    };
    if r.bytes(4)? != MAGIC {
        return Err(format_err(path, "not a checkpoint file"));
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(format_err(path, format!("unsupported format version {version}")));
    }
    let meta_len = r.len()?;
    let meta: CheckpointMeta = serde_json::from_slice(&r.bytes(meta_len)?)
        .map_err(|e| format_err(path, format!("metadata: {e}")))?;
    let count = r.len()?;
    let mut params = ParamSet::new();
    for _ in 0..count {
        let name_len = r.u32()? as usize;
        let name = String::from_utf8(r.bytes(name_len)?).map_err(|_| format_err(path, "tensor name is not UTF-8"))?;
        let rank = r.u32()? as usize;
        let shape = (0..rank).map(|_| r.len()).collect::<Result<Vec<_>>>()?;
        let n = shape
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| format_err(path, "tensor size overflow"))?;
        let raw = r.bytes(n.checked_mul(8).ok_or_else(|| format_err(path, "tensor size overflow"))?)?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        params.add(name, NumArray::new(shape, data)?);
    }
    if (r.inner.position() as usize) != bytes.len() {
        return Err(format_err(path, "trailing bytes after last tensor"));
    }
    Ok((meta, params))
}

/// Writes through a temporary sibling and renames, so a failed write never
/// leaves a partial file at `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".partial");
    let tmp = std::path::PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::io(path, e)
    })
}

fn read(path: &Path) -> Result<(CheckpointMeta, ParamSet)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes, path)
}

pub fn save_generator(path: &Path, g: &Generator, vocab: &Vocabulary) -> Result<()> {
    let meta = CheckpointMeta {
        model: ModelMeta::Generator {
            config: g.config().clone(),
        },
        vocab_fingerprint: vocab.fingerprint(),
        vocabulary: Some(vocab.clone()),
    };
    write_atomic(path, &encode(&meta, g.params()))
}

pub fn save_discriminator(path: &Path, d: &Discriminator, vocab: &Vocabulary) -> Result<()> {
    let meta = CheckpointMeta {
        model: ModelMeta::Discriminator {
            config: d.config().clone(),
            role: d.role(),
        },
        vocab_fingerprint: vocab.fingerprint(),
        vocabulary: Some(vocab.clone()),
    };
    write_atomic(path, &encode(&meta, d.params()))
}

pub fn load_generator(path: &Path) -> Result<(Generator, CheckpointMeta)> {
    let (meta, params) = read(path)?;
    match &meta.model {
        ModelMeta::Generator { config } => Ok((Generator::from_parts(config.clone(), params)?, meta)),
        _ => Err(format_err(path, "checkpoint does not hold a generator")),
    }
}

pub fn load_discriminator(path: &Path) -> Result<(Discriminator, CheckpointMeta)> {
    let (meta, params) = read(path)?;
    match &meta.model {
        ModelMeta::Discriminator { config, role } => {
            Ok((Discriminator::from_parts(config.clone(), *role, params)?, meta))
        }
        _ => Err(format_err(path, "checkpoint does not hold a discriminator")),
    }
}
