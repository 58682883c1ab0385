//! `model.crtx`: a versioned, checksummed model container.
//!
//! ```text
//! magic      8 bytes  "CRTXMODL"
//! version    u32 LE
//! total_len  u64 LE   length of the whole file
//! header     u32 LE length + UTF-8 TOML
//! sections   u32 LE count, then per area: u64 LE length + bincode area
//! configs    u64 LE length + bincode map of area configs
//! crc32      u32 LE   over every preceding byte
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use crtx_core::cortex::{AssociationArea, CortexModel};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MAGIC: &[u8; 8] = b"CRTXMODL";
pub const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ContainerError {
    #[error("not a model file: bad magic")]
    BadMagic,
    #[error("unsupported format version {found} (this build reads {supported})")]
    Version { found: u32, supported: u32 },
    #[error("truncated: expected {expected} bytes, found {found}")]
    Truncated { expected: u64, found: u64 },
    #[error("checksum mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    Checksum { stored: u32, computed: u32 },
    #[error("malformed {what} at byte {offset}")]
    Malformed { what: &'static str, offset: usize },
    #[error("decoding {what}: {detail}")]
    Decode { what: &'static str, detail: String },
    #[error("model is invalid: {0}")]
    Invalid(#[from] crtx_core::cortex::CortexError),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

/// Human-readable part of the container.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub format_version: u32,
    /// Decimal; TOML integers stop at `i64::MAX`.
    #[serde(with = "decimal")]
    pub seed: u64,
    pub areas: Vec<String>,
    /// Experiment config the model was trained from, as TOML.
    #[serde(default)]
    pub config: String,
}

mod decimal {
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &u64, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&v.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<u64, D::Error> {
        String::deserialize(d)?.parse().map_err(D::Error::custom)
    }
}

fn put_len32(out: &mut Vec<u8>, n: usize) {
    out.extend_from_slice(&u32::try_from(n).expect("length fits u32").to_le_bytes());
}

pub fn encode(model: &CortexModel, config_toml: &str) -> Vec<u8> {
    let header = Header {
        format_version: VERSION,
        seed: model.seed,
        areas: model.areas.keys().map(|k| k.to_string()).collect(),
        config: config_toml.to_string(),
    };
    let header = toml::to_string(&header).expect("header serializes");
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&0u64.to_le_bytes()); // patched below
    put_len32(&mut out, header.len());
    out.extend_from_slice(header.as_bytes());
    put_len32(&mut out, model.areas.len());
    for area in model.areas.values() {
        let bytes = bincode::serialize(area).expect("area serializes");
        out.extend_from_slice(&(bytes.len() as u64).to_le_bytes());
        out.extend_from_slice(&bytes);
    }
    let configs = bincode::serialize(&model.configs).expect("configs serialize");
    out.extend_from_slice(&(configs.len() as u64).to_le_bytes());
    out.extend_from_slice(&configs);
    let total = (out.len() + 4) as u64;
    out[12..20].copy_from_slice(&total.to_le_bytes());
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8], ContainerError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or(ContainerError::Malformed { what, offset: self.pos })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self, what: &'static str) -> Result<u32, ContainerError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &'static str) -> Result<u64, ContainerError> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
}

/// Checks magic, version, length and checksum before decoding anything.
pub fn decode(bytes: &[u8]) -> Result<(Header, CortexModel), ContainerError> {
    if bytes.len() < 8 || &bytes[..8] != MAGIC {
        return Err(ContainerError::BadMagic);
    }
    let mut r = Reader { bytes, pos: 8 };
    let version =
        r.u32("version").map_err(|_| ContainerError::Truncated { expected: 12, found: bytes.len() as u64 })?;
    if version != VERSION {
        return Err(ContainerError::Version { found: version, supported: VERSION });
    }
    let total = r.u64("length").map_err(|_| ContainerError::Truncated { expected: 20, found: bytes.len() as u64 })?;
    if (bytes.len() as u64) < total {
        return Err(ContainerError::Truncated { expected: total, found: bytes.len() as u64 });
    }
    if bytes.len() as u64 != total || total < 24 {
        return Err(ContainerError::Malformed { what: "file length", offset: 12 });
    }
    let body = &bytes[..bytes.len() - 4];
    let stored = u32::from_le_bytes(bytes[bytes.len() - 4..].try_into().unwrap());
    let computed = crc32fast::hash(body);
    if stored != computed {
        return Err(ContainerError::Checksum { stored, computed });
    }

    let mut r = Reader { bytes: body, pos: 20 };
    let hlen = r.u32("header length")? as usize;
    let htext = std::str::from_utf8(r.take(hlen, "header")?)
        .map_err(|e| ContainerError::Decode { what: "header", detail: e.to_string() })?;
    let header: Header =
        toml::from_str(htext).map_err(|e| ContainerError::Decode { what: "header", detail: e.to_string() })?;
    let count = r.u32("section count")? as usize;
    let mut areas = BTreeMap::new();
    for _ in 0..count {
        let len = r.u64("section length")? as usize;
        let area: AssociationArea = bincode::deserialize(r.take(len, "area section")?)
            .map_err(|e| ContainerError::Decode { what: "area section", detail: e.to_string() })?;
        areas.insert(area.key.clone(), area);
    }
    let len = r.u64("configs length")? as usize;
    let configs = bincode::deserialize(r.take(len, "configs")?)
        .map_err(|e| ContainerError::Decode { what: "configs", detail: e.to_string() })?;
    if r.pos != body.len() {
        return Err(ContainerError::Malformed { what: "trailing data", offset: r.pos });
    }
    let model = CortexModel { areas, configs, seed: header.seed }.restore()?;
    Ok((header, model))
}

pub fn save_model(model: &CortexModel, config_toml: &str, path: &Path) -> Result<(), ContainerError> {
    std::fs::write(path, encode(model, config_toml))
        .map_err(|source| ContainerError::Io { path: path.display().to_string(), source })
}

pub fn load_model(path: &Path) -> Result<(Header, CortexModel), ContainerError> {
    let bytes =
        std::fs::read(path).map_err(|source| ContainerError::Io { path: path.display().to_string(), source })?;
    decode(&bytes)
}
