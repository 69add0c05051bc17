//! AAWF tensor container.
//!
//! Layout:
//!
//! ```text
//! [0..8)    magic "AAWF0001"
//! [8..16)   u64 LE header length H
//! [16..16+H) UTF-8 JSON header
//! zero padding up to the next 64-byte boundary (start of the data section)
//! tensor data, little-endian row-major f32; each tensor's `byte_offset`
//! is relative to the data section and 64-byte aligned
//! ```
//!
//! The header carries `format_version`, `kind`, the tensor records
//! `{name, shape, dtype, byte_offset, crc32}` and any kind-specific fields
//! (model config, steering-vector metadata).

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const MAGIC_PREFIX: &[u8; 4] = b"AAWF";
pub const MAGIC: &[u8; 8] = b"AAWF0001";
pub const FORMAT_VERSION: u32 = 1;
pub const ALIGN: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorRecord {
    pub name: String,
    pub shape: Vec<usize>,
    pub dtype: String,
    pub byte_offset: u64,
    pub crc32: u32,
}

impl TensorRecord {
    pub fn numel(&self) -> usize {
        self.shape.iter().product()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Header {
    format_version: u32,
    kind: String,
    #[serde(flatten)]
    extra: Map<String, Value>,
    tensors: Vec<TensorRecord>,
}

/// A fully loaded, checksum-verified container.
#[derive(Debug, Clone)]
pub struct Container {
    pub kind: String,
    /// Kind-specific header fields (everything except version, kind, tensors).
    pub extra: Map<String, Value>,
    pub tensors: Vec<(TensorRecord, Vec<f32>)>,
    /// Hex SHA-256 of the whole file.
    pub file_hash: String,
}

impl Container {
    pub fn tensor(&self, name: &str) -> Option<&(TensorRecord, Vec<f32>)> {
        self.tensors.iter().find(|(r, _)| r.name == name)
    }

    /// Remove and return a tensor's data after checking its shape.
    pub fn take(&mut self, name: &str, shape: &[usize]) -> Result<Vec<f32>> {
        let idx = self
            .tensors
            .iter()
            .position(|(r, _)| r.name == name)
            .ok_or_else(|| Error::Format(format!("missing tensor `{name}`")))?;
        let (record, data) = self.tensors.swap_remove(idx);
        if record.shape != shape {
            return Err(Error::Format(format!(
                "shape mismatch for `{name}`: file has {:?}, config expects {shape:?}",
                record.shape
            )));
        }
        Ok(data)
    }
}

fn align_up(n: usize) -> usize {
    n.div_ceil(ALIGN) * ALIGN
}

/// Serialize a container to bytes.
pub fn to_bytes(kind: &str, extra: Map<String, Value>, tensors: &[(&str, &[usize], &[f32])]) -> Result<Vec<u8>> {
    let mut records = Vec::with_capacity(tensors.len());
    let mut data = Vec::new();
    for (name, shape, values) in tensors {
        let numel: usize = shape.iter().product();
        if numel != values.len() {
            return Err(Error::Format(format!(
                "tensor `{name}` has {} values but shape {shape:?}",
                values.len()
            )));
        }
        let offset = data.len();
        for v in values.iter() {
            data.extend_from_slice(&v.to_le_bytes());
        }
        let crc = crc32fast::hash(&data[offset..]);
        data.resize(align_up(data.len()), 0);
        records.push(TensorRecord {
            name: name.to_string(),
            shape: shape.to_vec(),
            dtype: "f32".into(),
            byte_offset: offset as u64,
            crc32: crc,
        });
    }
    let header = Header {
        format_version: FORMAT_VERSION,
        kind: kind.to_string(),
        extra,
        tensors: records,
    };
    let header_bytes = serde_json::to_vec(&header)?;
    let mut out = Vec::with_capacity(align_up(16 + header_bytes.len()) + data.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(header_bytes.len() as u64).to_le_bytes());
    out.extend_from_slice(&header_bytes);
    out.resize(align_up(out.len()), 0);
    out.extend_from_slice(&data);
    Ok(out)
}

/// Write a container, going through a temporary file so a failed write
/// never leaves a partial file at `path`.
pub fn write(path: &Path, kind: &str, extra: Map<String, Value>, tensors: &[(&str, &[usize], &[f32])]) -> Result<()> {
    let bytes = to_bytes(kind, extra, tensors)?;
    let tmp = path.with_extension("aawf.partial");
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(&bytes).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    drop(f);
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn read(path: &Path) -> Result<Container> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(&bytes)
}

pub fn from_bytes(bytes: &[u8]) -> Result<Container> {
    if bytes.len() < 16 || &bytes[..4] != MAGIC_PREFIX {
        return Err(Error::Format("not an AAWF file (bad magic)".into()));
    }
    if &bytes[..8] != MAGIC {
        return Err(Error::Format(format!(
            "unsupported format version {:?}",
            String::from_utf8_lossy(&bytes[4..8])
        )));
    }
    let header_len = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
    let header_end = 16usize
        .checked_add(header_len)
        .filter(|&end| end <= bytes.len())
        .ok_or_else(|| Error::Format("header length exceeds file size".into()))?;
    let header: Header = serde_json::from_slice(&bytes[16..header_end])
        .map_err(|e| Error::Format(format!("malformed header: {e}")))?;
    if header.format_version != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "unsupported format version {}",
            header.format_version
        )));
    }
    let data_start = align_up(header_end);

    let mut tensors = Vec::with_capacity(header.tensors.len());
    for record in header.tensors {
        if record.dtype != "f32" {
            return Err(Error::Format(format!(
                "tensor `{}` has unsupported dtype {}",
                record.name, record.dtype
            )));
        }
        if record.byte_offset as usize % ALIGN != 0 {
            return Err(Error::Format(format!(
                "tensor `{}` offset {} is not {ALIGN}-byte aligned",
                record.name, record.byte_offset
            )));
        }
        let start = data_start.saturating_add(record.byte_offset as usize);
        let end = start.saturating_add(record.numel() * 4);
        let available = &bytes[start.min(bytes.len())..end.min(bytes.len())];
        let actual = crc32fast::hash(available);
        if end > bytes.len() || actual != record.crc32 {
            return Err(Error::Checksum {
                tensor: record.name.clone(),
                expected: record.crc32,
                actual,
            });
        }
        let values: Vec<f32> = available
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        tensors.push((record, values));
    }

    Ok(Container {
        kind: header.kind,
        extra: header.extra,
        tensors,
        file_hash: hex::encode(Sha256::digest(bytes)),
    })
}
