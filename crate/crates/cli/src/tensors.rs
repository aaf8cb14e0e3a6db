//! Flat binary tensor files: an 8-byte little-endian header length, a JSON
//! header describing every tensor, then the raw little-endian float64 data.

use std::path::Path;

use csd_core::adapter::Tensor;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::files::{read_bytes, write_bytes};

pub const DTYPE: &str = "float64";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    /// Byte offset of the first element, relative to the start of the data.
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorHeader {
    pub dtype: String,
    pub tensors: Vec<TensorEntry>,
}

pub fn encode_tensors(tensors: &[Tensor]) -> Vec<u8> {
    let mut offset = 0;
    let entries = tensors
        .iter()
        .map(|t| {
            let e = TensorEntry { name: t.name.clone(), shape: t.shape.clone(), offset };
            offset += t.data.len() * 8;
            e
        })
        .collect();
    let header = serde_json::to_vec(&TensorHeader { dtype: DTYPE.into(), tensors: entries }).expect("header serializes");
    let mut out = Vec::with_capacity(8 + header.len() + offset);
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(&header);
    for t in tensors {
        for v in &t.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

fn format_error(path: &Path, offset: usize, message: impl Into<String>) -> CliError {
    CliError::Format { path: path.to_path_buf(), offset: offset as u64, message: message.into() }
}

pub fn decode_tensors(bytes: &[u8], path: &Path) -> Result<Vec<Tensor>> {
    let Some(len) = bytes.get(..8) else {
        return Err(format_error(path, 0, "file shorter than the header length"));
    };
    let len = u64::from_le_bytes(len.try_into().expect("8 bytes")) as usize;
    let Some(raw) = bytes.get(8..8usize.saturating_add(len)) else {
        return Err(format_error(path, 8, format!("header of {len} bytes runs past the end of file")));
    };
    let header: TensorHeader = serde_json::from_slice(raw).map_err(|e| format_error(path, 8 + e.column(), e.to_string()))?;
    if header.dtype != DTYPE {
        return Err(format_error(path, 8, format!("unsupported dtype {}", header.dtype)));
    }
    let data = &bytes[8 + len..];
    let mut end = 0;
    let mut out = Vec::with_capacity(header.tensors.len());
    for e in header.tensors {
        let count: usize = e.shape.iter().product();
        let span = e.offset..e.offset + count * 8;
        let Some(chunk) = data.get(span.clone()) else {
            return Err(format_error(path, 8 + len + e.offset, format!("tensor {} runs past the end of file", e.name)));
        };
        end = end.max(span.end);
        let values = chunk.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
        out.push(Tensor { name: e.name, shape: e.shape, data: values });
    }
    if end != data.len() {
        return Err(format_error(path, 8 + len + end, "trailing bytes after the last tensor"));
    }
    Ok(out)
}

pub fn write_tensors(path: &Path, tensors: &[Tensor]) -> Result<()> {
    write_bytes(path, &encode_tensors(tensors))
}

pub fn read_tensors(path: &Path) -> Result<Vec<Tensor>> {
    decode_tensors(&read_bytes(path)?, path)
}
