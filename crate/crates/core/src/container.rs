//! Shared binary layout for sequence bundles and checkpoints:
//!
//! ```text
//! magic      4 bytes
//! version    u32 LE
//! header_len u32 LE
//! header     UTF-8 JSON: { "meta": ..., "arrays": [{ "name", "shape", "offset" }] }
//! payload    f32 LE values; `offset` counts bytes from the payload start
//! ```

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Array;

#[derive(Debug, Serialize, Deserialize)]
struct ArrayEntry {
    name: String,
    shape: Vec<usize>,
    offset: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header<M> {
    meta: M,
    arrays: Vec<ArrayEntry>,
}

pub(crate) fn encode<M: Serialize>(magic: &[u8; 4], version: u32, meta: &M, arrays: &[(&str, &Array<f32>)]) -> Vec<u8> {
    let mut offset = 0;
    let entries = arrays
        .iter()
        .map(|(name, a)| {
            let e = ArrayEntry {
                name: name.to_string(),
                shape: a.shape().to_vec(),
                offset,
            };
            offset += a.len() * 4;
            e
        })
        .collect();
    let header = serde_json::to_vec(&Header { meta, arrays: entries }).expect("header serializes");
    let mut out = Vec::with_capacity(12 + header.len() + offset);
    out.extend_from_slice(magic);
    out.extend_from_slice(&version.to_le_bytes());
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(&header);
    for (_, a) in arrays {
        for v in a.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub(crate) fn decode<M: DeserializeOwned>(
    bytes: &[u8],
    magic: &[u8; 4],
    version: u32,
) -> Result<(M, Vec<(String, Array<f32>)>)> {
    if bytes.len() < 12 {
        return Err(Error::Corrupt(format!("{} bytes is shorter than the fixed header", bytes.len())));
    }
    if &bytes[..4] != magic {
        return Err(Error::Corrupt(format!(
            "bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(&bytes[..4]),
            String::from_utf8_lossy(magic)
        )));
    }
    let found = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if found != version {
        return Err(Error::Version { found, expected: version });
    }
    let header_len = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let payload_start = 12usize
        .checked_add(header_len)
        .filter(|&e| e <= bytes.len())
        .ok_or_else(|| Error::Corrupt("header extends past end of file".into()))?;
    let header: Header<M> = serde_json::from_slice(&bytes[12..payload_start])
        .map_err(|e| Error::Corrupt(format!("unreadable header: {e}")))?;
    let payload = &bytes[payload_start..];
    let mut expected_end = 0;
    let mut arrays = Vec::with_capacity(header.arrays.len());
    for e in header.arrays {
        let n: usize = e.shape.iter().product();
        let end = e.offset + n * 4;
        if e.offset != expected_end || end > payload.len() {
            return Err(Error::Corrupt(format!(
                "array {} at byte {} (+{}) does not fit a {}-byte payload",
                e.name,
                e.offset,
                n * 4,
                payload.len()
            )));
        }
        let data = payload[e.offset..end]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        arrays.push((e.name, Array::from_vec(&e.shape, data)?));
        expected_end = end;
    }
    if expected_end != payload.len() {
        return Err(Error::Corrupt(format!(
            "{} trailing payload bytes",
            payload.len() - expected_end
        )));
    }
    Ok((header.meta, arrays))
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub(crate) fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}
