//! Checkpoint layout (little-endian):
//!
//! ```text
//! "LPCK" | u32 version | u32 header_len | u32 crc32(header) | header JSON | f64 payload
//! ```
//!
//! The JSON header records the architecture, init seed, parameter count and
//! the CRC32 of the payload bytes.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::{Architecture, Model};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"LPCK";
const VERSION: u32 = 1;
const PREFIX: usize = 16;

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    architecture: Architecture,
    init_seed: u64,
    n_params: usize,
    payload_crc32: u32,
}

pub fn encode_checkpoint(model: &Model) -> Vec<u8> {
    let mut payload = Vec::with_capacity(8 * model.n_params());
    for v in model.params() {
        payload.extend_from_slice(&v.to_le_bytes());
    }
    let header = Header {
        architecture: model.architecture().clone(),
        init_seed: model.init_seed(),
        n_params: model.n_params(),
        payload_crc32: crc32fast::hash(&payload),
    };
    let header = serde_json::to_vec(&header).expect("header serializes");
    let mut out = Vec::with_capacity(PREFIX + header.len() + payload.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(&crc32fast::hash(&header).to_le_bytes());
    out.extend_from_slice(&header);
    out.extend_from_slice(&payload);
    out
}

fn u32_at(bytes: &[u8], offset: usize) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_le_bytes(b.try_into().expect("4 bytes")))
        .ok_or_else(|| Error::format(offset, "truncated checkpoint prefix"))
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Model> {
    if bytes.get(..4) != Some(MAGIC.as_slice()) {
        return Err(Error::format(0, "not a checkpoint (bad magic)"));
    }
    let version = u32_at(bytes, 4)?;
    if version != VERSION {
        return Err(Error::format(4, format!("unsupported checkpoint version {version}")));
    }
    let header_len = u32_at(bytes, 8)? as usize;
    let header_crc = u32_at(bytes, 12)?;
    let header_bytes = bytes
        .get(PREFIX..PREFIX + header_len)
        .ok_or_else(|| Error::format(PREFIX, "truncated checkpoint header"))?;
    if crc32fast::hash(header_bytes) != header_crc {
        return Err(Error::format(PREFIX, "checkpoint header checksum mismatch"));
    }
    let header: Header = serde_json::from_slice(header_bytes)
        .map_err(|e| Error::format(PREFIX, format!("invalid checkpoint header: {e}")))?;
    let start = PREFIX + header_len;
    let payload = &bytes[start..];
    if payload.len() != 8 * header.n_params {
        return Err(Error::format(
            start,
            format!(
                "payload holds {} bytes, header declares {} parameters",
                payload.len(),
                header.n_params
            ),
        ));
    }
    if crc32fast::hash(payload) != header.payload_crc32 {
        return Err(Error::format(start, "checkpoint payload checksum mismatch"));
    }
    let params = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Model::from_parts(header.architecture, header.init_seed, params)
        .map_err(|e| Error::format(PREFIX, format!("header inconsistent with payload: {e}")))
}

pub fn save_checkpoint(model: &Model, path: &Path) -> Result<()> {
    std::fs::write(path, encode_checkpoint(model)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Model> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes)
}
