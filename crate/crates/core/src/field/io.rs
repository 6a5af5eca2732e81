//! LPDF binary field format.
//!
//! ```text
//! offset  size  content
//! 0       4     magic "LPDF"
//! 4       4     nx   (u32 LE)
//! 8       4     ny   (u32 LE)
//! 12      4     reserved, zero (u32 LE)
//! 16      8*n   values, f64 LE, row-major (j*nx + i)
//! ```
//!
//! The header carries no extents; the caller supplies the grid.

use std::fs;
use std::path::Path;

use super::{Grid, ScalarField};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"LPDF";
pub const HEADER_LEN: usize = 16;

pub fn encode_field(field: &ScalarField) -> Vec<u8> {
    let g = field.grid();
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * g.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(g.nx as u32).to_le_bytes());
    out.extend_from_slice(&(g.ny as u32).to_le_bytes());
    out.extend_from_slice(&0u32.to_le_bytes());
    for v in field.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

/// Decodes header and payload; returns `(nx, ny, values)`.
pub fn decode_raw(bytes: &[u8]) -> Result<(usize, usize, Vec<f64>)> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::format(bytes.len(), "truncated LPDF header"));
    }
    if &bytes[0..4] != MAGIC {
        return Err(Error::format(0, "bad LPDF magic"));
    }
    let word = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as usize;
    let (nx, ny) = (word(4), word(8));
    if word(12) != 0 {
        return Err(Error::format(12, "reserved LPDF word is not zero"));
    }
    let n = nx
        .checked_mul(ny)
        .ok_or_else(|| Error::format(4, "LPDF dimensions overflow"))?;
    let expected = HEADER_LEN + 8 * n;
    if bytes.len() != expected {
        return Err(Error::format(
            bytes.len().min(expected),
            format!("LPDF payload is {} bytes, expected {}", bytes.len() - HEADER_LEN, 8 * n),
        ));
    }
    let values = bytes[HEADER_LEN..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((nx, ny, values))
}

/// Decodes onto `grid`, which must have the recorded resolution.
pub fn decode_field(bytes: &[u8], grid: &Grid) -> Result<ScalarField> {
    let (nx, ny, values) = decode_raw(bytes)?;
    if nx != grid.nx || ny != grid.ny {
        return Err(Error::Dimension(format!(
            "file is {nx}x{ny}, expected {}x{}",
            grid.nx, grid.ny
        )));
    }
    ScalarField::new(*grid, values)
}

pub fn write_field(path: impl AsRef<Path>, field: &ScalarField) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_field(field)).map_err(|e| Error::io(path, e))
}

pub fn read_field(path: impl AsRef<Path>, grid: &Grid) -> Result<ScalarField> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_field(&bytes, grid)
}
