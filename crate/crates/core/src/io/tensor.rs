//! `OGNT` binary tensor files.
//!
//! ```text
//! offset  size        field
//! 0       4           magic "OGNT"
//! 4       2           version, u16 LE (= 1)
//! 6       1           dtype code (0 = f32 LE)
//! 7       1           ndim (1..=8)
//! 8       4 * ndim    dims, u32 LE each, outermost first
//! ...     4 * prod    payload, row-major f32 LE
//! ```

use std::fs;
use std::path::Path;

use ndarray::{ArrayD, ArrayViewD, IxDyn};
use thiserror::Error;

use crate::error::Result;

pub const MAGIC: [u8; 4] = *b"OGNT";
pub const VERSION: u16 = 1;
pub const DTYPE_F32: u8 = 0;
pub const MAX_RANK: u8 = 8;
const FIXED_HEADER: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TensorError {
    #[error("file too short for a tensor header ({0} bytes)")]
    TruncatedHeader(usize),
    #[error("bad magic {0:02x?}, expected \"OGNT\"")]
    BadMagic([u8; 4]),
    #[error("unsupported tensor version {0}")]
    UnsupportedVersion(u16),
    #[error("unsupported dtype code {0}")]
    UnsupportedDtype(u8),
    #[error("rank {0} outside 1..=8")]
    BadRank(u8),
    #[error("dimension product overflows")]
    DimOverflow,
    #[error("payload truncated: expected {expected} bytes, found {actual}")]
    TruncatedPayload { expected: usize, actual: usize },
    #[error("{0} trailing bytes after payload")]
    TrailingBytes(usize),
}

/// Serializes a row-major f32 array.
pub fn encode_tensor(t: ArrayViewD<f32>) -> std::result::Result<Vec<u8>, TensorError> {
    let ndim = t.ndim();
    if ndim == 0 || ndim > MAX_RANK as usize {
        return Err(TensorError::BadRank(ndim.min(255) as u8));
    }
    let mut out = Vec::with_capacity(FIXED_HEADER + 4 * ndim + 4 * t.len());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(DTYPE_F32);
    out.push(ndim as u8);
    for &d in t.shape() {
        let d = u32::try_from(d).map_err(|_| TensorError::DimOverflow)?;
        out.extend_from_slice(&d.to_le_bytes());
    }
    // `iter` walks in logical row-major order regardless of memory layout.
    for v in t.iter() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_tensor(bytes: &[u8]) -> std::result::Result<ArrayD<f32>, TensorError> {
    if bytes.len() < FIXED_HEADER {
        return Err(TensorError::TruncatedHeader(bytes.len()));
    }
    let magic: [u8; 4] = bytes[0..4].try_into().unwrap();
    if magic != MAGIC {
        return Err(TensorError::BadMagic(magic));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != VERSION {
        return Err(TensorError::UnsupportedVersion(version));
    }
    if bytes[6] != DTYPE_F32 {
        return Err(TensorError::UnsupportedDtype(bytes[6]));
    }
    let ndim = bytes[7];
    if ndim == 0 || ndim > MAX_RANK {
        return Err(TensorError::BadRank(ndim));
    }
    let header = FIXED_HEADER + 4 * ndim as usize;
    if bytes.len() < header {
        return Err(TensorError::TruncatedHeader(bytes.len()));
    }
    let dims: Vec<usize> = bytes[FIXED_HEADER..header]
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes(c.try_into().unwrap()) as usize)
        .collect();
    let count = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or(TensorError::DimOverflow)?;
    let expected = count.checked_mul(4).ok_or(TensorError::DimOverflow)?;
    let payload = &bytes[header..];
    if payload.len() < expected {
        return Err(TensorError::TruncatedPayload { expected, actual: payload.len() });
    }
    if payload.len() > expected {
        return Err(TensorError::TrailingBytes(payload.len() - expected));
    }
    let data: Vec<f32> = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(ArrayD::from_shape_vec(IxDyn(&dims), data).expect("length checked above"))
}

pub fn write_tensor(t: ArrayViewD<f32>, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_tensor(t)?)?;
    Ok(())
}

pub fn read_tensor(path: impl AsRef<Path>) -> Result<ArrayD<f32>> {
    let bytes = fs::read(path)?;
    Ok(decode_tensor(&bytes)?)
}
