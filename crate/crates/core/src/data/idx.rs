//! Reader and writer for the big-endian IDX tensor format used by the
//! MNIST family of image sets.

use std::fs;
use std::path::Path;

use super::{Dataset, GridShape, Modality};
use crate::error::{Error, Result};

const UBYTE: u8 = 0x08;

/// A decoded unsigned-byte IDX tensor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxTensor {
    pub dims: Vec<usize>,
    pub data: Vec<u8>,
}

pub fn read_idx(path: impl AsRef<Path>) -> Result<IdxTensor> {
    read_idx_bytes(&fs::read(path)?)
}

pub fn read_idx_bytes(bytes: &[u8]) -> Result<IdxTensor> {
    if bytes.len() < 4 {
        return Err(Error::Format(format!("{} bytes is too short for an IDX magic", bytes.len())));
    }
    if bytes[0] != 0 || bytes[1] != 0 {
        return Err(Error::Format(format!("bad IDX magic {:02x?}", &bytes[..4])));
    }
    if bytes[2] != UBYTE {
        return Err(Error::Format(format!("unsupported IDX element type 0x{:02x}", bytes[2])));
    }
    let rank = bytes[3] as usize;
    if rank == 0 {
        return Err(Error::Format("IDX tensor of rank 0".into()));
    }
    let header = 4 + 4 * rank;
    if bytes.len() < header {
        return Err(Error::Length { expected: header, found: bytes.len() });
    }
    let dims: Vec<usize> = bytes[4..header]
        .chunks_exact(4)
        .map(|c| u32::from_be_bytes([c[0], c[1], c[2], c[3]]) as usize)
        .collect();
    let payload: usize = dims.iter().product();
    if bytes.len() < header + payload {
        return Err(Error::Length { expected: header + payload, found: bytes.len() });
    }
    Ok(IdxTensor { dims, data: bytes[header..header + payload].to_vec() })
}

pub fn write_idx(tensor: &IdxTensor) -> Vec<u8> {
    let mut out = vec![0, 0, UBYTE, tensor.dims.len() as u8];
    for &d in &tensor.dims {
        out.extend_from_slice(&(d as u32).to_be_bytes());
    }
    out.extend_from_slice(&tensor.data);
    out
}

/// Loads an IDX file as a dataset. Rank-3 image stacks become `(H, W, 1)`
/// grids scaled to `[0, 1]`; rank-1 label files become a single raw
/// categorical coordinate.
pub fn ingest_idx(path: impl AsRef<Path>, limit: Option<usize>) -> Result<Dataset> {
    ingest_idx_bytes(&fs::read(path)?, limit)
}

pub fn ingest_idx_bytes(bytes: &[u8], limit: Option<usize>) -> Result<Dataset> {
    let t = read_idx_bytes(bytes)?;
    let count = t.dims[0];
    let n = limit.map_or(count, |l| l.min(count));
    match t.dims.len() {
        3 => {
            let (h, w) = (t.dims[1], t.dims[2]);
            let values = t.data[..n * h * w].iter().map(|&b| f64::from(b) / 255.0).collect();
            Dataset::new(n, h * w, values, Some(GridShape::new(h, w, 1)), Modality::Image, None)
        }
        1 => {
            let values = t.data[..n].iter().map(|&b| f64::from(b)).collect();
            Dataset::new(n, 1, values, None, Modality::CategoricalSynthetic, None)
        }
        r => Err(Error::Format(format!("expected a rank-1 or rank-3 IDX tensor, got rank {r}"))),
    }
}
