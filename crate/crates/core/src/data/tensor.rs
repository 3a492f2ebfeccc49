//! Native persistence: a 16-byte header `{"MISC", u32 N, u32 D, u32 flags}`
//! followed by `N·D` little-endian f64 values, plus a JSON sidecar at
//! `<path>.json` carrying the grid shape and free-form metadata.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Dataset, GridShape, Modality};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"MISC";
const HEADER: usize = 16;
const FLAG_GRID: u32 = 1 << 2;
const FLAG_EMBED: u32 = 1 << 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Descriptor {
    pub n: usize,
    pub d: usize,
    pub modality: Modality,
    pub grid_shape: Option<GridShape>,
    pub embed_dim: Option<usize>,
    #[serde(default)]
    pub metadata: serde_json::Value,
}

impl Descriptor {
    pub fn of(ds: &Dataset, metadata: serde_json::Value) -> Self {
        Self {
            n: ds.n(),
            d: ds.d(),
            modality: ds.modality(),
            grid_shape: ds.grid(),
            embed_dim: ds.embed_dim(),
            metadata,
        }
    }
}

fn modality_code(m: Modality) -> u32 {
    match m {
        Modality::Image => 0,
        Modality::TextEmbedding => 1,
        Modality::CategoricalSynthetic => 2,
    }
}

fn sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub fn write_raw_bytes(ds: &Dataset) -> Vec<u8> {
    let mut flags = modality_code(ds.modality());
    if ds.grid().is_some() {
        flags |= FLAG_GRID;
    }
    if ds.embed_dim().is_some() {
        flags |= FLAG_EMBED;
    }
    let mut out = Vec::with_capacity(HEADER + 8 * ds.values().len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(ds.n() as u32).to_le_bytes());
    out.extend_from_slice(&(ds.d() as u32).to_le_bytes());
    out.extend_from_slice(&flags.to_le_bytes());
    for v in ds.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

/// Decodes the binary payload. Geometry comes from `descriptor` when given;
/// otherwise only the modality recorded in the flags survives.
pub fn read_raw_bytes(bytes: &[u8], descriptor: Option<&Descriptor>) -> Result<Dataset> {
    if bytes.len() < HEADER || &bytes[..4] != MAGIC {
        return Err(Error::Format("missing MISC header".into()));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
    let (n, d, flags) = (word(4) as usize, word(8) as usize, word(12));
    let expected = HEADER + 8 * n * d;
    if bytes.len() != expected {
        return Err(Error::Length { expected, found: bytes.len() });
    }
    let values = bytes[HEADER..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let modality = match flags & 0b11 {
        0 => Modality::Image,
        1 => Modality::TextEmbedding,
        2 => Modality::CategoricalSynthetic,
        c => return Err(Error::Format(format!("unknown modality code {c}"))),
    };
    let (grid, embed) = match descriptor {
        Some(desc) => {
            if desc.n != n || desc.d != d || desc.modality != modality {
                return Err(Error::Format("descriptor disagrees with tensor header".into()));
            }
            (desc.grid_shape, desc.embed_dim)
        }
        None if flags & (FLAG_GRID | FLAG_EMBED) != 0 => {
            return Err(Error::Format("tensor has geometry but no descriptor".into()))
        }
        None => (None, None),
    };
    Dataset::new(n, d, values, grid, modality, embed)
}

pub fn write_raw(path: impl AsRef<Path>, ds: &Dataset, metadata: serde_json::Value) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, write_raw_bytes(ds))?;
    let desc = Descriptor::of(ds, metadata);
    fs::write(sidecar(path), serde_json::to_string_pretty(&desc)? + "\n")?;
    Ok(())
}

/// Reads a tensor and its sidecar (if present).
pub fn read_raw(path: impl AsRef<Path>) -> Result<(Dataset, Option<Descriptor>)> {
    let path = path.as_ref();
    let bytes = fs::read(path)?;
    let desc: Option<Descriptor> = match fs::read_to_string(sidecar(path)) {
        Ok(s) => Some(serde_json::from_str(&s)?),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => None,
        Err(e) => return Err(e.into()),
    };
    Ok((read_raw_bytes(&bytes, desc.as_ref())?, desc))
}

/// Header `x0,x1,...` then one sample per line.
pub fn write_csv<W: Write>(ds: &Dataset, mut out: W) -> Result<()> {
    let header: Vec<String> = (0..ds.d()).map(|j| format!("x{j}")).collect();
    writeln!(out, "{}", header.join(","))?;
    for row in ds.rows() {
        let line: Vec<String> = row.iter().map(f64::to_string).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn file_round_trip_keeps_grid() {
        let ds = Dataset::new(
            2,
            6,
            (0..12).map(|i| i as f64 / 7.0).collect(),
            Some(GridShape::new(2, 3, 1)),
            Modality::Image,
            None,
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.misc");
        write_raw(&path, &ds, serde_json::json!({"oracle": 1.5})).unwrap();
        let (back, desc) = read_raw(&path).unwrap();
        assert_eq!(back, ds);
        assert_eq!(desc.unwrap().metadata["oracle"], 1.5);
    }

    #[test]
    fn csv_has_header() {
        let ds = Dataset::from_rows(&[vec![1.0, 0.5]], Modality::Image).unwrap();
        let mut buf = Vec::new();
        write_csv(&ds, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "x0,x1\n1,0.5\n");
    }

    #[test]
    fn bad_header_and_length() {
        assert!(matches!(read_raw_bytes(b"NOPE", None), Err(Error::Format(_))));
        let ds = Dataset::from_rows(&[vec![1.0]], Modality::Image).unwrap();
        let bytes = write_raw_bytes(&ds);
        assert!(matches!(read_raw_bytes(&bytes[..20], None), Err(Error::Length { .. })));
    }

    proptest! {
        #[test]
        fn bytes_round_trip_bit_exact(
            n in 1usize..5,
            d in 1usize..6,
            seed in proptest::collection::vec(-1e300f64..1e300, 30),
        ) {
            let values: Vec<f64> = seed.iter().cycle().take(n * d).copied().collect();
            let ds = Dataset::new(n, d, values, None, Modality::CategoricalSynthetic, None).unwrap();
            let back = read_raw_bytes(&write_raw_bytes(&ds), None).unwrap();
            prop_assert_eq!(
                back.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                ds.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>()
            );
        }
    }
}
