//! Datasets, partitions and the file formats they travel in.
//!
//! A [`Dataset`] is an immutable `N × D` matrix of finite reals together with
//! the geometry needed to cut it into complementary regions: an optional grid
//! shape `(H, W, C)` for images (coordinates stored row-major, channel last)
//! or a token width for embedded text (coordinates stored token-major).

mod augment;
mod idx;
mod partition;
mod tensor;
mod text;

pub use augment::{discretize, random_shift, shift_sample, DiscretizationSpec};
pub use idx::{ingest_idx, ingest_idx_bytes, read_idx, read_idx_bytes, write_idx, IdxTensor};
pub use partition::{make_partition, Family, Partition};
pub use tensor::{read_raw, read_raw_bytes, write_csv, write_raw, write_raw_bytes, Descriptor};
pub use text::{ingest_embedded_text, ingest_embedded_text_str, parse_embeddings, Embeddings};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    Image,
    TextEmbedding,
    CategoricalSynthetic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridShape {
    pub h: usize,
    pub w: usize,
    pub c: usize,
}

impl GridShape {
    pub fn new(h: usize, w: usize, c: usize) -> Self {
        Self { h, w, c }
    }

    pub fn len(&self) -> usize {
        self.h * self.w * self.c
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Flat coordinate of `(row, col, channel)`.
    pub fn index(&self, row: usize, col: usize, ch: usize) -> usize {
        (row * self.w + col) * self.c + ch
    }
}

/// Spatial layout used to cut a dataset into regions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Geometry {
    Grid(GridShape),
    Sequence { seq_len: usize, embed_dim: usize },
}

impl Geometry {
    pub fn dim(&self) -> usize {
        match *self {
            Geometry::Grid(g) => g.len(),
            Geometry::Sequence { seq_len, embed_dim } => seq_len * embed_dim,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    n: usize,
    d: usize,
    values: Vec<f64>,
    grid: Option<GridShape>,
    modality: Modality,
    embed_dim: Option<usize>,
}

impl Dataset {
    /// Builds a dataset from row-major values, checking every invariant.
    pub fn new(
        n: usize,
        d: usize,
        values: Vec<f64>,
        grid: Option<GridShape>,
        modality: Modality,
        embed_dim: Option<usize>,
    ) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(Error::InvalidDataset(format!("need N >= 1 and D >= 1, got {n}x{d}")));
        }
        if values.len() != n * d {
            return Err(Error::InvalidDataset(format!(
                "{} values do not fill a {n}x{d} matrix",
                values.len()
            )));
        }
        if let Some(g) = grid {
            if g.len() != d {
                return Err(Error::InvalidDataset(format!(
                    "grid {}x{}x{} does not match D = {d}",
                    g.h, g.w, g.c
                )));
            }
        }
        if let Some(e) = embed_dim {
            if e == 0 || d % e != 0 {
                return Err(Error::InvalidDataset(format!("embed_dim {e} does not divide D = {d}")));
            }
        } else if modality == Modality::TextEmbedding {
            return Err(Error::InvalidDataset("text embedding data needs embed_dim".into()));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidDataset(format!(
                "non-finite value at sample {}, coordinate {}",
                pos / d,
                pos % d
            )));
        }
        Ok(Self { n, d, values, grid, modality, embed_dim })
    }

    /// Convenience constructor for plain `N × D` data with no geometry.
    pub fn from_rows(rows: &[Vec<f64>], modality: Modality) -> Result<Self> {
        let n = rows.len();
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::InvalidDataset("rows have different lengths".into()));
        }
        Self::new(n, d, rows.concat(), None, modality, None)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.d)
    }

    pub fn grid(&self) -> Option<GridShape> {
        self.grid
    }

    pub fn modality(&self) -> Modality {
        self.modality
    }

    pub fn embed_dim(&self) -> Option<usize> {
        self.embed_dim
    }

    /// The layout partitions are cut against. Data without a grid is treated
    /// as a sequence of `D / embed_dim` tokens (width 1 by default).
    pub fn geometry(&self) -> Geometry {
        match (self.grid, self.embed_dim) {
            (Some(g), _) => Geometry::Grid(g),
            (None, Some(e)) => Geometry::Sequence { seq_len: self.d / e, embed_dim: e },
            (None, None) => Geometry::Sequence { seq_len: self.d, embed_dim: 1 },
        }
    }

    /// Copies the selected coordinates of every sample into a dense `N × |idx|` buffer.
    pub fn gather(&self, idx: &[usize]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n * idx.len());
        for row in self.rows() {
            out.extend(idx.iter().map(|&j| row[j]));
        }
        out
    }

    /// The first `n` samples.
    pub fn head(&self, n: usize) -> Result<Self> {
        if n == 0 || n > self.n {
            return Err(Error::Bounds(format!("cannot take {n} of {} samples", self.n)));
        }
        Ok(Self { n, values: self.values[..n * self.d].to_vec(), ..self.clone() })
    }

    /// Samples at the given indices, in order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::Bounds("empty selection".into()));
        }
        let mut values = Vec::with_capacity(indices.len() * self.d);
        for &i in indices {
            if i >= self.n {
                return Err(Error::Bounds(format!("sample {i} out of {}", self.n)));
            }
            values.extend_from_slice(self.row(i));
        }
        Ok(Self { n: indices.len(), values, ..self.clone() })
    }

    pub(crate) fn with_values(&self, values: Vec<f64>, modality: Modality) -> Result<Self> {
        Self::new(self.n, self.d, values, self.grid, modality, self.embed_dim)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_grid_mismatch_and_nan() {
        let g = Some(GridShape::new(2, 2, 1));
        assert!(Dataset::new(1, 3, vec![0.0; 3], g, Modality::Image, None).is_err());
        assert!(Dataset::new(1, 2, vec![0.0, f64::NAN], None, Modality::Image, None).is_err());
        assert!(Dataset::new(0, 2, vec![], None, Modality::Image, None).is_err());
    }

    #[test]
    fn text_needs_dividing_embed_dim() {
        assert!(Dataset::new(1, 4, vec![0.0; 4], None, Modality::TextEmbedding, Some(3)).is_err());
        assert!(Dataset::new(1, 4, vec![0.0; 4], None, Modality::TextEmbedding, None).is_err());
        let ds = Dataset::new(1, 4, vec![0.0; 4], None, Modality::TextEmbedding, Some(2)).unwrap();
        assert_eq!(ds.geometry(), Geometry::Sequence { seq_len: 2, embed_dim: 2 });
    }

    #[test]
    fn gather_picks_columns() {
        let ds = Dataset::from_rows(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]], Modality::Image)
            .unwrap();
        assert_eq!(ds.gather(&[2, 0]), vec![3.0, 1.0, 6.0, 4.0]);
    }
}
