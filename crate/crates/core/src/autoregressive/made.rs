//! MADE-style connectivity masks for categorical autoregressive models.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::diffnet::{Activation, LayerSpec, NetworkSpec};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ordering {
    /// Coordinates in storage (raster) order.
    RasterForward,
    /// Coordinates in reverse storage order.
    RasterReverse,
}

impl Ordering {
    pub fn as_str(&self) -> &'static str {
        match self {
            Ordering::RasterForward => "raster_forward",
            Ordering::RasterReverse => "raster_reverse",
        }
    }

    /// 1-based position of coordinate `i` among `d` in this ordering.
    pub fn degree(&self, i: usize, d: usize) -> usize {
        match self {
            Ordering::RasterForward => i + 1,
            Ordering::RasterReverse => d - i,
        }
    }

    /// The coordinates visited first, `k` of them, in visiting order.
    pub fn prefix(&self, k: usize, d: usize) -> Vec<usize> {
        match self {
            Ordering::RasterForward => (0..k).collect(),
            Ordering::RasterReverse => (d - k..d).rev().collect(),
        }
    }
}

impl fmt::Display for Ordering {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Ordering {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raster_forward" | "forward" => Ok(Ordering::RasterForward),
            "raster_reverse" | "reverse" => Ok(Ordering::RasterReverse),
            other => Err(Error::Spec(format!("unknown ordering {other:?}"))),
        }
    }
}

fn hidden_degrees(width: usize, d: usize) -> Vec<usize> {
    let span = d.saturating_sub(1).max(1);
    (0..width).map(|k| k % span + 1).collect()
}

fn mask(rows: usize, cols: usize, keep: impl Fn(usize, usize) -> bool) -> Vec<f64> {
    let mut m = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        m.extend((0..cols).map(|c| f64::from(u8::from(keep(r, c)))));
    }
    m
}

/// Masked hidden stack mapping one-hot inputs (`d · bins`) to logits
/// (`d · bins`); output block `i` only sees coordinates earlier than `i`.
pub(crate) fn main_spec(d: usize, bins: usize, hidden: &[usize], ordering: Ordering, seed: u64) -> Result<NetworkSpec> {
    if hidden.is_empty() || hidden.contains(&0) {
        return Err(Error::Spec(format!("hidden widths {hidden:?}")));
    }
    let deg_in: Vec<usize> = (0..d * bins).map(|u| ordering.degree(u / bins, d)).collect();
    let mut layers = Vec::new();
    let mut prev = deg_in;
    for &width in hidden {
        let m = hidden_degrees(width, d);
        let keep = mask(width, prev.len(), |k, u| m[k] >= prev[u]);
        layers.push(LayerSpec::Dense { inputs: prev.len(), outputs: width, activation: Activation::Relu, mask: Some(keep) });
        prev = m;
    }
    let deg_out: Vec<usize> = (0..d * bins).map(|u| ordering.degree(u / bins, d)).collect();
    let keep = mask(d * bins, prev.len(), |o, k| deg_out[o] > prev[k]);
    layers.push(LayerSpec::Dense { inputs: prev.len(), outputs: d * bins, activation: Activation::Identity, mask: Some(keep) });
    NetworkSpec::new(vec![d * bins], layers, seed)
}

/// Masked direct input-to-logit connections.
pub(crate) fn direct_spec(d: usize, bins: usize, ordering: Ordering, seed: u64) -> Result<NetworkSpec> {
    let deg: Vec<usize> = (0..d * bins).map(|u| ordering.degree(u / bins, d)).collect();
    let keep = mask(d * bins, d * bins, |o, i| deg[o] > deg[i]);
    NetworkSpec::new(
        vec![d * bins],
        vec![LayerSpec::Dense { inputs: d * bins, outputs: d * bins, activation: Activation::Identity, mask: Some(keep) }],
        seed,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degrees_and_prefixes() {
        assert_eq!(Ordering::RasterForward.degree(0, 4), 1);
        assert_eq!(Ordering::RasterReverse.degree(0, 4), 4);
        assert_eq!(Ordering::RasterReverse.prefix(2, 5), vec![4, 3]);
        assert_eq!("raster_reverse".parse::<Ordering>().unwrap(), Ordering::RasterReverse);
    }

    #[test]
    fn hidden_degrees_cover_range() {
        assert_eq!(hidden_degrees(5, 4), vec![1, 2, 3, 1, 2]);
        assert_eq!(hidden_degrees(3, 1), vec![1, 1, 1]);
    }
}
