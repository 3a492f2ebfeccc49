use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::Geometry;
use crate::error::{Error, Result};

/// Cut families: left/right along a sequence (or image columns),
/// top/bottom rows, and a centered square against its surroundings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    #[serde(rename = "LR")]
    LeftRight,
    #[serde(rename = "TB")]
    TopBottom,
    #[serde(rename = "CS")]
    CenterSurround,
}

impl Family {
    pub fn as_str(&self) -> &'static str {
        match self {
            Family::LeftRight => "LR",
            Family::TopBottom => "TB",
            Family::CenterSurround => "CS",
        }
    }

    /// Largest cut parameter for this family on the given layout.
    pub fn lmax(&self, geometry: &Geometry) -> Result<usize> {
        match (self, geometry) {
            (Family::LeftRight, Geometry::Sequence { seq_len, .. }) => Ok(*seq_len),
            (Family::LeftRight, Geometry::Grid(g)) => Ok(g.w),
            (Family::TopBottom, Geometry::Grid(g)) => Ok(g.h),
            (Family::CenterSurround, Geometry::Grid(g)) => Ok(g.h.min(g.w)),
            (f, Geometry::Sequence { .. }) => {
                Err(Error::Family(format!("{} needs 2-D grid data", f.as_str())))
            }
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "LR" => Ok(Family::LeftRight),
            "TB" => Ok(Family::TopBottom),
            "CS" => Ok(Family::CenterSurround),
            other => Err(Error::Family(format!("unknown partition family {other:?}"))),
        }
    }
}

/// Two complementary, ascending coordinate lists.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    pub family: Family,
    pub l: usize,
    pub lmax: usize,
    pub idx_a: Vec<usize>,
    pub idx_b: Vec<usize>,
}

impl Partition {
    pub fn dim(&self) -> usize {
        self.idx_a.len() + self.idx_b.len()
    }

    /// Region B as A and vice versa.
    pub fn swapped(&self) -> Self {
        Self { idx_a: self.idx_b.clone(), idx_b: self.idx_a.clone(), ..self.clone() }
    }

    /// True when A is the leading block `0..|A|` and B the trailing block.
    pub fn is_prefix_cut(&self) -> bool {
        self.idx_a.iter().enumerate().all(|(i, &j)| i == j)
            && self.idx_b.iter().enumerate().all(|(i, &j)| i + self.idx_a.len() == j)
    }
}

pub fn make_partition(family: Family, l: usize, geometry: &Geometry) -> Result<Partition> {
    let lmax = family.lmax(geometry)?;
    if l > lmax {
        return Err(Error::Bounds(format!("L = {l} outside [0, {lmax}] for {family}")));
    }
    let dim = geometry.dim();
    let in_a: Box<dyn Fn(usize) -> bool> = match (family, *geometry) {
        (Family::LeftRight, Geometry::Sequence { embed_dim, .. }) => {
            Box::new(move |j| j < l * embed_dim)
        }
        (Family::LeftRight, Geometry::Grid(g)) => Box::new(move |j| (j / g.c) % g.w < l),
        (Family::TopBottom, Geometry::Grid(g)) => Box::new(move |j| j < l * g.w * g.c),
        (Family::CenterSurround, Geometry::Grid(g)) => {
            // Odd leftover margins put the extra row/column below and right.
            let top = (g.h - l) / 2;
            let left = (g.w - l) / 2;
            Box::new(move |j| {
                let row = j / (g.w * g.c);
                let col = (j / g.c) % g.w;
                (top..top + l).contains(&row) && (left..left + l).contains(&col)
            })
        }
        _ => unreachable!("lmax rejects sequence layouts for TB/CS"),
    };
    let (idx_a, idx_b) = (0..dim).partition(|&j| in_a(j));
    Ok(Partition { family, l, lmax, idx_a, idx_b })
}
