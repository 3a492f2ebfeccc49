use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Dataset, GridShape, Modality};
use crate::error::{Error, Result};
use crate::seeded_rng;

/// Cyclically shifts one `H × W × C` sample down by `dy` rows and right by `dx` columns.
pub fn shift_sample(grid: GridShape, sample: &[f64], dy: usize, dx: usize) -> Vec<f64> {
    let mut out = vec![0.0; sample.len()];
    for row in 0..grid.h {
        let to_row = (row + dy) % grid.h;
        for col in 0..grid.w {
            let to_col = (col + dx) % grid.w;
            let src = grid.index(row, col, 0);
            let dst = grid.index(to_row, to_col, 0);
            out[dst..dst + grid.c].copy_from_slice(&sample[src..src + grid.c]);
        }
    }
    out
}

/// Applies an independent uniformly drawn cyclic shift to every sample.
pub fn random_shift(data: &Dataset, rng_seed: u64) -> Result<Dataset> {
    let grid = data
        .grid()
        .ok_or_else(|| Error::Modality("random shifts need grid-shaped data".into()))?;
    let mut rng = seeded_rng(rng_seed);
    let mut values = Vec::with_capacity(data.values().len());
    for row in data.rows() {
        let dy = rng.random_range(0..grid.h);
        let dx = rng.random_range(0..grid.w);
        values.extend(shift_sample(grid, row, dy, dx));
    }
    data.with_values(values, data.modality())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscretizationSpec {
    pub bins: usize,
    pub lo: f64,
    pub hi: f64,
}

impl Default for DiscretizationSpec {
    fn default() -> Self {
        Self { bins: 256, lo: 0.0, hi: 1.0 }
    }
}

impl DiscretizationSpec {
    pub fn new(bins: usize, lo: f64, hi: f64) -> Result<Self> {
        if bins < 2 || !(lo < hi) {
            return Err(Error::Spec(format!("need bins >= 2 and lo < hi, got {bins}, [{lo}, {hi}]")));
        }
        Ok(Self { bins, lo, hi })
    }

    pub fn bin(&self, v: f64) -> usize {
        let t = (v.clamp(self.lo, self.hi) - self.lo) / (self.hi - self.lo);
        ((t * self.bins as f64).floor() as usize).min(self.bins - 1)
    }
}

/// Maps every value to its bin index; the result is categorical.
pub fn discretize(data: &Dataset, spec: &DiscretizationSpec) -> Result<Dataset> {
    let spec = DiscretizationSpec::new(spec.bins, spec.lo, spec.hi)?;
    let values = data.values().iter().map(|&v| spec.bin(v) as f64).collect();
    data.with_values(values, Modality::CategoricalSynthetic)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid_data(n: usize, h: usize, w: usize) -> Dataset {
        let values = (0..n * h * w).map(|i| ((i * 37) % 101) as f64 / 100.0).collect();
        Dataset::new(n, h * w, values, Some(GridShape::new(h, w, 1)), Modality::Image, None)
            .unwrap()
    }

    #[test]
    fn zero_shift_is_identity() {
        let ds = grid_data(1, 4, 5);
        assert_eq!(shift_sample(GridShape::new(4, 5, 1), ds.row(0), 0, 0), ds.row(0));
    }

    #[test]
    fn shift_moves_pixels_with_wraparound() {
        let g = GridShape::new(2, 3, 1);
        let s = [0.0, 1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(shift_sample(g, &s, 1, 1), vec![5.0, 3.0, 4.0, 2.0, 0.0, 1.0]);
    }

    #[test]
    fn constant_image_unchanged() {
        let ds = Dataset::new(3, 16, vec![0.25; 48], Some(GridShape::new(4, 4, 1)), Modality::Image, None)
            .unwrap();
        assert_eq!(random_shift(&ds, 11).unwrap(), ds);
    }

    #[test]
    fn seeded_shift_is_reproducible() {
        let ds = grid_data(3, 28, 28);
        let a = random_shift(&ds, 42).unwrap();
        let b = random_shift(&ds, 42).unwrap();
        assert_eq!(a.values(), b.values());
        assert_ne!(a.values(), ds.values());
    }

    #[test]
    fn shift_needs_grid() {
        let ds = Dataset::from_rows(&[vec![1.0, 2.0]], Modality::Image).unwrap();
        assert!(matches!(random_shift(&ds, 0), Err(Error::Modality(_))));
    }

    #[test]
    fn shift_preserves_value_multiset() {
        let ds = grid_data(5, 6, 7);
        let shifted = random_shift(&ds, 3).unwrap();
        for (a, b) in ds.rows().zip(shifted.rows()) {
            let mut a = a.to_vec();
            let mut b = b.to_vec();
            a.sort_by(f64::total_cmp);
            b.sort_by(f64::total_cmp);
            assert_eq!(a, b);
        }
    }

    #[test]
    fn bin_boundaries() {
        let s = DiscretizationSpec::default();
        assert_eq!(s.bin(0.0), 0);
        assert_eq!(s.bin(1.0), 255);
        assert_eq!(DiscretizationSpec::new(2, 0.0, 1.0).unwrap().bin(0.5), 1);
        assert_eq!(s.bin(-3.0), 0);
        assert_eq!(s.bin(7.0), 255);
        assert!(DiscretizationSpec::new(1, 0.0, 1.0).is_err());
        assert!(DiscretizationSpec::new(4, 1.0, 1.0).is_err());
    }

    #[test]
    fn discretize_sets_categorical() {
        let ds = grid_data(2, 2, 2);
        let out = discretize(&ds, &DiscretizationSpec::new(4, 0.0, 1.0).unwrap()).unwrap();
        assert_eq!(out.modality(), Modality::CategoricalSynthetic);
        assert!(out.values().iter().all(|v| v.fract() == 0.0 && *v < 4.0));
        assert_eq!(out.grid(), ds.grid());
    }

    proptest! {
        #[test]
        fn bins_are_monotone(a in -2.0f64..3.0, b in -2.0f64..3.0, bins in 2usize..300) {
            let s = DiscretizationSpec::new(bins, 0.0, 1.0).unwrap();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(s.bin(lo) <= s.bin(hi));
        }
    }
}
