//! Multivariate Gaussian ensembles with closed-form mutual information.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::analysis::{CurvePoint, ScalingCurve};
use crate::data::{make_partition, Dataset, Family, Geometry, GridShape, Modality, Partition};
use crate::error::{Error, Result};
use crate::seeded_rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianSpec {
    pub dim: usize,
    pub mean: Vec<f64>,
    /// Row-major `dim × dim` covariance.
    pub covariance: Vec<f64>,
}

impl GaussianSpec {
    pub fn new(mean: Vec<f64>, covariance: Vec<f64>) -> Result<Self> {
        let spec = Self { dim: mean.len(), mean, covariance };
        spec.validate()?;
        Ok(spec)
    }

    /// Two unit-variance coordinates with correlation `rho`.
    pub fn bivariate(rho: f64) -> Result<Self> {
        Self::new(vec![0.0; 2], vec![1.0, rho, rho, 1.0])
    }

    /// Stationary AR(1) chain: `Cov(x_i, x_j) = rho^|i − j|`.
    pub fn chain(dim: usize, rho: f64) -> Result<Self> {
        let cov = (0..dim * dim)
            .map(|k| rho.powi((k / dim).abs_diff(k % dim) as i32))
            .collect();
        Self::new(vec![0.0; dim], cov)
    }

    /// Gaussian Markov random field on an `h × w` grid with precision
    /// `I − coupling · A`, `A` the nearest-neighbour adjacency (free boundary).
    /// Positive definite for `|coupling| < 1/4`.
    pub fn grid_mrf(h: usize, w: usize, coupling: f64) -> Result<Self> {
        let d = h * w;
        let mut precision = DMatrix::<f64>::identity(d, d);
        for r in 0..h {
            for c in 0..w {
                let i = r * w + c;
                if c + 1 < w {
                    precision[(i, i + 1)] = -coupling;
                    precision[(i + 1, i)] = -coupling;
                }
                if r + 1 < h {
                    precision[(i, i + w)] = -coupling;
                    precision[(i + w, i)] = -coupling;
                }
            }
        }
        let chol = Cholesky::new(precision)
            .ok_or_else(|| Error::Spec(format!("coupling {coupling} is not positive definite")))?;
        let cov = chol.inverse();
        let cov = (&cov + cov.transpose()) * 0.5;
        Self::new(vec![0.0; d], row_major(&cov))
    }

    /// `dim_a` standard normals followed by noisy copies `b_i = a_i + eps · z_i`.
    pub fn duplicated_blocks(dim_a: usize, eps: f64) -> Result<Self> {
        let d = 2 * dim_a;
        let mut cov = vec![0.0; d * d];
        for i in 0..dim_a {
            let j = i + dim_a;
            cov[i * d + i] = 1.0;
            cov[i * d + j] = 1.0;
            cov[j * d + i] = 1.0;
            cov[j * d + j] = 1.0 + eps * eps;
        }
        Self::new(vec![0.0; d], cov)
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim;
        if d == 0 || self.mean.len() != d || self.covariance.len() != d * d {
            return Err(Error::Spec(format!(
                "dim {d} with {} means and {} covariance entries",
                self.mean.len(),
                self.covariance.len()
            )));
        }
        for i in 0..d {
            for j in 0..i {
                if (self.covariance[i * d + j] - self.covariance[j * d + i]).abs() > 1e-12 {
                    return Err(Error::Spec(format!("covariance not symmetric at ({i}, {j})")));
                }
            }
        }
        self.cholesky().map(|_| ())
    }

    pub fn covariance_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.dim, self.dim, &self.covariance)
    }

    fn cholesky(&self) -> Result<Cholesky<f64, nalgebra::Dyn>> {
        Cholesky::new(self.covariance_matrix())
            .ok_or_else(|| Error::Spec("covariance is not positive definite".into()))
    }
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    (0..m.nrows()).flat_map(|i| (0..m.ncols()).map(move |j| m[(i, j)])).collect()
}

/// Draws `mean + L z` with `Σ = L Lᵀ`.
pub fn sample_gaussian(spec: &GaussianSpec, n_samples: usize, rng_seed: u64) -> Result<Dataset> {
    spec.validate()?;
    let l = spec.cholesky()?.l();
    let mean = DVector::from_column_slice(&spec.mean);
    let mut rng = seeded_rng(rng_seed);
    let mut values = Vec::with_capacity(n_samples * spec.dim);
    for _ in 0..n_samples {
        let z = DVector::from_fn(spec.dim, |_, _| rng.sample::<f64, _>(StandardNormal));
        values.extend((&l * z + &mean).iter());
    }
    Dataset::new(n_samples, spec.dim, values, None, Modality::Image, None)
}

/// Same as [`sample_gaussian`] but laid out on an `h × w × 1` grid.
pub fn sample_gaussian_grid(
    spec: &GaussianSpec,
    grid: GridShape,
    n_samples: usize,
    rng_seed: u64,
) -> Result<Dataset> {
    let ds = sample_gaussian(spec, n_samples, rng_seed)?;
    Dataset::new(ds.n(), ds.d(), ds.values().to_vec(), Some(grid), Modality::Image, None)
}

fn log_det(cov: &DMatrix<f64>, idx: &[usize], what: &str) -> Result<f64> {
    if idx.is_empty() {
        return Ok(0.0);
    }
    let sub = DMatrix::from_fn(idx.len(), idx.len(), |i, j| cov[(idx[i], idx[j])]);
    let chol = Cholesky::new(sub)
        .ok_or_else(|| Error::NumericalRank(format!("{what} block is singular")))?;
    Ok(2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>())
}

/// `½ (ln det Σ_AA + ln det Σ_BB − ln det Σ)`.
pub fn exact_gaussian_mi(spec: &GaussianSpec, partition: &Partition) -> Result<f64> {
    if partition.dim() != spec.dim {
        return Err(Error::Partition(format!(
            "partition covers {} coordinates, Gaussian has {}",
            partition.dim(),
            spec.dim
        )));
    }
    let cov = spec.covariance_matrix();
    let all: Vec<usize> = (0..spec.dim).collect();
    let mi = 0.5
        * (log_det(&cov, &partition.idx_a, "A")? + log_det(&cov, &partition.idx_b, "B")?
            - log_det(&cov, &all, "joint")?);
    Ok(mi.max(0.0))
}

/// Exact cut curve for a Gaussian laid out with `geometry`.
pub fn exact_gaussian_curve(
    spec: &GaussianSpec,
    geometry: &Geometry,
    family: Family,
    ls: &[usize],
) -> Result<ScalingCurve> {
    let points = ls
        .iter()
        .map(|&l| {
            let p = make_partition(family, l, geometry)?;
            Ok(CurvePoint { l, mi: exact_gaussian_mi(spec, &p)?, sigma: 0.0 })
        })
        .collect::<Result<Vec<_>>>()?;
    ScalingCurve::new(family, family.lmax(geometry)?, "gaussian_exact", points)
}
