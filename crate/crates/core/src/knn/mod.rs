//! Kozachenko-Leonenko entropy and KSG (algorithm 1) mutual information
//! under the Chebyshev metric.

mod tree;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::digamma;

use crate::analysis::{sweep, EstimatorConfig, ScalingCurve};
use crate::data::{Dataset, Family, Partition};
use crate::error::{Error, Result};
use crate::estimate::{mean_stderr, MiEstimate};
use crate::par_map;
use tree::NeighborIndex;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KnnConfig {
    pub k: usize,
    /// Half-width of the uniform jitter added to every coordinate.
    pub noise_amplitude: f64,
    /// Blocks with more coordinates than this are scanned instead of indexed.
    pub brute_force_above: usize,
    pub seed: u64,
}

impl Default for KnnConfig {
    fn default() -> Self {
        Self { k: 5, noise_amplitude: 1e-10, brute_force_above: 30, seed: 0 }
    }
}

impl KnnConfig {
    pub fn with_k(k: usize) -> Self {
        Self { k, ..Self::default() }
    }

    fn check(&self, n: usize) -> Result<()> {
        if self.k == 0 || self.k >= n {
            return Err(Error::Bounds(format!("k = {} needs 1 ≤ k < N = {n}", self.k)));
        }
        if !(self.noise_amplitude >= 0.0) {
            return Err(Error::Spec(format!("noise amplitude {}", self.noise_amplitude)));
        }
        Ok(())
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Copies the given coordinates of every sample into a row-major block,
/// adding jitter that depends only on (seed, sample, original coordinate),
/// so a coordinate receives the same perturbation in every block it joins.
fn jittered_block(data: &Dataset, idx: &[usize], cfg: &KnnConfig) -> Vec<f64> {
    let d = data.d() as u64;
    let key = splitmix64(cfg.seed ^ 0x6A09_E667_F3BC_C908);
    let mut out = Vec::with_capacity(data.n() * idx.len());
    for (i, row) in data.rows().enumerate() {
        for &j in idx {
            let u = (splitmix64(key ^ (i as u64 * d + j as u64)) >> 11) as f64 / (1u64 << 53) as f64;
            out.push(row[j] + cfg.noise_amplitude * (2.0 * u - 1.0));
        }
    }
    out
}

fn kth_radii(points: &[f64], dim: usize, cfg: &KnnConfig) -> Result<Vec<f64>> {
    let index = NeighborIndex::new(points, dim, cfg.brute_force_above);
    let n = points.len() / dim;
    let radii = par_map(n, |i| index.kth_distance(&points[i * dim..(i + 1) * dim], i, cfg.k));
    if let Some(i) = radii.iter().position(|&r| r <= 0.0) {
        return Err(Error::DegenerateData(format!(
            "sample {i} has {} exact duplicates; raise the jitter amplitude",
            cfg.k
        )));
    }
    Ok(radii)
}

/// Differential entropy `ψ(N) − ψ(k) + D ⟨ln 2ε⟩` of all coordinates.
pub fn knn_entropy(data: &Dataset, cfg: &KnnConfig) -> Result<f64> {
    cfg.check(data.n())?;
    let all: Vec<usize> = (0..data.d()).collect();
    let points = jittered_block(data, &all, cfg);
    let radii = kth_radii(&points, data.d(), cfg)?;
    let mean_log = radii.iter().map(|r| (2.0 * r).ln()).sum::<f64>() / radii.len() as f64;
    Ok(digamma(data.n() as f64) - digamma(cfg.k as f64) + data.d() as f64 * mean_log)
}

/// KSG estimate `ψ(k) + ψ(N) − ⟨ψ(n_A + 1) + ψ(n_B + 1)⟩`, clamped at zero.
/// `sigma` is the standard error of the per-sample terms.
pub fn knn_mi(data: &Dataset, partition: &Partition, cfg: &KnnConfig) -> Result<MiEstimate> {
    if partition.idx_a.is_empty() || partition.idx_b.is_empty() {
        return Err(Error::Partition(format!(
            "{} at L = {} leaves a block empty",
            partition.family, partition.l
        )));
    }
    if partition.dim() != data.d() {
        return Err(Error::Partition(format!(
            "partition covers {} coordinates, data has {}",
            partition.dim(),
            data.d()
        )));
    }
    cfg.check(data.n())?;
    let n = data.n();
    let (da, db) = (partition.idx_a.len(), partition.idx_b.len());
    let a = jittered_block(data, &partition.idx_a, cfg);
    let b = jittered_block(data, &partition.idx_b, cfg);
    let joint: Vec<f64> = a
        .chunks_exact(da)
        .zip(b.chunks_exact(db))
        .flat_map(|(x, y)| x.iter().chain(y).copied())
        .collect();
    let radii = kth_radii(&joint, da + db, cfg)?;
    let index_a = NeighborIndex::new(&a, da, cfg.brute_force_above);
    let index_b = NeighborIndex::new(&b, db, cfg.brute_force_above);
    // counts include the sample itself, which is the "+1"
    let counts = par_map(n, |i| {
        (
            index_a.count_within(&a[i * da..(i + 1) * da], radii[i]),
            index_b.count_within(&b[i * db..(i + 1) * db], radii[i]),
        )
    });
    let base = digamma(cfg.k as f64) + digamma(n as f64);
    let terms: Vec<f64> =
        counts.iter().map(|&(na, nb)| base - (digamma(na as f64) + digamma(nb as f64))).collect();
    let (raw, se) = mean_stderr(&terms);
    let mean_count = |f: fn(&(usize, usize)) -> usize| {
        counts.iter().map(|c| f(c) as f64 - 1.0).sum::<f64>() / n as f64
    };
    Ok(MiEstimate::new("knn", raw.max(0.0), se)
        .with("k", cfg.k as f64)
        .with("n_samples", n as f64)
        .with("mean_n_a", mean_count(|c| c.0))
        .with("mean_n_b", mean_count(|c| c.1))
        .with("raw_value", raw)
        .with("clamped", f64::from(u8::from(raw < 0.0))))
}

/// One kNN curve per `(k, n)` pair, each on the first `n` samples.
pub fn knn_collapse_check(
    data: &Dataset,
    family: Family,
    ls: &[usize],
    kn: &[(usize, usize)],
    base: &KnnConfig,
) -> Result<Vec<ScalingCurve>> {
    kn.iter()
        .map(|&(k, n)| {
            if k >= n || n > data.n() {
                return Err(Error::Bounds(format!("(k = {k}, n = {n}) needs k < n ≤ {}", data.n())));
            }
            let subset = data.head(n)?;
            let cfg = EstimatorConfig::Knn(KnnConfig { k, ..*base });
            let mut curve = sweep(&subset, family, ls, &cfg)?;
            curve.method = format!("knn(k={k},n={n})");
            Ok(curve)
        })
        .collect()
}
