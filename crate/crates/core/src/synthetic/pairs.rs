//! The random pair model: every lattice site is perfectly correlated with
//! exactly one partner, partners being placed at power-law distributed
//! distances. The mutual information of a cut is the number of pairs it
//! severs times `ln V`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::{CurvePoint, ScalingCurve};
use crate::data::{Dataset, Family, Modality};
use crate::error::{Error, Result};
use crate::estimate::mean_stderr;
use crate::seeded_rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomPairSpec {
    pub n_sites: usize,
    /// Decay exponent of the pair-distance law; ignored when `all_to_all`.
    pub alpha: f64,
    pub alphabet: usize,
    pub all_to_all: bool,
}

impl RandomPairSpec {
    pub fn power_law(n_sites: usize, alpha: f64, alphabet: usize) -> Self {
        Self { n_sites, alpha, alphabet, all_to_all: false }
    }

    pub fn all_to_all(n_sites: usize, alphabet: usize) -> Self {
        Self { n_sites, alpha: 0.0, alphabet, all_to_all: true }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_sites < 2 || self.n_sites % 2 != 0 {
            return Err(Error::Spec(format!("n_sites must be even and >= 2, got {}", self.n_sites)));
        }
        if self.alphabet < 2 {
            return Err(Error::Spec(format!("alphabet must be >= 2, got {}", self.alphabet)));
        }
        if !self.all_to_all && !(self.alpha > 1.0) {
            return Err(Error::Spec(format!("alpha must exceed 1, got {}", self.alpha)));
        }
        Ok(())
    }
}

/// A fixed-point-free involution on `0..n_sites`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairMatching {
    partner: Vec<usize>,
}

impl PairMatching {
    pub fn new(partner: Vec<usize>) -> Result<Self> {
        let n = partner.len();
        for (x, &y) in partner.iter().enumerate() {
            if y >= n || y == x || partner[y] != x {
                return Err(Error::Spec(format!("site {x} -> {y} is not a perfect matching")));
            }
        }
        Ok(Self { partner })
    }

    pub fn partner(&self) -> &[usize] {
        &self.partner
    }

    pub fn n_sites(&self) -> usize {
        self.partner.len()
    }

    /// Pairs with exactly one member in `[0, l)`.
    pub fn crossings(&self, l: usize) -> usize {
        self.partner[..l.min(self.partner.len())].iter().filter(|&&y| y >= l).count()
    }
}

/// Visits sites left to right; each still-unmatched site picks a partner
/// among the remaining unmatched sites with probability ∝ `|x − y|^(−α)`
/// (uniform when all-to-all), renormalized over what is still available.
pub fn sample_matching(spec: &RandomPairSpec, rng_seed: u64) -> Result<PairMatching> {
    spec.validate()?;
    let n = spec.n_sites;
    let mut rng = seeded_rng(rng_seed);
    let weight: Vec<f64> = (0..n)
        .map(|d| match d {
            0 => 0.0,
            _ if spec.all_to_all => 1.0,
            _ => (d as f64).powf(-spec.alpha),
        })
        .collect();
    let mut partner = vec![usize::MAX; n];
    let mut available: Vec<usize> = (0..n).collect();
    let mut cumulative = Vec::with_capacity(n);
    while let Some(&x) = available.first() {
        // available is kept sorted, so every candidate lies right of x
        let candidates = &available[1..];
        cumulative.clear();
        let mut total = 0.0;
        for &y in candidates {
            total += weight[y - x];
            cumulative.push(total);
        }
        let u = rng.random::<f64>() * total;
        let pick = cumulative.partition_point(|&c| c <= u).min(candidates.len() - 1);
        let y = candidates[pick];
        partner[x] = y;
        partner[y] = x;
        available.remove(pick + 1);
        available.remove(0);
    }
    PairMatching::new(partner)
}

/// Draws samples where each pair shares one uniform symbol from `0..alphabet`.
pub fn sample_pairs(
    matching: &PairMatching,
    alphabet: usize,
    n_samples: usize,
    rng_seed: u64,
) -> Result<Dataset> {
    if alphabet < 2 {
        return Err(Error::Spec("alphabet must be >= 2".into()));
    }
    let n = matching.n_sites();
    let mut rng = seeded_rng(rng_seed);
    let mut values = vec![0.0; n_samples * n];
    for row in values.chunks_exact_mut(n) {
        for (x, &y) in matching.partner().iter().enumerate() {
            if x < y {
                let s = rng.random_range(0..alphabet) as f64;
                row[x] = s;
                row[y] = s;
            }
        }
    }
    Dataset::new(n_samples, n, values, None, Modality::CategoricalSynthetic, None)
}

/// Exact mutual information between sites `[0, l)` and the rest.
pub fn exact_pair_mi(matching: &PairMatching, alphabet: usize, l: usize) -> Result<f64> {
    if l > matching.n_sites() {
        return Err(Error::Bounds(format!("L = {l} exceeds {} sites", matching.n_sites())));
    }
    Ok(matching.crossings(l) as f64 * (alphabet as f64).ln())
}

/// Expected cut mutual information over random matchings. All-to-all
/// matchings are uniform over perfect matchings, whose expected crossing
/// count `L (Lmax − L) / (Lmax − 1)` is returned without sampling.
pub fn expected_pair_mi_curve(
    spec: &RandomPairSpec,
    ls: &[usize],
    n_seeds: usize,
    base_seed: u64,
) -> Result<ScalingCurve> {
    spec.validate()?;
    let lmax = spec.n_sites;
    if let Some(&bad) = ls.iter().find(|&&l| l > lmax) {
        return Err(Error::Bounds(format!("L = {bad} exceeds {lmax} sites")));
    }
    let ln_v = (spec.alphabet as f64).ln();
    let points = if spec.all_to_all {
        ls.iter()
            .map(|&l| {
                let cross = (l * (lmax - l)) as f64 / (lmax - 1) as f64;
                CurvePoint { l, mi: cross * ln_v, sigma: 0.0 }
            })
            .collect()
    } else {
        if n_seeds == 0 {
            return Err(Error::Spec("need at least one seed".into()));
        }
        let matchings = (0..n_seeds as u64)
            .map(|s| sample_matching(spec, base_seed.wrapping_add(s)))
            .collect::<Result<Vec<_>>>()?;
        ls.iter()
            .map(|&l| {
                let per_seed: Vec<f64> =
                    matchings.iter().map(|m| m.crossings(l) as f64 * ln_v).collect();
                let (mi, sigma) = mean_stderr(&per_seed);
                CurvePoint { l, mi, sigma }
            })
            .collect()
    };
    let method = if spec.all_to_all { "pair_all_to_all_exact" } else { "pair_monte_carlo" };
    ScalingCurve::new(Family::LeftRight, lmax, method, points)
}
