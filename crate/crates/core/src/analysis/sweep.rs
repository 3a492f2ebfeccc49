use serde::{Deserialize, Serialize};

use super::{CurvePoint, ScalingCurve};
use crate::autoregressive::{ar_mi_two_model, ar_train_pair, check_compatible, ArConfig};
use crate::data::{make_partition, Dataset, Family, Partition};
use crate::error::{Error, Result};
use crate::estimate::MiEstimate;
use crate::knn::{knn_mi, KnnConfig};
use crate::mine::{mine_train, MineConfig};
use crate::par_map;
use crate::synthetic::{exact_gaussian_mi, GaussianSpec};

/// Estimator and its hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum EstimatorConfig {
    Knn(KnnConfig),
    Mine(MineConfig),
    Ar(ArConfig),
    /// Closed-form MI of a Gaussian ensemble; the samples are not used.
    GaussianExact(GaussianSpec),
}

impl EstimatorConfig {
    pub fn method(&self) -> &'static str {
        match self {
            EstimatorConfig::Knn(_) => "knn",
            EstimatorConfig::Mine(_) => "mine",
            EstimatorConfig::Ar(_) => "ar",
            EstimatorConfig::GaussianExact(_) => "gaussian_exact",
        }
    }
}

/// Estimates MI for a single partition. Autoregressive estimates train a
/// forward and a reverse model on `data` and evaluate on their holdout split.
pub fn estimate(data: &Dataset, partition: &Partition, cfg: &EstimatorConfig) -> Result<MiEstimate> {
    match cfg {
        EstimatorConfig::Knn(c) => knn_mi(data, partition, c),
        EstimatorConfig::Mine(c) => mine_train(data, partition, c).map(|t| t.estimate),
        EstimatorConfig::Ar(c) => {
            check_compatible(partition)?;
            let pair = ar_train_pair(data, c)?;
            ar_mi_two_model(&pair.fwd, &pair.rev, &pair.eval, partition)
        }
        EstimatorConfig::GaussianExact(spec) => {
            Ok(MiEstimate::new("gaussian_exact", exact_gaussian_mi(spec, partition)?, 0.0))
        }
    }
}

/// MI at every cut in `ls` (ascending). Cuts with an empty region are exactly
/// zero. Each cut is estimated from scratch, except that the autoregressive
/// models are cut-independent and are trained once for the whole sweep.
pub fn sweep(data: &Dataset, family: Family, ls: &[usize], cfg: &EstimatorConfig) -> Result<ScalingCurve> {
    let geometry = data.geometry();
    let lmax = family.lmax(&geometry)?;
    let partitions: Vec<Partition> = ls
        .iter()
        .map(|&l| make_partition(family, l, &geometry).map_err(|e| Error::AtCut { l, source: Box::new(e) }))
        .collect::<Result<_>>()?;
    let nonempty = |p: &Partition| !p.idx_a.is_empty() && !p.idx_b.is_empty();
    let pair = match cfg {
        EstimatorConfig::Ar(c) if partitions.iter().any(nonempty) => {
            for p in partitions.iter().filter(|p| nonempty(p)) {
                check_compatible(p).map_err(|e| Error::AtCut { l: p.l, source: Box::new(e) })?;
            }
            Some(ar_train_pair(data, c)?)
        }
        _ => None,
    };
    let estimates = par_map(partitions.len(), |i| {
        let p = &partitions[i];
        if !nonempty(p) {
            return Ok(CurvePoint { l: p.l, mi: 0.0, sigma: 0.0 });
        }
        let est = match (&pair, cfg) {
            (Some(pair), _) => ar_mi_two_model(&pair.fwd, &pair.rev, &pair.eval, p),
            (None, cfg) => estimate(data, p, cfg),
        };
        est.map(|e| CurvePoint { l: p.l, mi: e.value, sigma: e.sigma })
            .map_err(|e| Error::AtCut { l: p.l, source: Box::new(e) })
    });
    let points = estimates.into_iter().collect::<Result<Vec<_>>>()?;
    ScalingCurve::new(family, lmax, cfg.method(), points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{classify, ScalingModel};
    use crate::data::{Geometry, GridShape};
    use crate::synthetic::{exact_pair_mi, sample_gaussian, sample_matching, sample_pairs, RandomPairSpec};

    #[test]
    fn boundary_cuts_are_zero() {
        let data = sample_gaussian(&GaussianSpec::chain(6, 0.5).unwrap(), 200, 1).unwrap();
        let c = sweep(&data, Family::LeftRight, &[0, 6], &EstimatorConfig::Knn(KnnConfig::default())).unwrap();
        assert!(c.points.iter().all(|p| p.mi == 0.0 && p.sigma == 0.0));
        assert_eq!(c.lmax, 6);
    }

    #[test]
    fn errors_carry_the_cut() {
        let data = sample_gaussian(&GaussianSpec::chain(4, 0.5).unwrap(), 5, 1).unwrap();
        let r = sweep(&data, Family::LeftRight, &[0, 2], &EstimatorConfig::Knn(KnnConfig::default()));
        assert!(matches!(r, Err(Error::AtCut { l: 2, .. })));
        let r = sweep(&data, Family::LeftRight, &[7], &EstimatorConfig::Knn(KnnConfig::default()));
        assert!(matches!(r, Err(Error::AtCut { l: 7, .. })));
    }

    #[test]
    fn all_to_all_pair_curve_tracks_crossings() {
        let spec = RandomPairSpec::all_to_all(16, 2);
        let m = sample_matching(&spec, 3).unwrap();
        let data = sample_pairs(&m, 2, 3000, 4).unwrap();
        let ls: Vec<usize> = (0..=16).collect();
        let cfg = EstimatorConfig::Ar(ArConfig {
            bins: 2,
            epochs: 15,
            hidden: vec![32],
            batch_size: 64,
            learning_rate: 3e-3,
            ..ArConfig::default()
        });
        let c = sweep(&data, Family::LeftRight, &ls, &cfg).unwrap();
        for p in &c.points {
            let exact = exact_pair_mi(&m, 2, p.l).unwrap();
            assert!((p.mi - exact).abs() <= 0.05 * exact + 0.05, "{p:?} vs {exact}");
        }
    }

    #[test]
    fn short_range_chain_is_flat_in_interior() {
        let spec = GaussianSpec::chain(20, 0.6).unwrap();
        let data = sample_gaussian(&spec, 10, 5).unwrap();
        let ls: Vec<usize> = (0..=20).collect();
        let exact = sweep(&data, Family::LeftRight, &ls, &EstimatorConfig::GaussianExact(spec)).unwrap();
        let level = -0.5 * (1.0 - 0.36f64).ln();
        assert!(exact.points[1..20].iter().all(|p| (p.mi - level).abs() < 1e-9));
        assert_eq!(classify(&exact, 0.1).unwrap()[0].model, ScalingModel::Plateau);

        let spec = GaussianSpec::chain(12, 0.6).unwrap();
        let data = sample_gaussian(&spec, 4000, 5).unwrap();
        let ls: Vec<usize> = (0..=12).collect();
        let c = sweep(&data, Family::LeftRight, &ls, &EstimatorConfig::Knn(KnnConfig::default())).unwrap();
        for p in &c.points[2..=10] {
            assert!((p.mi - level).abs() < 0.1, "{p:?} vs {level}");
        }
    }

    #[test]
    fn deterministic_and_grid_aware() {
        let g = GridShape::new(4, 4, 1);
        let spec = GaussianSpec::grid_mrf(4, 4, 0.2).unwrap();
        let data = crate::synthetic::sample_gaussian_grid(&spec, g, 600, 6).unwrap();
        assert!(matches!(data.geometry(), Geometry::Grid(_)));
        let cfg = EstimatorConfig::Knn(KnnConfig::default());
        let a = sweep(&data, Family::CenterSurround, &[0, 1, 2, 3, 4], &cfg).unwrap();
        let b = sweep(&data, Family::CenterSurround, &[0, 1, 2, 3, 4], &cfg).unwrap();
        assert_eq!(a, b);
    }
}
