//! Neural estimation of mutual information through the Donsker-Varadhan
//! lower bound, trained with a moving-average corrected gradient.

mod score;

use std::io::Write;

use rand::seq::index::sample as sample_indices;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Partition};
use crate::diffnet::{AdamState, Mode, Network, NetworkSpec};
use crate::error::{Error, Result};
use crate::estimate::{mean_stderr, MiEstimate};
use crate::seeded_rng;

pub use score::{make_score_net, score_placement, ScoreKind};

/// Training diverges when the bound exceeds this many nats.
pub const DIVERGENCE_BOUND: f64 = 50.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MineConfig {
    pub score_net: NetworkSpec,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub iterations: usize,
    /// Decay of the moving average of `E[e^T]` over marginal batches.
    pub ema_rate: f64,
    /// Trailing iterations averaged into the reported estimate.
    pub eval_window: usize,
    pub rng_seed: u64,
}

impl MineConfig {
    pub fn new(score_net: NetworkSpec, iterations: usize, rng_seed: u64) -> Self {
        Self {
            score_net,
            batch_size: 128,
            learning_rate: 1e-4,
            iterations,
            ema_rate: 0.99,
            eval_window: (iterations / 10).max(1),
            rng_seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size < 2 {
            return Err(Error::Batch(format!("batch size {} < 2", self.batch_size)));
        }
        if !(self.ema_rate > 0.0 && self.ema_rate < 1.0) {
            return Err(Error::Spec(format!("ema rate {} outside (0, 1)", self.ema_rate)));
        }
        if self.eval_window == 0 || self.iterations < self.eval_window {
            return Err(Error::Spec(format!(
                "{} iterations cannot fill an evaluation window of {}",
                self.iterations, self.eval_window
            )));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::Spec(format!("learning rate {}", self.learning_rate)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MineTrace {
    /// Batch bound per iteration (evaluation-mode scores when the net has dropout).
    pub bounds: Vec<f64>,
    /// Moving average of the marginal `E[e^T]` per iteration.
    pub ema_denominator: Vec<f64>,
    pub estimate: MiEstimate,
}

impl MineTrace {
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "iteration,bound,ema_denominator")?;
        for (i, (b, e)) in self.bounds.iter().zip(&self.ema_denominator).enumerate() {
            writeln!(out, "{i},{b},{e}")?;
        }
        Ok(())
    }
}

fn log_mean_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + (xs.iter().map(|x| (x - m).exp()).sum::<f64>() / xs.len() as f64).ln()
}

/// `mean(T_joint) − ln mean(exp T_marginal)`.
pub fn dv_bound(scores_joint: &[f64], scores_marginal: &[f64]) -> Result<f64> {
    if scores_joint.is_empty() || scores_marginal.is_empty() {
        return Err(Error::Batch("empty score batch".into()));
    }
    let mean = scores_joint.iter().sum::<f64>() / scores_joint.len() as f64;
    Ok(mean - log_mean_exp(scores_marginal))
}

/// A uniformly drawn permutation without fixed points (rejection sampling,
/// accepted with probability about 1/e).
pub fn derangement(n: usize, rng: &mut impl Rng) -> Result<Vec<usize>> {
    if n < 2 {
        return Err(Error::Batch(format!("no derangement of {n} element(s)")));
    }
    loop {
        let mut p: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            p.swap(i, rng.random_range(0..=i));
        }
        if p.iter().enumerate().all(|(i, &j)| i != j) {
            return Ok(p);
        }
    }
}

/// Pairs row `i` of `batch_a` with row `π(i)` of `batch_b`, `π` a derangement.
/// Returns the permuted B rows.
pub fn shuffle_marginals(batch_a: &[Vec<f64>], batch_b: &[Vec<f64>], rng_seed: u64) -> Result<Vec<Vec<f64>>> {
    if batch_a.len() != batch_b.len() {
        return Err(Error::Batch(format!("batch sizes {} and {} differ", batch_a.len(), batch_b.len())));
    }
    let perm = derangement(batch_b.len(), &mut seeded_rng(rng_seed))?;
    Ok(perm.iter().map(|&j| batch_b[j].clone()).collect())
}

/// Writes joint rows (or, with `pairing`, A of row `i` next to B of row
/// `pairing[i]`) into score-net input layout.
fn assemble(data: &Dataset, partition: &Partition, placement: &[usize], rows: &[usize], pairing: Option<&[usize]>, out: &mut [f64]) {
    let d = data.d();
    let na = partition.idx_a.len();
    for (s, &i) in rows.iter().enumerate() {
        let dst = &mut out[s * d..(s + 1) * d];
        let ra = data.row(i);
        let rb = data.row(pairing.map_or(i, |p| rows[p[s]]));
        for (k, &j) in partition.idx_a.iter().enumerate() {
            dst[placement[k]] = ra[j];
        }
        for (k, &j) in partition.idx_b.iter().enumerate() {
            dst[placement[na + k]] = rb[j];
        }
    }
}

/// Trains a score network on `(A, B)` blocks of `data` and reports the
/// trailing-window mean of the bound.
pub fn mine_train(data: &Dataset, partition: &Partition, cfg: &MineConfig) -> Result<MineTrace> {
    cfg.validate()?;
    if partition.idx_a.is_empty() || partition.idx_b.is_empty() {
        return Err(Error::Partition(format!("{} at L = {} leaves a block empty", partition.family, partition.l)));
    }
    if partition.dim() != data.d() {
        return Err(Error::Partition(format!(
            "partition covers {} coordinates, data has {}",
            partition.dim(),
            data.d()
        )));
    }
    if data.n() < cfg.batch_size {
        return Err(Error::InsufficientData(format!("{} samples for batch size {}", data.n(), cfg.batch_size)));
    }
    let mut net = Network::new(cfg.score_net.clone())?;
    if net.input_len() != data.d() || net.output_len() != 1 {
        return Err(Error::Composition(format!(
            "score net maps {} inputs to {} outputs, data has D = {}",
            net.input_len(),
            net.output_len(),
            data.d()
        )));
    }
    let placement = score_placement(&cfg.score_net, data, partition)?;
    let dropout = cfg.score_net.has_dropout();
    let b = cfg.batch_size;
    let d = data.d();
    let mut rng = seeded_rng(cfg.rng_seed);
    let mut adam = AdamState::new(net.params().len(), cfg.learning_rate);
    let mut input = vec![0.0; 2 * b * d];
    let mut upstream = vec![0.0; 2 * b];
    let mut log_ema = f64::NAN;
    let mut bounds = Vec::with_capacity(cfg.iterations);
    let mut emas = Vec::with_capacity(cfg.iterations);
    let ema = cfg.ema_rate;

    for it in 0..cfg.iterations {
        let rows = sample_indices(&mut rng, data.n(), b).into_vec();
        let perm = derangement(b, &mut rng)?;
        let (joint, marginal) = input.split_at_mut(b * d);
        assemble(data, partition, &placement, &rows, None, joint);
        assemble(data, partition, &placement, &rows, Some(&perm), marginal);
        let mode = if dropout { Mode::Train { seed: rng.random() } } else { Mode::Eval };
        let pass = net.forward(&input, 2 * b, mode)?;
        let (tj, tm) = pass.output().split_at(b);

        let batch_log = log_mean_exp(tm);
        log_ema = if it == 0 {
            batch_log
        } else {
            let (x, y) = (ema.ln() + log_ema, (1.0 - ema).ln() + batch_log);
            x.max(y) + (-(x - y).abs()).exp().ln_1p()
        };
        let bound = if dropout {
            let scores = net.predict(&input, 2 * b)?;
            dv_bound(&scores[..b], &scores[b..])?
        } else {
            dv_bound(tj, tm)?
        };
        bounds.push(bound);
        emas.push(log_ema.exp());
        if !bound.is_finite() || bound > DIVERGENCE_BOUND {
            let (value, sigma) = mean_stderr(&bounds);
            let trace = MineTrace {
                bounds,
                ema_denominator: emas,
                estimate: MiEstimate::new("mine", value, sigma),
            };
            return Err(Error::TrainingInstability { iteration: it, bound, trace: Box::new(trace) });
        }

        // loss = −mean(T_j) + mean(e^{T_m}) / ema, with the ema held fixed
        let inv_b = 1.0 / b as f64;
        upstream[..b].fill(-inv_b);
        for (u, &t) in upstream[b..].iter_mut().zip(tm) {
            *u = (t - log_ema).exp() * inv_b;
        }
        let grads = net.backward(&pass, &upstream)?;
        adam.step(net.params_mut(), &grads)?;
    }

    let (value, sigma) = mean_stderr(&bounds[cfg.iterations - cfg.eval_window..]);
    let estimate = MiEstimate::new("mine", value, sigma)
        .with("iterations", cfg.iterations as f64)
        .with("batch_size", b as f64)
        .with("eval_window", cfg.eval_window as f64)
        .with("final_bound", *bounds.last().unwrap());
    Ok(MineTrace { bounds, ema_denominator: emas, estimate })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{make_partition, Family, Geometry};
    use crate::diffnet::{Activation, LayerSpec};
    use crate::synthetic::{sample_gaussian, GaussianSpec};

    fn small_net(d: usize, width: usize, seed: u64) -> NetworkSpec {
        NetworkSpec::new(
            vec![d],
            vec![
                LayerSpec::dense(d, width, Activation::Relu),
                LayerSpec::dense(width, width, Activation::Relu),
                LayerSpec::dense(width, 1, Activation::Identity),
            ],
            seed,
        )
        .unwrap()
    }

    fn lr1(d: usize) -> Partition {
        make_partition(Family::LeftRight, 1, &Geometry::Sequence { seq_len: d, embed_dim: 1 }).unwrap()
    }

    #[test]
    fn bound_hand_values() {
        assert_eq!(dv_bound(&[0.0; 4], &[0.0; 4]).unwrap(), 0.0);
        assert_eq!(dv_bound(&[1.0, 1.0], &[0.0, 0.0]).unwrap(), 1.0);
        for c in [-30.0, 0.7, 400.0] {
            assert!(dv_bound(&[c; 3], &[c; 5]).unwrap().abs() < 1e-12);
        }
        assert!(matches!(dv_bound(&[], &[1.0]), Err(Error::Batch(_))));
    }

    #[test]
    fn bound_is_shift_invariant() {
        let j = [0.3, -1.2, 2.5];
        let m = [0.1, 0.9, -0.4, 3.0];
        let base = dv_bound(&j, &m).unwrap();
        for c in [-5.0, 1e-3, 700.0] {
            let shift = |xs: &[f64]| xs.iter().map(|x| x + c).collect::<Vec<_>>();
            let moved = dv_bound(&shift(&j), &shift(&m)).unwrap();
            assert!((moved - base).abs() < 1e-12 * c.abs().max(1.0));
        }
    }

    #[test]
    fn derangements() {
        let rows: Vec<Vec<f64>> = (0..2).map(|i| vec![i as f64]).collect();
        assert_eq!(shuffle_marginals(&rows, &rows, 3).unwrap(), vec![vec![1.0], vec![0.0]]);
        let b: Vec<Vec<f64>> = (0..50).map(|i| vec![i as f64]).collect();
        let out = shuffle_marginals(&b, &b, 9).unwrap();
        assert_eq!(out, shuffle_marginals(&b, &b, 9).unwrap());
        assert!(out.iter().enumerate().all(|(i, r)| r[0] != i as f64));
        let mut sorted = out.clone();
        sorted.sort_by(|x, y| x[0].total_cmp(&y[0]));
        assert_eq!(sorted, b);
        let one = vec![vec![0.0]];
        assert!(matches!(shuffle_marginals(&one, &one, 0), Err(Error::Batch(_))));
    }

    #[test]
    fn independent_blocks_give_zero() {
        let data = sample_gaussian(&GaussianSpec::bivariate(0.0).unwrap(), 4000, 1).unwrap();
        let mut cfg = MineConfig::new(small_net(2, 16, 1), 1500, 2);
        cfg.learning_rate = 1e-3;
        cfg.eval_window = 500;
        let t = mine_train(&data, &lr1(2), &cfg).unwrap();
        assert_eq!(t.bounds.len(), 1500);
        assert!(t.estimate.value.abs() < 0.05, "{:?}", t.estimate);
    }

    #[test]
    fn learns_correlated_gaussian_and_is_deterministic() {
        let data = sample_gaussian(&GaussianSpec::bivariate(0.9).unwrap(), 4000, 3).unwrap();
        let mut cfg = MineConfig::new(small_net(2, 32, 4), 1500, 5);
        cfg.learning_rate = 1e-3;
        cfg.eval_window = 300;
        let a = mine_train(&data, &lr1(2), &cfg).unwrap();
        let b = mine_train(&data, &lr1(2), &cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.estimate.value > 0.6 && a.estimate.value < 0.83 + 3.0 * a.estimate.sigma + 0.02, "{:?}", a.estimate);
        let mut csv = Vec::new();
        a.write_csv(&mut csv).unwrap();
        assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 1501);
    }

    #[test]
    fn divergence_is_reported_with_trace() {
        let base = sample_gaussian(&GaussianSpec::new(vec![0.0], vec![1.0]).unwrap(), 2000, 6).unwrap();
        let rows: Vec<Vec<f64>> = base.values().iter().map(|&x| vec![1e3 * x, 1e3 * x]).collect();
        let data = Dataset::from_rows(&rows, crate::data::Modality::Image).unwrap();
        let mut cfg = MineConfig::new(small_net(2, 32, 7), 3000, 8);
        cfg.learning_rate = 0.05;
        cfg.eval_window = 10;
        match mine_train(&data, &lr1(2), &cfg) {
            Err(Error::TrainingInstability { iteration, trace, .. }) => {
                assert_eq!(trace.bounds.len(), iteration + 1);
            }
            other => panic!("expected divergence, got {:?}", other.map(|t| t.estimate)),
        }
    }

    #[test]
    fn config_validation() {
        let data = sample_gaussian(&GaussianSpec::bivariate(0.5).unwrap(), 100, 1).unwrap();
        let mut cfg = MineConfig::new(small_net(2, 4, 1), 10, 1);
        assert!(matches!(mine_train(&data, &lr1(2), &cfg), Err(Error::InsufficientData(_))));
        cfg.batch_size = 1;
        assert!(matches!(cfg.validate(), Err(Error::Batch(_))));
        cfg.batch_size = 8;
        cfg.eval_window = 11;
        assert!(cfg.validate().is_err());
        let empty = make_partition(Family::LeftRight, 0, &Geometry::Sequence { seq_len: 2, embed_dim: 1 }).unwrap();
        cfg.eval_window = 5;
        assert!(matches!(mine_train(&data, &empty, &cfg), Err(Error::Partition(_))));
    }
}
