//! Explicit-density entropy and mutual information from masked
//! autoregressive networks with categorical conditionals.

mod made;

use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Family, Modality, Partition};
use crate::diffnet::{load_checkpoint, save_checkpoint, AdamState, Mode, Network};
use crate::error::{Error, Result};
use crate::estimate::{mean_stderr, MiEstimate};
use crate::seeded_rng;

pub use made::Ordering;

const EVAL_CHUNK: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArConfig {
    pub ordering: Ordering,
    pub bins: usize,
    /// Widths of the masked hidden layers.
    pub hidden: Vec<usize>,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub rng_seed: u64,
    pub holdout_fraction: f64,
}

impl Default for ArConfig {
    fn default() -> Self {
        Self {
            ordering: Ordering::RasterForward,
            bins: 8,
            hidden: vec![128],
            batch_size: 128,
            learning_rate: 1e-3,
            epochs: 30,
            rng_seed: 0,
            holdout_fraction: 0.2,
        }
    }
}

impl ArConfig {
    pub fn validate(&self) -> Result<()> {
        if self.bins < 2 {
            return Err(Error::Spec(format!("bins = {} < 2", self.bins)));
        }
        if !(0.0..1.0).contains(&self.holdout_fraction) {
            return Err(Error::Spec(format!("holdout fraction {} outside [0, 1)", self.holdout_fraction)));
        }
        if self.batch_size == 0 || self.epochs == 0 || !(self.learning_rate > 0.0) {
            return Err(Error::Spec("batch size, epochs and learning rate must be positive".into()));
        }
        Ok(())
    }
}

/// Train / holdout sample indices, shuffled by `seed`.
pub fn holdout_split(n: usize, fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut seeded_rng(seed ^ 0x5EED_5B17));
    let n_hold = (fraction * n as f64).round() as usize;
    let hold = idx.split_off(n - n_hold.min(n));
    (idx, hold)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArModel {
    pub ordering: Ordering,
    pub bins: usize,
    main: Network,
    direct: Network,
    /// Mean per-sample NLL (nats) on the training split after each epoch.
    pub train_nll: Vec<f64>,
    /// Mean per-sample NLL (nats) on the holdout split after each epoch.
    pub holdout_nll: Vec<f64>,
    /// Sample indices held out from training.
    pub holdout: Vec<usize>,
}

fn check_categorical(data: &Dataset, bins: usize) -> Result<()> {
    if data.modality() != Modality::CategoricalSynthetic {
        return Err(Error::Modality(format!("autoregressive models need discretized data, got {:?}", data.modality())));
    }
    if let Some(v) = data.values().iter().find(|v| v.fract() != 0.0 || **v < 0.0 || **v >= bins as f64) {
        return Err(Error::Modality(format!("value {v} is not a level in [0, {bins})")));
    }
    Ok(())
}

fn one_hot(rows: &[&[f64]], bins: usize) -> Vec<f64> {
    let d = rows[0].len();
    let mut x = vec![0.0; rows.len() * d * bins];
    for (s, row) in rows.iter().enumerate() {
        for (i, &v) in row.iter().enumerate() {
            x[(s * d + i) * bins + v as usize] = 1.0;
        }
    }
    x
}

/// In-place log-softmax over consecutive blocks of `bins`.
fn log_softmax(logits: &mut [f64], bins: usize) {
    for block in logits.chunks_exact_mut(bins) {
        let m = block.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + block.iter().map(|z| (z - m).exp()).sum::<f64>().ln();
        block.iter_mut().for_each(|z| *z -= lse);
    }
}

impl ArModel {
    pub fn dim(&self) -> usize {
        self.main.input_len() / self.bins
    }

    fn logits(&self, x: &[f64], batch: usize) -> Result<Vec<f64>> {
        let mut z = self.main.predict(x, batch)?;
        let direct = self.direct.predict(x, batch)?;
        z.iter_mut().zip(direct).for_each(|(a, b)| *a += b);
        Ok(z)
    }

    /// Conditional log-probabilities `ln p(x_i = v | x_<i)` for every sample,
    /// coordinate and level, laid out `[sample][coordinate][level]`.
    pub fn log_conditionals(&self, rows: &[&[f64]]) -> Result<Vec<f64>> {
        let mut z = self.logits(&one_hot(rows, self.bins), rows.len())?;
        log_softmax(&mut z, self.bins);
        Ok(z)
    }

    /// `ln p(x_i | x_<i)` at the observed values, `[sample][coordinate]`.
    pub fn log_likelihoods(&self, data: &Dataset) -> Result<Vec<f64>> {
        check_categorical(data, self.bins)?;
        if data.d() != self.dim() {
            return Err(Error::Bounds(format!("model covers {} coordinates, data has {}", self.dim(), data.d())));
        }
        let rows: Vec<&[f64]> = data.rows().collect();
        let mut out = Vec::with_capacity(data.n() * data.d());
        for chunk in rows.chunks(EVAL_CHUNK) {
            let lp = self.log_conditionals(chunk)?;
            for (s, row) in chunk.iter().enumerate() {
                for (i, &v) in row.iter().enumerate() {
                    out.push(lp[(s * row.len() + i) * self.bins + v as usize]);
                }
            }
        }
        Ok(out)
    }

    /// Writes `<path>` and `<path>.direct` checkpoints tagged with the ordering.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let meta = serde_json::json!({ "ordering": self.ordering, "bins": self.bins });
        save_checkpoint(path, &self.main, meta.clone())?;
        let mut direct = path.as_os_str().to_owned();
        direct.push(".direct");
        save_checkpoint(Path::new(&direct), &self.direct, meta)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let (main, meta) = load_checkpoint(path)?;
        let mut direct_path = path.as_os_str().to_owned();
        direct_path.push(".direct");
        let (direct, _) = load_checkpoint(Path::new(&direct_path))?;
        let ordering: Ordering = serde_json::from_value(meta["ordering"].clone())?;
        let bins = meta["bins"].as_u64().ok_or_else(|| Error::Format("checkpoint lacks bins".into()))? as usize;
        Ok(Self { ordering, bins, main, direct, train_nll: vec![], holdout_nll: vec![], holdout: vec![] })
    }
}

fn mean_nll(model: &ArModel, data: &Dataset) -> Result<f64> {
    let ll = model.log_likelihoods(data)?;
    Ok(-ll.iter().sum::<f64>() / data.n() as f64)
}

/// Maximum-likelihood training on the non-holdout split of `data`.
pub fn ar_train(data: &Dataset, cfg: &ArConfig) -> Result<ArModel> {
    cfg.validate()?;
    check_categorical(data, cfg.bins)?;
    let (train_idx, hold_idx) = holdout_split(data.n(), cfg.holdout_fraction, cfg.rng_seed);
    if train_idx.is_empty() || train_idx.len() < cfg.batch_size {
        return Err(Error::InsufficientData(format!(
            "{} training samples after the holdout split, batch size {}",
            train_idx.len(),
            cfg.batch_size
        )));
    }
    let (d, bins) = (data.d(), cfg.bins);
    let mut model = ArModel {
        ordering: cfg.ordering,
        bins,
        main: Network::new(made::main_spec(d, bins, &cfg.hidden, cfg.ordering, cfg.rng_seed)?)?,
        direct: Network::new(made::direct_spec(d, bins, cfg.ordering, cfg.rng_seed.wrapping_add(1))?)?,
        train_nll: Vec::with_capacity(cfg.epochs),
        holdout_nll: Vec::with_capacity(cfg.epochs),
        holdout: hold_idx.clone(),
    };
    let train = data.select(&train_idx)?;
    let hold = if hold_idx.is_empty() { None } else { Some(data.select(&hold_idx)?) };
    let mut adam_main = AdamState::new(model.main.params().len(), cfg.learning_rate);
    let mut adam_direct = AdamState::new(model.direct.params().len(), cfg.learning_rate);
    let mut rng = seeded_rng(cfg.rng_seed);
    let mut order: Vec<usize> = (0..train.n()).collect();
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            let rows: Vec<&[f64]> = batch.iter().map(|&i| train.row(i)).collect();
            let x = one_hot(&rows, bins);
            let n = rows.len();
            let pm = model.main.forward(&x, n, Mode::Eval)?;
            let pd = model.direct.forward(&x, n, Mode::Eval)?;
            // d(mean NLL)/d logits = softmax − one_hot, per sample / n
            let mut g: Vec<f64> = pm.output().iter().zip(pd.output()).map(|(a, b)| a + b).collect();
            log_softmax(&mut g, bins);
            let inv = 1.0 / n as f64;
            for (gi, xi) in g.iter_mut().zip(&x) {
                *gi = (gi.exp() - xi) * inv;
            }
            let gm = model.main.backward(&pm, &g)?;
            let gd = model.direct.backward(&pd, &g)?;
            adam_main.step(model.main.params_mut(), &gm)?;
            adam_direct.step(model.direct.params_mut(), &gd)?;
        }
        model.train_nll.push(mean_nll(&model, &train)?);
        if let Some(h) = &hold {
            model.holdout_nll.push(mean_nll(&model, h)?);
        }
    }
    Ok(model)
}

/// Per-sample `−Σ ln p(x_i | x_<i)` over the first `k` coordinates in the
/// model's ordering.
fn prefix_terms(model: &ArModel, eval: &Dataset, k: usize) -> Result<Vec<f64>> {
    let d = model.dim();
    if k > d {
        return Err(Error::Bounds(format!("prefix {k} exceeds D = {d}")));
    }
    let coords = model.ordering.prefix(k, d);
    let ll = model.log_likelihoods(eval)?;
    Ok(ll.chunks_exact(d).map(|row| -coords.iter().map(|&i| row[i]).sum::<f64>()).collect())
}

/// Monte Carlo cross-entropy of the first `k` coordinates (in the model's
/// ordering) over `eval_data`.
pub fn ar_entropy_prefix(model: &ArModel, eval_data: &Dataset, k: usize) -> Result<f64> {
    if k == 0 {
        return Ok(0.0);
    }
    let t = prefix_terms(model, eval_data, k)?;
    Ok(t.iter().sum::<f64>() / t.len() as f64)
}

pub(crate) fn check_compatible(partition: &Partition) -> Result<()> {
    if partition.family == Family::CenterSurround || !partition.is_prefix_cut() {
        return Err(Error::OrderingIncompatible(format!(
            "{} regions are not prefixes of a raster ordering",
            partition.family
        )));
    }
    Ok(())
}

/// `S_fwd(A) + S_rev(B) − (S_fwd(AB) + S_rev(AB)) / 2` over `eval_data`.
pub fn ar_mi_two_model(fwd: &ArModel, rev: &ArModel, eval_data: &Dataset, partition: &Partition) -> Result<MiEstimate> {
    check_compatible(partition)?;
    if fwd.ordering != Ordering::RasterForward || rev.ordering != Ordering::RasterReverse {
        return Err(Error::OrderingIncompatible("expected a forward and a reverse model".into()));
    }
    let d = fwd.dim();
    if partition.dim() != d || rev.dim() != d {
        return Err(Error::Partition(format!("partition covers {} coordinates, models {d}", partition.dim())));
    }
    let (na, nb) = (partition.idx_a.len(), partition.idx_b.len());
    let fa = prefix_terms(fwd, eval_data, na)?;
    let ff = prefix_terms(fwd, eval_data, d)?;
    let rb = prefix_terms(rev, eval_data, nb)?;
    let rf = prefix_terms(rev, eval_data, d)?;
    let terms: Vec<f64> = (0..eval_data.n()).map(|s| fa[s] + rb[s] - 0.5 * (ff[s] + rf[s])).collect();
    let (value, sigma) = mean_stderr(&terms);
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (s_ff, s_rf) = (mean(&ff), mean(&rf));
    Ok(MiEstimate::new("ar", value, sigma)
        .with("s_fwd_a", mean(&fa))
        .with("s_rev_b", mean(&rb))
        .with("s_fwd_full", s_ff)
        .with("s_rev_full", s_rf)
        .with("consistency_gap", (s_ff - s_rf).abs())
        .with("n_eval", eval_data.n() as f64))
}

/// A trained forward/reverse pair sharing one holdout split.
#[derive(Debug, Clone)]
pub struct ArPair {
    pub fwd: ArModel,
    pub rev: ArModel,
    pub eval: Dataset,
}

/// Trains both orderings with `cfg` (its ordering is ignored) and keeps the
/// common holdout split for evaluation.
pub fn ar_train_pair(data: &Dataset, cfg: &ArConfig) -> Result<ArPair> {
    let fwd = ar_train(data, &ArConfig { ordering: Ordering::RasterForward, ..cfg.clone() })?;
    let rev = ar_train(data, &ArConfig { ordering: Ordering::RasterReverse, ..cfg.clone() })?;
    if fwd.holdout.is_empty() {
        return Err(Error::InsufficientData("mutual information needs a non-empty holdout split".into()));
    }
    let eval = data.select(&fwd.holdout)?;
    Ok(ArPair { fwd, rev, eval })
}

/// `(L, S_fwd(A_L), S_rev(B_L))` rows for an entropy-curve export.
pub fn ar_entropy_curve(pair: &ArPair, partitions: &[Partition]) -> Result<Vec<(usize, f64, f64)>> {
    partitions
        .iter()
        .map(|p| {
            check_compatible(p)?;
            Ok((
                p.l,
                ar_entropy_prefix(&pair.fwd, &pair.eval, p.idx_a.len())?,
                ar_entropy_prefix(&pair.rev, &pair.eval, p.idx_b.len())?,
            ))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{make_partition, Geometry, GridShape};
    use rand::Rng;

    fn bits(n: usize, d: usize, seed: u64, copy_half: bool) -> Dataset {
        let mut rng = seeded_rng(seed);
        let mut values = Vec::with_capacity(n * d);
        for _ in 0..n {
            let row: Vec<f64> = (0..d).map(|_| f64::from(u8::from(rng.random::<bool>()))).collect();
            if copy_half {
                values.extend_from_slice(&row[..d / 2]);
                values.extend_from_slice(&row[..d / 2]);
            } else {
                values.extend(row);
            }
        }
        Dataset::new(n, d, values, None, Modality::CategoricalSynthetic, None).unwrap()
    }

    fn cfg(bins: usize, epochs: usize) -> ArConfig {
        ArConfig { bins, epochs, hidden: vec![32], batch_size: 32, learning_rate: 3e-3, ..ArConfig::default() }
    }

    #[test]
    fn conditionals_normalize_and_respect_causality() {
        let data = bits(64, 6, 1, false);
        for ordering in [Ordering::RasterForward, Ordering::RasterReverse] {
            let model = ar_train(&data, &ArConfig { ordering, ..cfg(3, 1) }).unwrap();
            let mut rng = seeded_rng(2);
            let base: Vec<f64> = (0..6).map(|_| rng.random_range(0..3) as f64).collect();
            let lp = model.log_conditionals(&[&base]).unwrap();
            for block in lp.chunks_exact(3) {
                assert!((block.iter().map(|l| l.exp()).sum::<f64>() - 1.0).abs() < 1e-9);
            }
            for j in 0..6 {
                let mut moved = base.clone();
                moved[j] = (moved[j] + 1.0) % 3.0;
                let lq = model.log_conditionals(&[&moved]).unwrap();
                for i in 0..6 {
                    if ordering.degree(i, 6) <= ordering.degree(j, 6) {
                        assert_eq!(lp[i * 3..i * 3 + 3], lq[i * 3..i * 3 + 3], "{ordering} i={i} j={j}");
                    }
                }
            }
        }
    }

    #[test]
    fn fair_bits_reach_ln2_per_coordinate() {
        let data = bits(5000, 4, 3, false);
        let model = ar_train(&data, &cfg(2, 10)).unwrap();
        let per_coord = model.holdout_nll.last().unwrap() / 4.0;
        assert!((per_coord - 2f64.ln()).abs() < 0.01, "{per_coord}");
        let eval = data.select(&model.holdout).unwrap();
        assert_eq!(ar_entropy_prefix(&model, &eval, 0).unwrap(), 0.0);
        assert!(matches!(ar_entropy_prefix(&model, &eval, 5), Err(Error::Bounds(_))));
        let mut last = 0.0;
        for k in 1..=4 {
            let s = ar_entropy_prefix(&model, &eval, k).unwrap();
            assert!(s >= last - 1e-9);
            last = s;
        }
    }

    #[test]
    fn copied_coordinate_becomes_deterministic() {
        let data = bits(3000, 2, 4, true);
        let model = ar_train(&data, &cfg(2, 30)).unwrap();
        for v in [0.0, 1.0] {
            let lp = model.log_conditionals(&[&[v, v]]).unwrap();
            assert!(lp[2 + v as usize].exp() >= 0.99, "{lp:?}");
        }
    }

    #[test]
    fn duplicated_halves_and_independent_bits() {
        let dup = bits(4000, 8, 5, true);
        let pair = ar_train_pair(&dup, &cfg(2, 25)).unwrap();
        let p = make_partition(Family::LeftRight, 4, &Geometry::Sequence { seq_len: 8, embed_dim: 1 }).unwrap();
        let est = ar_mi_two_model(&pair.fwd, &pair.rev, &pair.eval, &p).unwrap();
        let truth = 4.0 * 2f64.ln();
        assert!((est.value - truth).abs() < 0.05 * truth, "{est:?}");

        let ind = bits(4000, 8, 6, false);
        let pair = ar_train_pair(&ind, &cfg(2, 10)).unwrap();
        let est = ar_mi_two_model(&pair.fwd, &pair.rev, &pair.eval, &p).unwrap();
        assert!(est.value.abs() < 0.05, "{est:?}");
    }

    #[test]
    fn rejects_bad_inputs() {
        let cont = Dataset::from_rows(&vec![vec![0.5, 0.2]; 10], Modality::Image).unwrap();
        assert!(matches!(ar_train(&cont, &cfg(2, 1)), Err(Error::Modality(_))));
        let out_of_range = Dataset::new(2, 2, vec![0.0, 1.0, 2.0, 0.0], None, Modality::CategoricalSynthetic, None).unwrap();
        assert!(matches!(ar_train(&out_of_range, &cfg(2, 1)), Err(Error::Modality(_))));
        let single = Dataset::new(1, 2, vec![0.0, 1.0], None, Modality::CategoricalSynthetic, None).unwrap();
        let all_hold = ArConfig { holdout_fraction: 0.9, ..cfg(2, 1) };
        assert!(matches!(ar_train(&single, &all_hold), Err(Error::InsufficientData(_))));

        let data = bits(40, 16, 7, false);
        let pair = ar_train_pair(&data, &cfg(2, 1)).unwrap();
        let grid = Geometry::Grid(GridShape::new(4, 4, 1));
        let cs = make_partition(Family::CenterSurround, 2, &grid).unwrap();
        assert!(matches!(ar_mi_two_model(&pair.fwd, &pair.rev, &pair.eval, &cs), Err(Error::OrderingIncompatible(_))));
        let lr = make_partition(Family::LeftRight, 2, &grid).unwrap();
        assert!(matches!(ar_mi_two_model(&pair.fwd, &pair.rev, &pair.eval, &lr), Err(Error::OrderingIncompatible(_))));
        let tb = make_partition(Family::TopBottom, 2, &grid).unwrap();
        assert!(ar_mi_two_model(&pair.rev, &pair.fwd, &pair.eval, &tb).is_err());
        assert!(ar_mi_two_model(&pair.fwd, &pair.rev, &pair.eval, &tb).is_ok());
    }

    #[test]
    fn checkpoint_round_trip() {
        let data = bits(50, 3, 8, false);
        let model = ar_train(&data, &ArConfig { ordering: Ordering::RasterReverse, ..cfg(2, 2) }).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ar.bin");
        model.save(&path).unwrap();
        let back = ArModel::load(&path).unwrap();
        assert_eq!(back.ordering, Ordering::RasterReverse);
        assert_eq!(back.log_likelihoods(&data).unwrap(), model.log_likelihoods(&data).unwrap());
    }
}
