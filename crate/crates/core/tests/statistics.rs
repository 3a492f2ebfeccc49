//! Seed-sweep checks of statistical properties of the generators and estimators.

use miscale::autoregressive::{ar_train, ArConfig};
use miscale::data::{make_partition, Dataset, Family, Geometry, Modality};
use miscale::diffnet::{AdamState, Activation, LayerSpec, Mode, Network, NetworkSpec};
use miscale::knn::{knn_mi, KnnConfig};
use miscale::mine::{mine_train, MineConfig};
use miscale::synthetic::{sample_gaussian, sample_matching, sample_pairs, GaussianSpec, RandomPairSpec};

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    0.5 * (xs[(n - 1) / 2] + xs[n / 2])
}

fn ols_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

#[test]
fn pair_correlations_decay_algebraically() {
    // Sites already matched thin out short-distance partners, so the law is
    // read off beyond the first few lattice spacings.
    let (n, alpha, samples, seeds) = (512, 1.5, 2000, 200);
    let distances: Vec<usize> = vec![8, 10, 13, 16, 20, 25, 32, 40, 50, 64];
    let mut mean_corr = vec![0.0; distances.len()];
    for seed in 0..seeds {
        let m = sample_matching(&RandomPairSpec::power_law(n, alpha, 2), seed).unwrap();
        let data = sample_pairs(&m, 2, samples, 100 + seed).unwrap();
        let cols: Vec<Vec<f64>> = (0..n)
            .map(|j| {
                let c: Vec<f64> = data.rows().map(|r| r[j]).collect();
                let mean = c.iter().sum::<f64>() / c.len() as f64;
                let sd = (c.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / c.len() as f64).sqrt();
                c.iter().map(|v| (v - mean) / sd).collect()
            })
            .collect();
        for (k, &d) in distances.iter().enumerate() {
            let total: f64 = (0..n - d)
                .map(|x| cols[x].iter().zip(&cols[x + d]).map(|(a, b)| a * b).sum::<f64>() / samples as f64)
                .sum();
            mean_corr[k] += total / (n - d) as f64 / seeds as f64;
        }
    }
    assert!(mean_corr.iter().all(|&c| c > 0.0), "{mean_corr:?}");
    let lx: Vec<f64> = distances.iter().map(|&d| (d as f64).ln()).collect();
    let ly: Vec<f64> = mean_corr.iter().map(|c| c.ln()).collect();
    let slope = ols_slope(&lx, &ly);
    assert!((slope + alpha).abs() <= 0.15, "log-log slope {slope}");
}

#[test]
fn knn_error_shrinks_with_sample_size() {
    let spec = GaussianSpec::bivariate(0.9).unwrap();
    let p = make_partition(Family::LeftRight, 1, &Geometry::Sequence { seq_len: 2, embed_dim: 1 }).unwrap();
    let exact = -0.5 * (1.0f64 - 0.81).ln();
    let err = |n: usize| {
        (0..10)
            .map(|s| (knn_mi(&sample_gaussian(&spec, n, 50 + s).unwrap(), &p, &KnnConfig::default()).unwrap().value - exact).abs())
            .sum::<f64>()
            / 10.0
    };
    let (small, large) = (err(2000), err(20_000));
    assert!(large <= small, "{large} > {small}");
}

#[test]
fn knn_monotone_transform_shift_is_small_at_scale() {
    let spec = GaussianSpec::bivariate(0.9).unwrap();
    let data = sample_gaussian(&spec, 10_000, 9).unwrap();
    let p = make_partition(Family::LeftRight, 1, &data.geometry()).unwrap();
    let warped: Vec<f64> = data.rows().flat_map(|r| [r[0].powi(3) + r[0], r[1]]).collect();
    let warped = Dataset::new(data.n(), 2, warped, None, Modality::CategoricalSynthetic, None).unwrap();
    let a = knn_mi(&data, &p, &KnnConfig::default()).unwrap().value;
    let b = knn_mi(&warped, &p, &KnnConfig::default()).unwrap().value;
    assert!((a - b).abs() < 0.05, "{a} vs {b}");
}

fn dense(width: usize, seed: u64) -> NetworkSpec {
    NetworkSpec::new(
        vec![2],
        vec![LayerSpec::dense(2, width, Activation::Relu), LayerSpec::dense(width, 1, Activation::Identity)],
        seed,
    )
    .unwrap()
}

#[test]
fn wider_score_networks_do_not_lose_bound() {
    let spec = GaussianSpec::bivariate(0.9).unwrap();
    let data = sample_gaussian(&spec, 10_000, 12).unwrap();
    let p = make_partition(Family::LeftRight, 1, &data.geometry()).unwrap();
    let run = |width: usize| {
        median(
            (0..10)
                .map(|s| {
                    let mut cfg = MineConfig::new(dense(width, s), 2000, 40 + s);
                    cfg.learning_rate = 1e-3;
                    cfg.eval_window = 400;
                    mine_train(&data, &p, &cfg).unwrap().estimate.value
                })
                .collect(),
        )
    };
    let (narrow, wide) = (run(8), run(64));
    assert!(wide >= narrow - 0.02, "width 64: {wide}, width 8: {narrow}");
}

#[test]
fn autoregressive_holdout_nll_bounds_true_entropy() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
    let d = 8;
    let values: Vec<f64> = (0..4000 * d).map(|_| f64::from(u8::from(rng.random::<bool>()))).collect();
    let data = Dataset::new(4000, d, values, None, Modality::CategoricalSynthetic, None).unwrap();
    let cfg = ArConfig { bins: 2, epochs: 10, hidden: vec![32], batch_size: 64, ..ArConfig::default() };
    let model = ar_train(&data, &cfg).unwrap();
    let entropy = d as f64 * 2f64.ln();
    let holdout = data.select(&model.holdout).unwrap();
    let per_sample: Vec<f64> = model
        .log_likelihoods(&holdout)
        .unwrap()
        .chunks(d)
        .map(|c| -c.iter().sum::<f64>())
        .collect();
    let n = per_sample.len() as f64;
    let mean = per_sample.iter().sum::<f64>() / n;
    let se = (per_sample.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt();
    assert!(mean >= entropy - 3.0 * se, "holdout NLL {mean} below entropy {entropy} by more than 3 se {se}");
    assert!(mean - entropy < 0.05, "{mean} vs {entropy}");
}

#[test]
fn seeded_training_trajectories_are_bit_identical() {
    let trajectory = || {
        let spec = NetworkSpec::new(
            vec![1, 6, 6],
            vec![
                LayerSpec::conv2d(1, 3, 3, Activation::Relu),
                LayerSpec::MaxPool2d { kernel: 2 },
                LayerSpec::Dropout { rate: 0.25 },
                LayerSpec::Flatten,
                LayerSpec::dense(12, 1, Activation::Identity),
            ],
            5,
        )
        .unwrap();
        let mut net = Network::new(spec).unwrap();
        let mut adam = AdamState::new(net.params().len(), 1e-2);
        let input: Vec<f64> = (0..4 * 36).map(|i| ((i * 7919) % 13) as f64 / 13.0).collect();
        let mut history = Vec::new();
        for step in 0..20 {
            let pass = net.forward(&input, 4, Mode::Train { seed: step }).unwrap();
            let grads = net.backward(&pass, &[1.0, -1.0, 0.5, 0.25]).unwrap();
            adam.step(net.params_mut(), &grads).unwrap();
            history.extend_from_slice(net.params());
        }
        history
    };
    let (a, b) = (trajectory(), trajectory());
    assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
}
