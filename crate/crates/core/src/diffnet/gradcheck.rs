//! Central finite-difference verification of reverse-mode gradients.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::network::{Mode, Network};
use super::spec::{Activation, LayerSpec, NetworkSpec};
use crate::error::Result;
use crate::seeded_rng;

pub const STEP: f64 = 1e-5;
pub const TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub case: String,
    pub params_checked: usize,
    pub max_rel_error: f64,
    pub passed: bool,
}

/// `|a − f| / max(|a|, |f|, 1e-6)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

fn objective(net: &Network, input: &[f64], batch: usize, mode: Mode, upstream: &[f64]) -> Result<f64> {
    let pass = net.forward(input, batch, mode)?;
    Ok(pass.output().iter().zip(upstream).map(|(y, u)| y * u).sum())
}

/// Compares `backward` against central differences of `Σ upstream · output`
/// for every parameter of `net`.
pub fn check_network(case: &str, net: &Network, batch: usize, mode: Mode, seed: u64) -> Result<GradCheckReport> {
    let mut rng = seeded_rng(seed);
    let input: Vec<f64> = (0..batch * net.input_len()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let upstream: Vec<f64> = (0..batch * net.output_len()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let pass = net.forward(&input, batch, mode)?;
    let analytic = net.backward(&pass, &upstream)?;
    let mut probe = net.clone();
    let mut worst: f64 = 0.0;
    for i in 0..analytic.len() {
        let orig = probe.params()[i];
        probe.params_mut()[i] = orig + STEP;
        let up = objective(&probe, &input, batch, mode, &upstream)?;
        probe.params_mut()[i] = orig - STEP;
        let down = objective(&probe, &input, batch, mode, &upstream)?;
        probe.params_mut()[i] = orig;
        worst = worst.max(relative_error(analytic[i], (up - down) / (2.0 * STEP)));
    }
    Ok(GradCheckReport {
        case: case.to_string(),
        params_checked: analytic.len(),
        max_rel_error: worst,
        passed: worst < TOLERANCE,
    })
}

fn causal_mask(len: usize, cols: usize) -> Vec<f64> {
    (0..len).map(|i| f64::from(u8::from((i % cols) <= (i / cols) % cols))).collect()
}

/// One small randomly initialized network per layer type.
pub fn suite_cases(seed: u64) -> Result<Vec<(String, Network, Mode)>> {
    use Activation::*;
    let conv = |in_ch, out_ch, kernel, stride, padding, activation, mask| LayerSpec::Conv2d {
        in_ch,
        out_ch,
        kernel,
        stride,
        padding,
        activation,
        mask,
    };
    let specs: Vec<(&str, Vec<usize>, Vec<LayerSpec>, Mode)> = vec![
        (
            "dense",
            vec![5],
            vec![LayerSpec::dense(5, 4, Sigmoid), LayerSpec::dense(4, 2, Identity)],
            Mode::Eval,
        ),
        (
            "masked_dense",
            vec![4],
            vec![
                LayerSpec::Dense { inputs: 4, outputs: 4, activation: Relu, mask: Some(causal_mask(16, 4)) },
                LayerSpec::dense(4, 3, Sigmoid),
            ],
            Mode::Eval,
        ),
        (
            "conv2d",
            vec![2, 5, 5],
            vec![conv(2, 3, (3, 3), 1, 0, Sigmoid, None), LayerSpec::Flatten, LayerSpec::dense(27, 1, Identity)],
            Mode::Eval,
        ),
        (
            "conv2d_strided_padded_masked",
            vec![1, 6, 6],
            vec![
                conv(1, 2, (3, 3), 2, 1, Relu, Some(causal_mask(18, 3))),
                LayerSpec::Flatten,
                LayerSpec::dense(18, 2, Identity),
            ],
            Mode::Eval,
        ),
        (
            "conv2d_1x3",
            vec![3, 1, 7],
            vec![conv(3, 2, (1, 3), 1, 0, Sigmoid, None), LayerSpec::Flatten, LayerSpec::dense(10, 1, Identity)],
            Mode::Eval,
        ),
        (
            "maxpool2d",
            vec![1, 6, 6],
            vec![
                conv(1, 2, (3, 3), 1, 1, Sigmoid, None),
                LayerSpec::MaxPool2d { kernel: 2 },
                LayerSpec::Flatten,
                LayerSpec::dense(18, 1, Identity),
            ],
            Mode::Eval,
        ),
        (
            "dropout_train",
            vec![6],
            vec![
                LayerSpec::dense(6, 8, Sigmoid),
                LayerSpec::Dropout { rate: 0.25 },
                LayerSpec::dense(8, 2, Identity),
            ],
            Mode::Train { seed: seed ^ 0xD0 },
        ),
    ];
    specs
        .into_iter()
        .map(|(name, shape, layers, mode)| {
            Ok((name.to_string(), Network::new(NetworkSpec::new(shape, layers, seed)?)?, mode))
        })
        .collect()
}

/// Runs the finite-difference check over every case of [`suite_cases`].
pub fn gradcheck_suite(seed: u64) -> Result<Vec<GradCheckReport>> {
    suite_cases(seed)?
        .into_iter()
        .map(|(name, net, mode)| check_network(&name, &net, 3, mode, seed.wrapping_add(1)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_layer_type_passes() {
        for seed in [0, 1, 2] {
            for r in gradcheck_suite(seed).unwrap() {
                assert!(r.passed, "seed {seed}: {r:?}");
                assert!(r.params_checked > 0);
            }
        }
    }

    #[test]
    fn detects_a_wrong_gradient() {
        assert!(relative_error(1.0, 1.001) > TOLERANCE);
        assert!(relative_error(1e-11, 0.0) < TOLERANCE);
    }
}
