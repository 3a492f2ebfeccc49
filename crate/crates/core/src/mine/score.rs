use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Partition};
use crate::diffnet::{Activation, LayerSpec, NetworkSpec};
use crate::error::{Error, Result};

pub const FFNN_HIDDEN: usize = 500;
pub const CNN_CHANNELS: usize = 16;
pub const CNN_HIDDEN: usize = 64;
pub const DROPOUT_RATE: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreKind {
    Ffnn,
    Cnn,
}

impl FromStr for ScoreKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ffnn" => Ok(ScoreKind::Ffnn),
            "cnn" => Ok(ScoreKind::Cnn),
            other => Err(Error::Spec(format!("unknown score network {other:?}"))),
        }
    }
}

/// Spatial layout `[C, H, W]` a convolutional score net sees for `data`:
/// image channels over the grid, or embedding channels over a one-row
/// token axis for text.
fn spatial_shape(data: &Dataset) -> Result<[usize; 3]> {
    match (data.grid(), data.embed_dim()) {
        (Some(g), _) => Ok([g.c, g.h, g.w]),
        (None, Some(e)) => Ok([e, 1, data.d() / e]),
        (None, None) => Err(Error::Geometry(
            "a convolutional score needs a grid or a token sequence".into(),
        )),
    }
}

/// Score networks with a scalar output over all `D` coordinates.
///
/// * `ffnn`: `dense(D, 500, sigmoid) → dense(500, 1)`.
/// * `cnn` on a grid: `conv2d(C, 16, 3×3, relu) → maxpool(2) → dropout(0.25)
///   → flatten → dense(·, 64, relu) → dropout(0.25) → dense(64, 1)`.
/// * `cnn` on text: the same with a `1×3` kernel along the token axis and no
///   pooling.
pub fn make_score_net(kind: ScoreKind, data: &Dataset, seed: u64) -> Result<NetworkSpec> {
    let d = data.d();
    let layers = match kind {
        ScoreKind::Ffnn => {
            return NetworkSpec::new(
                vec![d],
                vec![
                    LayerSpec::dense(d, FFNN_HIDDEN, Activation::Sigmoid),
                    LayerSpec::dense(FFNN_HIDDEN, 1, Activation::Identity),
                ],
                seed,
            );
        }
        ScoreKind::Cnn => {
            let [c, h, w] = spatial_shape(data)?;
            let text = data.grid().is_none();
            let (kernel, need) = if text { ((1, 3), (1, 3)) } else { ((3, 3), (4, 4)) };
            if h < need.0 || w < need.1 {
                return Err(Error::Geometry(format!("{h}×{w} is too small for the convolutional score")));
            }
            let conv = LayerSpec::Conv2d {
                in_ch: c,
                out_ch: CNN_CHANNELS,
                kernel,
                stride: 1,
                padding: 0,
                activation: Activation::Relu,
                mask: None,
            };
            let (ho, wo) = (h - kernel.0 + 1, w - kernel.1 + 1);
            let mut layers = vec![conv];
            let flat = if text {
                CNN_CHANNELS * ho * wo
            } else {
                layers.push(LayerSpec::MaxPool2d { kernel: 2 });
                CNN_CHANNELS * (ho / 2) * (wo / 2)
            };
            layers.extend([
                LayerSpec::Dropout { rate: DROPOUT_RATE },
                LayerSpec::Flatten,
                LayerSpec::dense(flat, CNN_HIDDEN, Activation::Relu),
                LayerSpec::Dropout { rate: DROPOUT_RATE },
                LayerSpec::dense(CNN_HIDDEN, 1, Activation::Identity),
            ]);
            (vec![c, h, w], layers)
        }
    };
    NetworkSpec::new(layers.0, layers.1, seed)
}

/// Input slot of each coordinate of the concatenated `(A, B)` sample.
/// Flat score nets read A then B; spatial ones get every coordinate at its
/// own grid position, so complementary blocks tile the full image.
pub fn score_placement(spec: &NetworkSpec, data: &Dataset, partition: &Partition) -> Result<Vec<usize>> {
    let order = partition.idx_a.iter().chain(&partition.idx_b);
    if spec.input_shape.len() != 3 {
        return Ok((0..partition.dim()).collect());
    }
    let [c, h, w] = spatial_shape(data)?;
    if spec.input_shape != [c, h, w] {
        return Err(Error::Geometry(format!(
            "score net expects {:?}, data is laid out as {:?}",
            spec.input_shape,
            [c, h, w]
        )));
    }
    Ok(match data.grid() {
        // stored (row, col, ch); the net reads (ch, row, col)
        Some(_) => order.map(|&j| (j % c) * h * w + (j / c)).collect(),
        // stored (token, dim); the net reads (dim, token)
        None => order.map(|&j| (j % c) * w + j / c).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{make_partition, Family, GridShape, Modality};
    use crate::diffnet::Network;

    fn grid_data(h: usize, w: usize, c: usize) -> Dataset {
        let d = h * w * c;
        Dataset::new(2, d, (0..2 * d).map(|v| v as f64).collect(), Some(GridShape::new(h, w, c)), Modality::Image, None)
            .unwrap()
    }

    #[test]
    fn ffnn_parameter_count() {
        let data = Dataset::new(1, 784, vec![0.0; 784], None, Modality::Image, None).unwrap();
        let spec = make_score_net(ScoreKind::Ffnn, &data, 0).unwrap();
        assert_eq!(spec.param_count(), 784 * 500 + 500 + 500 + 1);
    }

    #[test]
    fn cnn_layer_order_and_scalar_output() {
        let data = grid_data(16, 16, 1);
        let spec = make_score_net(ScoreKind::Cnn, &data, 0).unwrap();
        let names: Vec<_> = spec.layers.iter().map(|l| l.name()).collect();
        assert_eq!(names, ["conv2d", "maxpool2d", "dropout", "flatten", "dense", "dropout", "dense"]);
        assert_eq!(spec.output_len().unwrap(), 1);
        let ffnn = make_score_net(ScoreKind::Ffnn, &data, 0).unwrap();
        assert_eq!(ffnn.output_len().unwrap(), 1);
    }

    #[test]
    fn cnn_needs_spatial_layout() {
        let flat = Dataset::new(1, 10, vec![0.0; 10], None, Modality::Image, None).unwrap();
        assert!(matches!(make_score_net(ScoreKind::Cnn, &flat, 0), Err(Error::Geometry(_))));
        let text = Dataset::new(1, 12, vec![0.0; 12], None, Modality::TextEmbedding, Some(3)).unwrap();
        let spec = make_score_net(ScoreKind::Cnn, &text, 0).unwrap();
        assert_eq!(spec.input_shape, vec![3, 1, 4]);
        assert_eq!(spec.output_len().unwrap(), 1);
    }

    #[test]
    fn placement_reassembles_grid() {
        let data = grid_data(4, 5, 2);
        let spec = make_score_net(ScoreKind::Cnn, &data, 0).unwrap();
        let p = make_partition(Family::CenterSurround, 2, &data.geometry()).unwrap();
        let place = score_placement(&spec, &data, &p).unwrap();
        let row = data.row(1);
        let mut chw = vec![f64::NAN; data.d()];
        for (k, &j) in p.idx_a.iter().chain(&p.idx_b).enumerate() {
            chw[place[k]] = row[j];
        }
        for ch in 0..2 {
            for r in 0..4 {
                for col in 0..5 {
                    assert_eq!(chw[(ch * 4 + r) * 5 + col], row[(r * 5 + col) * 2 + ch]);
                }
            }
        }
        let net = Network::new(spec).unwrap();
        assert_eq!(net.predict(&chw, 1).unwrap().len(), 1);
    }
}
