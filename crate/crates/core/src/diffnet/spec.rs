use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Identity,
    Relu,
    Sigmoid,
}

impl Activation {
    pub(crate) fn apply(&self, z: f64) -> f64 {
        match self {
            Activation::Identity => z,
            Activation::Relu => z.max(0.0),
            Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
        }
    }

    /// Derivative expressed through the activation's output.
    pub(crate) fn grad_from_output(&self, y: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => f64::from(u8::from(y > 0.0)),
            Activation::Sigmoid => y * (1.0 - y),
        }
    }
}

/// One layer of a feed-forward stack. Optional masks are 0/1 arrays with
/// the layout of the weights and are multiplied into them on every pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LayerSpec {
    Dense {
        inputs: usize,
        outputs: usize,
        activation: Activation,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mask: Option<Vec<f64>>,
    },
    Conv2d {
        in_ch: usize,
        out_ch: usize,
        kernel: (usize, usize),
        stride: usize,
        padding: usize,
        activation: Activation,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mask: Option<Vec<f64>>,
    },
    MaxPool2d {
        kernel: usize,
    },
    Dropout {
        rate: f64,
    },
    Flatten,
}

impl LayerSpec {
    pub fn dense(inputs: usize, outputs: usize, activation: Activation) -> Self {
        LayerSpec::Dense { inputs, outputs, activation, mask: None }
    }

    pub fn conv2d(in_ch: usize, out_ch: usize, kernel: usize, activation: Activation) -> Self {
        LayerSpec::Conv2d {
            in_ch,
            out_ch,
            kernel: (kernel, kernel),
            stride: 1,
            padding: 0,
            activation,
            mask: None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            LayerSpec::Dense { mask: None, .. } => "dense",
            LayerSpec::Dense { .. } => "masked_dense",
            LayerSpec::Conv2d { mask: None, .. } => "conv2d",
            LayerSpec::Conv2d { .. } => "masked_conv2d",
            LayerSpec::MaxPool2d { .. } => "maxpool2d",
            LayerSpec::Dropout { .. } => "dropout",
            LayerSpec::Flatten => "flatten",
        }
    }

    /// `(weight count, bias count)`.
    pub fn param_shape(&self) -> (usize, usize) {
        match *self {
            LayerSpec::Dense { inputs, outputs, .. } => (inputs * outputs, outputs),
            LayerSpec::Conv2d { in_ch, out_ch, kernel, .. } => {
                (out_ch * in_ch * kernel.0 * kernel.1, out_ch)
            }
            _ => (0, 0),
        }
    }

    /// Per-sample output shape for a given input shape.
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        let bad = |why: String| Err(Error::Composition(format!("{}: {why}", self.name())));
        match self {
            LayerSpec::Dense { inputs, outputs, mask, .. } => {
                if input != [*inputs] {
                    return bad(format!("expects [{inputs}], got {input:?}"));
                }
                if mask.as_ref().is_some_and(|m| m.len() != inputs * outputs) {
                    return bad("mask size differs from weights".into());
                }
                Ok(vec![*outputs])
            }
            LayerSpec::Conv2d { in_ch, out_ch, kernel, stride, padding, mask, .. } => {
                let &[c, h, w] = input else {
                    return bad(format!("expects [C, H, W], got {input:?}"));
                };
                if c != *in_ch || *stride == 0 || kernel.0 == 0 || kernel.1 == 0 {
                    return bad(format!("expects {in_ch} channels, got {input:?}"));
                }
                if h + 2 * padding < kernel.0 || w + 2 * padding < kernel.1 {
                    return bad(format!("kernel {kernel:?} larger than input {input:?}"));
                }
                if mask.as_ref().is_some_and(|m| m.len() != self.param_shape().0) {
                    return bad("mask size differs from weights".into());
                }
                let ho = (h + 2 * padding - kernel.0) / stride + 1;
                let wo = (w + 2 * padding - kernel.1) / stride + 1;
                Ok(vec![*out_ch, ho, wo])
            }
            LayerSpec::MaxPool2d { kernel } => {
                let &[c, h, w] = input else {
                    return bad(format!("expects [C, H, W], got {input:?}"));
                };
                if *kernel == 0 || h < *kernel || w < *kernel {
                    return bad(format!("pool {kernel} does not fit {input:?}"));
                }
                Ok(vec![c, h / kernel, w / kernel])
            }
            LayerSpec::Dropout { rate } => {
                if !(0.0..1.0).contains(rate) {
                    return bad(format!("rate {rate} outside [0, 1)"));
                }
                Ok(input.to_vec())
            }
            LayerSpec::Flatten => Ok(vec![input.iter().product()]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    /// Per-sample input shape: `[F]` or `[C, H, W]`.
    pub input_shape: Vec<usize>,
    pub layers: Vec<LayerSpec>,
    /// Seed for parameter initialization.
    pub seed: u64,
}

impl NetworkSpec {
    pub fn new(input_shape: Vec<usize>, layers: Vec<LayerSpec>, seed: u64) -> Result<Self> {
        let spec = Self { input_shape, layers, seed };
        spec.shapes()?;
        Ok(spec)
    }

    /// Activation shapes from input through every layer.
    pub fn shapes(&self) -> Result<Vec<Vec<usize>>> {
        if self.input_shape.is_empty() || self.input_shape.contains(&0) {
            return Err(Error::Composition(format!("bad input shape {:?}", self.input_shape)));
        }
        let mut shapes = vec![self.input_shape.clone()];
        for layer in &self.layers {
            let next = layer.output_shape(shapes.last().unwrap())?;
            shapes.push(next);
        }
        Ok(shapes)
    }

    pub fn input_len(&self) -> usize {
        self.input_shape.iter().product()
    }

    pub fn output_len(&self) -> Result<usize> {
        Ok(self.shapes()?.last().unwrap().iter().product())
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.param_shape().0 + l.param_shape().1).sum()
    }

    pub fn has_dropout(&self) -> bool {
        self.layers.iter().any(|l| matches!(l, LayerSpec::Dropout { rate } if *rate > 0.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conv_shape_algebra() {
        for k in 1..=5 {
            let conv = LayerSpec::conv2d(2, 3, k, Activation::Relu);
            assert_eq!(conv.output_shape(&[2, 9, 7]).unwrap(), vec![3, 10 - k, 8 - k]);
        }
        let strided = LayerSpec::Conv2d {
            in_ch: 1,
            out_ch: 1,
            kernel: (3, 3),
            stride: 2,
            padding: 1,
            activation: Activation::Identity,
            mask: None,
        };
        assert_eq!(strided.output_shape(&[1, 8, 8]).unwrap(), vec![1, 4, 4]);
    }

    #[test]
    fn composition_errors() {
        let bad = NetworkSpec::new(
            vec![4],
            vec![LayerSpec::dense(4, 3, Activation::Relu), LayerSpec::dense(4, 1, Activation::Identity)],
            0,
        );
        assert!(matches!(bad, Err(Error::Composition(_))));
        let conv_on_flat =
            NetworkSpec::new(vec![16], vec![LayerSpec::conv2d(1, 1, 3, Activation::Relu)], 0);
        assert!(conv_on_flat.is_err());
        let rate = NetworkSpec::new(vec![3], vec![LayerSpec::Dropout { rate: 1.0 }], 0);
        assert!(rate.is_err());
    }

    #[test]
    fn spec_json_round_trip() {
        let spec = NetworkSpec::new(
            vec![1, 6, 6],
            vec![
                LayerSpec::conv2d(1, 4, 3, Activation::Relu),
                LayerSpec::MaxPool2d { kernel: 2 },
                LayerSpec::Dropout { rate: 0.25 },
                LayerSpec::Flatten,
                LayerSpec::dense(16, 1, Activation::Identity),
            ],
            7,
        )
        .unwrap();
        let json = serde_json::to_string(&spec).unwrap();
        assert_eq!(serde_json::from_str::<NetworkSpec>(&json).unwrap(), spec);
        assert_eq!(spec.param_count(), 4 * 9 + 4 + 16 + 1);
    }
}
