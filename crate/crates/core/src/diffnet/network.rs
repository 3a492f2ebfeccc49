use rand::Rng;

use super::ops::{col2im, gemm, im2col, ConvGeom};
use super::spec::{Activation, LayerSpec, NetworkSpec};
use crate::error::{Error, Result};
use crate::seeded_rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Eval,
    /// Dropout active, masks drawn from `seed`.
    Train { seed: u64 },
}

/// Parameter slice of one layer inside the flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct LayerOffsets {
    pub weights: usize,
    pub weights_len: usize,
    pub bias: usize,
    pub bias_len: usize,
}

/// A feed-forward network: its spec plus one flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    spec: NetworkSpec,
    shapes: Vec<Vec<usize>>,
    offsets: Vec<LayerOffsets>,
    params: Vec<f64>,
}

#[derive(Debug, Clone)]
enum Saved {
    None,
    Cols(Vec<f64>),
    Argmax(Vec<usize>),
    DropMask(Vec<f64>),
}

/// Activations recorded by a forward pass, consumed by [`Network::backward`].
#[derive(Debug, Clone)]
pub struct Pass {
    batch: usize,
    param_count: usize,
    /// `acts[0]` is the input; `acts[i + 1]` the output of layer `i`.
    acts: Vec<Vec<f64>>,
    saved: Vec<Saved>,
}

impl Pass {
    pub fn output(&self) -> &[f64] {
        self.acts.last().unwrap()
    }

    pub fn batch(&self) -> usize {
        self.batch
    }
}

fn offsets_for(spec: &NetworkSpec) -> Vec<LayerOffsets> {
    let mut at = 0;
    spec.layers
        .iter()
        .map(|l| {
            let (w, b) = l.param_shape();
            let o = LayerOffsets { weights: at, weights_len: w, bias: at + w, bias_len: b };
            at += w + b;
            o
        })
        .collect()
}

impl Network {
    /// Glorot-uniform weights in `±sqrt(6 / (fan_in + fan_out))`, zero biases.
    pub fn new(spec: NetworkSpec) -> Result<Self> {
        let shapes = spec.shapes()?;
        let offsets = offsets_for(&spec);
        let mut params = vec![0.0; spec.param_count()];
        let mut rng = seeded_rng(spec.seed);
        for (layer, off) in spec.layers.iter().zip(&offsets) {
            let (fan_in, fan_out) = match *layer {
                LayerSpec::Dense { inputs, outputs, .. } => (inputs, outputs),
                LayerSpec::Conv2d { in_ch, out_ch, kernel, .. } => {
                    (in_ch * kernel.0 * kernel.1, out_ch * kernel.0 * kernel.1)
                }
                _ => continue,
            };
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for p in &mut params[off.weights..off.weights + off.weights_len] {
                *p = rng.random_range(-limit..limit);
            }
        }
        Ok(Self { spec, shapes, offsets, params })
    }

    pub fn from_parts(spec: NetworkSpec, params: Vec<f64>) -> Result<Self> {
        let mut net = Self::new(spec)?;
        if params.len() != net.params.len() {
            return Err(Error::Composition(format!(
                "{} parameters given, spec needs {}",
                params.len(),
                net.params.len()
            )));
        }
        net.params = params;
        Ok(net)
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn offsets(&self) -> &[LayerOffsets] {
        &self.offsets
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn input_len(&self) -> usize {
        self.spec.input_len()
    }

    pub fn output_len(&self) -> usize {
        self.shapes.last().unwrap().iter().product()
    }

    fn masked_weights(&self, i: usize) -> std::borrow::Cow<'_, [f64]> {
        let o = self.offsets[i];
        let w = &self.params[o.weights..o.weights + o.weights_len];
        let mask = match &self.spec.layers[i] {
            LayerSpec::Dense { mask, .. } | LayerSpec::Conv2d { mask, .. } => mask.as_ref(),
            _ => None,
        };
        match mask {
            Some(m) => w.iter().zip(m).map(|(a, b)| a * b).collect::<Vec<_>>().into(),
            None => w.into(),
        }
    }

    fn conv_geom(&self, i: usize) -> ConvGeom {
        let (inp, out) = (&self.shapes[i], &self.shapes[i + 1]);
        match self.spec.layers[i] {
            LayerSpec::Conv2d { kernel, stride, padding, .. } => ConvGeom {
                c: inp[0],
                h: inp[1],
                w: inp[2],
                kh: kernel.0,
                kw: kernel.1,
                stride,
                pad: padding,
                ho: out[1],
                wo: out[2],
            },
            _ => unreachable!(),
        }
    }

    /// Runs a batch of `batch` row-major samples through the network.
    pub fn forward(&self, input: &[f64], batch: usize, mode: Mode) -> Result<Pass> {
        let in_len = self.input_len();
        if batch == 0 || input.len() != batch * in_len {
            return Err(Error::Composition(format!(
                "input of {} values is not {batch} samples of {in_len}",
                input.len()
            )));
        }
        let mut acts = Vec::with_capacity(self.spec.layers.len() + 1);
        let mut saved = Vec::with_capacity(self.spec.layers.len());
        acts.push(input.to_vec());
        for (i, layer) in self.spec.layers.iter().enumerate() {
            let x = acts.last().unwrap();
            let out_len: usize = self.shapes[i + 1].iter().product();
            let (y, s) = match *layer {
                LayerSpec::Dense { inputs, outputs, activation, .. } => {
                    let w = self.masked_weights(i);
                    let o = self.offsets[i];
                    let bias = &self.params[o.bias..o.bias + o.bias_len];
                    let mut y: Vec<f64> = bias.iter().copied().cycle().take(batch * outputs).collect();
                    gemm(batch, inputs, outputs, x, false, &w, true, 1.0, &mut y);
                    activate(&mut y, activation);
                    (y, Saved::None)
                }
                LayerSpec::Conv2d { out_ch, activation, .. } => {
                    let g = self.conv_geom(i);
                    let w = self.masked_weights(i);
                    let o = self.offsets[i];
                    let bias = &self.params[o.bias..o.bias + o.bias_len];
                    let (k, p) = (g.rows(), g.cols());
                    let sample_in = g.c * g.h * g.w;
                    let mut cols = vec![0.0; batch * k * p];
                    let mut y = vec![0.0; batch * out_len];
                    for s in 0..batch {
                        let c = &mut cols[s * k * p..(s + 1) * k * p];
                        im2col(&g, &x[s * sample_in..(s + 1) * sample_in], c);
                        let ys = &mut y[s * out_len..(s + 1) * out_len];
                        for (oc, row) in ys.chunks_exact_mut(p).enumerate() {
                            row.fill(bias[oc]);
                        }
                        gemm(out_ch, k, p, &w, false, c, false, 1.0, ys);
                    }
                    activate(&mut y, activation);
                    (y, Saved::Cols(cols))
                }
                LayerSpec::MaxPool2d { kernel } => {
                    let (c, h, w) = (self.shapes[i][0], self.shapes[i][1], self.shapes[i][2]);
                    let (ho, wo) = (h / kernel, w / kernel);
                    let mut y = vec![0.0; batch * out_len];
                    let mut arg = vec![0; batch * out_len];
                    for s in 0..batch {
                        let xs = &x[s * c * h * w..(s + 1) * c * h * w];
                        for ch in 0..c {
                            for oy in 0..ho {
                                for ox in 0..wo {
                                    let mut best = (f64::NEG_INFINITY, 0);
                                    for ky in 0..kernel {
                                        for kx in 0..kernel {
                                            let idx = (ch * h + oy * kernel + ky) * w + ox * kernel + kx;
                                            if xs[idx] > best.0 {
                                                best = (xs[idx], idx);
                                            }
                                        }
                                    }
                                    let at = s * out_len + (ch * ho + oy) * wo + ox;
                                    y[at] = best.0;
                                    arg[at] = best.1;
                                }
                            }
                        }
                    }
                    (y, Saved::Argmax(arg))
                }
                LayerSpec::Dropout { rate } => match mode {
                    Mode::Train { seed } if rate > 0.0 => {
                        let mut rng = seeded_rng(seed ^ (0x9E37_79B9_7F4A_7C15u64.wrapping_mul(i as u64 + 1)));
                        let keep = 1.0 / (1.0 - rate);
                        let mask: Vec<f64> = (0..x.len())
                            .map(|_| if rng.random::<f64>() < rate { 0.0 } else { keep })
                            .collect();
                        let y = x.iter().zip(&mask).map(|(a, m)| a * m).collect();
                        (y, Saved::DropMask(mask))
                    }
                    _ => (x.clone(), Saved::None),
                },
                LayerSpec::Flatten => (x.clone(), Saved::None),
            };
            acts.push(y);
            saved.push(s);
        }
        Ok(Pass { batch, param_count: self.params.len(), acts, saved })
    }

    /// Output only, in evaluation mode.
    pub fn predict(&self, input: &[f64], batch: usize) -> Result<Vec<f64>> {
        let mut pass = self.forward(input, batch, Mode::Eval)?;
        Ok(pass.acts.pop().unwrap())
    }

    /// Gradient of `Σ upstream · output` with respect to every parameter,
    /// laid out like [`Network::params`].
    pub fn backward(&self, pass: &Pass, upstream: &[f64]) -> Result<Vec<f64>> {
        let batch = pass.batch;
        if pass.param_count != self.params.len() || pass.acts.len() != self.spec.layers.len() + 1 {
            return Err(Error::State("pass was recorded by a different network".into()));
        }
        if upstream.len() != batch * self.output_len() {
            return Err(Error::State(format!(
                "upstream gradient has {} entries, expected {}",
                upstream.len(),
                batch * self.output_len()
            )));
        }
        let mut grads = vec![0.0; self.params.len()];
        let mut delta = upstream.to_vec();
        for i in (0..self.spec.layers.len()).rev() {
            let x = &pass.acts[i];
            let y = &pass.acts[i + 1];
            let need_input_grad = i > 0;
            let o = self.offsets[i];
            delta = match (&self.spec.layers[i], &pass.saved[i]) {
                (LayerSpec::Dense { inputs, outputs, activation, mask }, _) => {
                    let (inputs, outputs) = (*inputs, *outputs);
                    scale_by_activation(&mut delta, y, *activation);
                    let (gw, rest) = grads[o.weights..].split_at_mut(o.weights_len);
                    gemm(outputs, batch, inputs, &delta, true, x, false, 0.0, gw);
                    if let Some(m) = mask {
                        gw.iter_mut().zip(m).for_each(|(g, m)| *g *= m);
                    }
                    let gb = &mut rest[..o.bias_len];
                    for row in delta.chunks_exact(outputs) {
                        gb.iter_mut().zip(row).for_each(|(g, d)| *g += d);
                    }
                    if need_input_grad {
                        let w = self.masked_weights(i);
                        let mut dx = vec![0.0; batch * inputs];
                        gemm(batch, outputs, inputs, &delta, false, &w, false, 0.0, &mut dx);
                        dx
                    } else {
                        Vec::new()
                    }
                }
                (LayerSpec::Conv2d { out_ch, activation, mask, .. }, Saved::Cols(cols)) => {
                    scale_by_activation(&mut delta, y, *activation);
                    let g = self.conv_geom(i);
                    let (k, p) = (g.rows(), g.cols());
                    let out_len = out_ch * p;
                    let sample_in = g.c * g.h * g.w;
                    let w = self.masked_weights(i);
                    let mut dx = vec![0.0; if need_input_grad { batch * sample_in } else { 0 }];
                    let mut dcols = vec![0.0; k * p];
                    let (gw, rest) = grads[o.weights..].split_at_mut(o.weights_len);
                    let gb = &mut rest[..o.bias_len];
                    for s in 0..batch {
                        let ds = &delta[s * out_len..(s + 1) * out_len];
                        let cs = &cols[s * k * p..(s + 1) * k * p];
                        gemm(*out_ch, p, k, ds, false, cs, true, 1.0, gw);
                        for (oc, row) in ds.chunks_exact(p).enumerate() {
                            gb[oc] += row.iter().sum::<f64>();
                        }
                        if need_input_grad {
                            gemm(k, *out_ch, p, &w, true, ds, false, 0.0, &mut dcols);
                            col2im(&g, &dcols, &mut dx[s * sample_in..(s + 1) * sample_in]);
                        }
                    }
                    if let Some(m) = mask {
                        gw.iter_mut().zip(m).for_each(|(g, m)| *g *= m);
                    }
                    dx
                }
                (LayerSpec::MaxPool2d { .. }, Saved::Argmax(arg)) => {
                    let in_len: usize = self.shapes[i].iter().product();
                    let out_len: usize = self.shapes[i + 1].iter().product();
                    let mut dx = vec![0.0; batch * in_len];
                    for (at, (&src, d)) in arg.iter().zip(&delta).enumerate() {
                        dx[(at / out_len) * in_len + src] += d;
                    }
                    dx
                }
                (LayerSpec::Dropout { .. }, Saved::DropMask(mask)) => {
                    delta.iter().zip(mask).map(|(d, m)| d * m).collect()
                }
                (LayerSpec::Dropout { .. } | LayerSpec::Flatten, Saved::None) => delta,
                _ => return Err(Error::State(format!("layer {i} is missing its intermediates"))),
            };
        }
        Ok(grads)
    }
}

fn activate(y: &mut [f64], act: Activation) {
    if act != Activation::Identity {
        y.iter_mut().for_each(|v| *v = act.apply(*v));
    }
}

fn scale_by_activation(delta: &mut [f64], y: &[f64], act: Activation) {
    if act != Activation::Identity {
        delta.iter_mut().zip(y).for_each(|(d, &y)| *d *= act.grad_from_output(y));
    }
}
