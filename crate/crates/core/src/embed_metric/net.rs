use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::exemplar_db::ImagePatch;
use crate::util::rng;
use crate::{Error, Result};

pub const DEFAULT_EMBED_DIM: usize = 16;
pub const DEFAULT_HIDDEN: usize = 64;

/// Two-layer perceptron `e = W2 relu(W1 x + b1) + b2` over a flattened patch.
///
/// Parameters live in one flat vector laid out as `[W1, b1, W2, b2]`, with
/// both weight matrices row-major (`W1` is `hidden x input`).
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingNet {
    input_dim: usize,
    hidden: usize,
    output: usize,
    params: Vec<f64>,
}

/// Intermediate activations kept for the backward pass.
#[derive(Debug, Clone)]
pub(crate) struct Activations {
    pub pre: Vec<f64>,
    pub hidden: Vec<f64>,
    pub out: Vec<f64>,
}

impl EmbeddingNet {
    pub fn zeros(input_dim: usize, hidden: usize, output: usize) -> Self {
        let n = hidden * input_dim + hidden + output * hidden + output;
        EmbeddingNet {
            input_dim,
            hidden,
            output,
            params: vec![0.0; n],
        }
    }

    /// He-normal weights, zero biases, deterministic in `seed`.
    pub fn random(input_dim: usize, hidden: usize, output: usize, seed: u64) -> Self {
        let mut net = Self::zeros(input_dim, hidden, output);
        let mut r = rng(seed);
        let n1 = Normal::new(0.0, (2.0 / input_dim as f64).sqrt()).unwrap();
        let n2 = Normal::new(0.0, (1.0 / hidden as f64).sqrt()).unwrap();
        let (w1, w2) = (net.w1_range(), net.w2_range());
        for p in &mut net.params[w1] {
            *p = n1.sample(&mut r);
        }
        for p in &mut net.params[w2] {
            *p = n2.sample(&mut r);
        }
        net
    }

    /// Net whose output is the constant `bias` for every input.
    pub fn constant(input_dim: usize, hidden: usize, bias: &[f64]) -> Self {
        let mut net = Self::zeros(input_dim, hidden, bias.len());
        let b2 = net.b2_range();
        net.params[b2].copy_from_slice(bias);
        net
    }

    /// Net that copies the first `output` inputs (requires nonnegative inputs,
    /// since they pass through the ReLU).
    pub fn identity_prefix(input_dim: usize, output: usize) -> Self {
        let mut net = Self::zeros(input_dim, output, output);
        for i in 0..output {
            net.params[i * input_dim + i] = 1.0;
            let w2 = net.w2_range().start;
            net.params[w2 + i * output + i] = 1.0;
        }
        net
    }

    pub fn from_params(input_dim: usize, hidden: usize, output: usize, params: Vec<f64>) -> Result<Self> {
        let net = Self::zeros(input_dim, hidden, output);
        if params.len() != net.params.len() {
            return Err(Error::dims(net.params.len(), params.len()));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Numerical("non-finite network parameter".into()));
        }
        Ok(EmbeddingNet { params, ..net })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden
    }

    pub fn output_dim(&self) -> usize {
        self.output
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub(crate) fn w1_range(&self) -> std::ops::Range<usize> {
        0..self.hidden * self.input_dim
    }

    pub(crate) fn b1_range(&self) -> std::ops::Range<usize> {
        let s = self.hidden * self.input_dim;
        s..s + self.hidden
    }

    pub(crate) fn w2_range(&self) -> std::ops::Range<usize> {
        let s = self.b1_range().end;
        s..s + self.output * self.hidden
    }

    pub(crate) fn b2_range(&self) -> std::ops::Range<usize> {
        let s = self.w2_range().end;
        s..s + self.output
    }

    pub(crate) fn forward_full(&self, x: &[f64]) -> Activations {
        let (w1, b1, w2, b2) = (
            &self.params[self.w1_range()],
            &self.params[self.b1_range()],
            &self.params[self.w2_range()],
            &self.params[self.b2_range()],
        );
        let mut pre = b1.to_vec();
        for (h, z) in pre.iter_mut().enumerate() {
            let row = &w1[h * self.input_dim..(h + 1) * self.input_dim];
            *z += row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
        }
        let hidden: Vec<f64> = pre.iter().map(|&z| z.max(0.0)).collect();
        let mut out = b2.to_vec();
        for (o, e) in out.iter_mut().enumerate() {
            let row = &w2[o * self.hidden..(o + 1) * self.hidden];
            *e += row.iter().zip(&hidden).map(|(w, v)| w * v).sum::<f64>();
        }
        Activations { pre, hidden, out }
    }

    /// Accumulate `d loss / d params` into `grad` given `d loss / d output`.
    pub(crate) fn backward(&self, x: &[f64], act: &Activations, d_out: &[f64], grad: &mut [f64]) {
        let w2 = &self.params[self.w2_range()];
        let (w1r, b1r, w2r, b2r) = (self.w1_range(), self.b1_range(), self.w2_range(), self.b2_range());
        for (o, &g) in d_out.iter().enumerate() {
            grad[b2r.start + o] += g;
            let row = &mut grad[w2r.start + o * self.hidden..w2r.start + (o + 1) * self.hidden];
            row.iter_mut().zip(&act.hidden).for_each(|(gr, h)| *gr += g * h);
        }
        for h in 0..self.hidden {
            // zero branch at the kink
            if act.pre[h] <= 0.0 {
                continue;
            }
            let dh: f64 = (0..self.output).map(|o| d_out[o] * w2[o * self.hidden + h]).sum();
            if dh == 0.0 {
                continue;
            }
            grad[b1r.start + h] += dh;
            let row = &mut grad[w1r.start + h * self.input_dim..w1r.start + (h + 1) * self.input_dim];
            row.iter_mut().zip(x).for_each(|(gr, v)| *gr += dh * v);
        }
    }

    /// Loss and parameter gradient for one input; `loss` maps the output to
    /// the loss value and its gradient with respect to the output.
    pub fn value_and_grad(&self, x: &[f64], loss: impl FnOnce(&[f64]) -> (f64, Vec<f64>)) -> Result<(f64, Vec<f64>)> {
        if x.len() != self.input_dim {
            return Err(Error::dims(self.input_dim, x.len()));
        }
        let act = self.forward_full(x);
        let (l, d_out) = loss(&act.out);
        if d_out.len() != self.output {
            return Err(Error::dims(self.output, d_out.len()));
        }
        let mut grad = vec![0.0; self.params.len()];
        self.backward(x, &act, &d_out, &mut grad);
        Ok((l, grad))
    }

    pub fn embed_slice(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim {
            return Err(Error::dims(self.input_dim, x.len()));
        }
        Ok(self.forward_full(x).out)
    }

    /// Embed one patch. Errors if the flattened patch size differs from the input width.
    pub fn embed(&self, patch: &ImagePatch) -> Result<Vec<f64>> {
        self.embed_slice(patch.as_slice())
    }

    pub fn to_checkpoint(&self, seed: Option<u64>, config: serde_json::Value) -> NetCheckpoint {
        let p = &self.params;
        NetCheckpoint {
            layers: vec![
                LayerRecord {
                    shape: [self.hidden, self.input_dim],
                    weights: p[self.w1_range()].to_vec(),
                    bias: p[self.b1_range()].to_vec(),
                },
                LayerRecord {
                    shape: [self.output, self.hidden],
                    weights: p[self.w2_range()].to_vec(),
                    bias: p[self.b2_range()].to_vec(),
                },
            ],
            seed,
            config,
        }
    }

    pub fn from_checkpoint(ck: &NetCheckpoint) -> Result<Self> {
        let [l1, l2] = ck.layers.as_slice() else {
            return Err(Error::invalid("checkpoint", format!("expected 2 layers, got {}", ck.layers.len())));
        };
        let [hidden, input] = l1.shape;
        let [output, h2] = l2.shape;
        if h2 != hidden || l1.weights.len() != hidden * input || l2.weights.len() != output * hidden {
            return Err(Error::invalid("checkpoint", "inconsistent layer shapes"));
        }
        if l1.bias.len() != hidden || l2.bias.len() != output {
            return Err(Error::invalid("checkpoint", "bias length mismatch"));
        }
        let mut params = Vec::with_capacity(hidden * input + hidden + output * hidden + output);
        params.extend_from_slice(&l1.weights);
        params.extend_from_slice(&l1.bias);
        params.extend_from_slice(&l2.weights);
        params.extend_from_slice(&l2.bias);
        Self::from_params(input, hidden, output, params)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerRecord {
    pub shape: [usize; 2],
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

/// JSON checkpoint: layer shapes and row-major weights, plus provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetCheckpoint {
    pub layers: Vec<LayerRecord>,
    pub seed: Option<u64>,
    pub config: serde_json::Value,
}
