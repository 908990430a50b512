//! Dense feed-forward classifier with a softmax head.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::diffcore::tensor::Matrix;
use crate::error::{Error, Result};
use crate::numeric::softmax_in_place;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Tanh,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative expressed through the pre-activation value.
    fn derivative(self, pre: f64) -> f64 {
        match self {
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => {
                let t = pre.tanh();
                1.0 - t * t
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            other => Err(Error::Parse(format!("unknown activation `{other}`"))),
        }
    }
}

/// Affine layer `x · W + b`; `weight` is `inputs × outputs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            weight: Matrix::zeros(inputs, outputs),
            bias: vec![0.0; outputs],
        }
    }

    pub fn inputs(&self) -> usize {
        self.weight.rows()
    }

    pub fn outputs(&self) -> usize {
        self.weight.cols()
    }

    fn forward(&self, x: &Matrix) -> Result<Matrix> {
        let mut out = x.matmul(&self.weight)?;
        for r in 0..out.rows() {
            for (o, b) in out.row_mut(r).iter_mut().zip(&self.bias) {
                *o += b;
            }
        }
        Ok(out)
    }
}

/// Classifier parameters. Hidden layers use `activation`; the last layer
/// produces logits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    layers: Vec<Dense>,
    activation: Activation,
}

/// Intermediate values kept for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Input to each layer (the first entry is the batch itself).
    inputs: Vec<Matrix>,
    /// Pre-activation output of each hidden layer.
    pre_activations: Vec<Matrix>,
    pub probabilities: Matrix,
}

fn check_dims(dims: &[usize]) -> Result<()> {
    if dims.len() < 2 {
        return Err(Error::InvalidDimension(
            "a model needs at least an input and an output size".into(),
        ));
    }
    if dims.contains(&0) {
        return Err(Error::InvalidDimension(format!(
            "zero-width layer in {dims:?}"
        )));
    }
    Ok(())
}

impl ModelParams {
    /// Layer sizes `dims = [input, hidden..., classes]`, all parameters zero.
    pub fn zeros(dims: &[usize], activation: Activation) -> Result<Self> {
        check_dims(dims)?;
        let layers = dims.windows(2).map(|w| Dense::zeros(w[0], w[1])).collect();
        Ok(Self { layers, activation })
    }

    /// He-normal (relu) or Glorot-normal (tanh) weights, zero biases.
    pub fn init<R: Rng + ?Sized>(
        dims: &[usize],
        activation: Activation,
        rng: &mut R,
    ) -> Result<Self> {
        let mut model = Self::zeros(dims, activation)?;
        for layer in &mut model.layers {
            let (fan_in, fan_out) = (layer.inputs() as f64, layer.outputs() as f64);
            let std = match activation {
                Activation::Relu => (2.0 / fan_in).sqrt(),
                Activation::Tanh => (2.0 / (fan_in + fan_out)).sqrt(),
            };
            let normal = Normal::new(0.0, std).expect("positive std");
            for w in layer.weight.as_mut_slice() {
                *w = normal.sample(rng);
            }
        }
        Ok(model)
    }

    pub fn from_layers(layers: Vec<Dense>, activation: Activation) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidDimension("model has no layers".into()));
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].outputs() != pair[1].inputs() {
                return Err(Error::DimensionMismatch(format!(
                    "layer {i} outputs {} but layer {} expects {}",
                    pair[0].outputs(),
                    i + 1,
                    pair[1].inputs()
                )));
            }
        }
        if let Some(i) = layers.iter().position(|l| l.bias.len() != l.outputs()) {
            return Err(Error::DimensionMismatch(format!(
                "layer {i} bias length does not match its outputs"
            )));
        }
        let model = Self { layers, activation };
        if !model.all_finite() {
            return Err(Error::Numeric("model parameters are not finite".into()));
        }
        Ok(model)
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn num_classes(&self) -> usize {
        self.layers.last().expect("non-empty").outputs()
    }

    pub fn dims(&self) -> Vec<usize> {
        std::iter::once(self.input_dim())
            .chain(self.layers.iter().map(Dense::outputs))
            .collect()
    }

    pub fn num_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight.as_slice().len() + l.bias.len())
            .sum()
    }

    pub fn all_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weight.all_finite() && l.bias.iter().all(|b| b.is_finite()))
    }

    /// Parameter tensors in layer order: weight, then bias.
    pub fn tensors(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|l| [l.weight.as_slice(), l.bias.as_slice()])
            .collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weight.as_mut_slice(), l.bias.as_mut_slice()])
            .collect()
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.tensors().concat()
    }

    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.num_params() {
            return Err(Error::DimensionMismatch(format!(
                "expected {} parameters, got {}",
                self.num_params(),
                flat.len()
            )));
        }
        let mut offset = 0;
        for t in self.tensors_mut() {
            t.copy_from_slice(&flat[offset..offset + t.len()]);
            offset += t.len();
        }
        Ok(())
    }

    fn check_input(&self, batch: &Matrix) -> Result<()> {
        if batch.cols() != self.input_dim() {
            return Err(Error::DimensionMismatch(format!(
                "batch has {} features, model expects {}",
                batch.cols(),
                self.input_dim()
            )));
        }
        Ok(())
    }

    pub fn forward_logits(&self, batch: &Matrix) -> Result<Matrix> {
        self.check_input(batch)?;
        let last = self.layers.len() - 1;
        let mut x = batch.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            x = layer.forward(&x)?;
            if i < last {
                x.as_mut_slice()
                    .iter_mut()
                    .for_each(|v| *v = self.activation.apply(*v));
            }
        }
        Ok(x)
    }

    /// Row-wise softmax probabilities, `B × K`.
    pub fn forward(&self, batch: &Matrix) -> Result<Matrix> {
        let mut logits = self.forward_logits(batch)?;
        for r in 0..logits.rows() {
            softmax_in_place(logits.row_mut(r));
        }
        Ok(logits)
    }

    pub fn forward_with_cache(&self, batch: &Matrix) -> Result<ForwardCache> {
        self.check_input(batch)?;
        let last = self.layers.len() - 1;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre_activations = Vec::with_capacity(last);
        let mut x = batch.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            let z = layer.forward(&x)?;
            inputs.push(x);
            if i < last {
                let mut a = z.clone();
                a.as_mut_slice()
                    .iter_mut()
                    .for_each(|v| *v = self.activation.apply(*v));
                pre_activations.push(z);
                x = a;
            } else {
                x = z;
            }
        }
        for r in 0..x.rows() {
            softmax_in_place(x.row_mut(r));
        }
        Ok(ForwardCache {
            inputs,
            pre_activations,
            probabilities: x,
        })
    }

    /// Parameter gradients given `∂L/∂logits`. The returned value has the
    /// same layout as `self`.
    pub fn backward(&self, cache: &ForwardCache, grad_logits: &Matrix) -> Result<ModelParams> {
        if grad_logits.shape() != cache.probabilities.shape() {
            return Err(Error::DimensionMismatch(format!(
                "logit gradient is {:?}, forward output is {:?}",
                grad_logits.shape(),
                cache.probabilities.shape()
            )));
        }
        let mut grads: Vec<Dense> = Vec::with_capacity(self.layers.len());
        let mut delta = grad_logits.clone();
        for i in (0..self.layers.len()).rev() {
            let weight_grad = cache.inputs[i].t_matmul(&delta)?;
            let mut bias_grad = vec![0.0; delta.cols()];
            for row in delta.iter_rows() {
                for (g, d) in bias_grad.iter_mut().zip(row) {
                    *g += d;
                }
            }
            grads.push(Dense {
                weight: weight_grad,
                bias: bias_grad,
            });
            if i > 0 {
                let mut upstream = delta.matmul_t(&self.layers[i].weight)?;
                for (u, &pre) in upstream
                    .as_mut_slice()
                    .iter_mut()
                    .zip(cache.pre_activations[i - 1].as_slice())
                {
                    *u *= self.activation.derivative(pre);
                }
                delta = upstream;
            }
        }
        grads.reverse();
        Ok(ModelParams {
            layers: grads,
            activation: self.activation,
        })
    }

    /// Arg-max class per row; ties resolve to the lowest index.
    pub fn predict(&self, batch: &Matrix) -> Result<Vec<usize>> {
        let logits = self.forward_logits(batch)?;
        Ok(logits.iter_rows().map(argmax).collect())
    }
}

pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}
