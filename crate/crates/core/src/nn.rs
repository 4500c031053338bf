//! Dense feedforward networks with hand-written reverse-mode gradients and an
//! adaptive-moment optimizer.
//!
//! Weights are stored input-major: `weights[i * outputs + o]` connects input
//! `i` to output `o`. Batches are flat row-major buffers of `batch * width`.

use alloc::vec;
use alloc::vec::Vec;

// Unused when std is in the dependency graph (its float methods take over).
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Activation {
    Relu,
    /// `scale * tanh(z)`, using the owning network's output scale.
    TanhScaled,
    Sigmoid,
    Linear,
}

impl Activation {
    pub fn tag(self) -> u8 {
        match self {
            Activation::Relu => 0,
            Activation::TanhScaled => 1,
            Activation::Sigmoid => 2,
            Activation::Linear => 3,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Activation::Relu),
            1 => Some(Activation::TanhScaled),
            2 => Some(Activation::Sigmoid),
            3 => Some(Activation::Linear),
            _ => None,
        }
    }

    fn apply(self, z: f64, scale: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::TanhScaled => scale * z.tanh(),
            Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
            Activation::Linear => z,
        }
    }

    /// Derivative expressed through the activation output `y`.
    fn derivative(self, y: f64, scale: f64) -> f64 {
        match self {
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::TanhScaled => scale - y * y / scale,
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Linear => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    inputs: usize,
    outputs: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
    activation: Activation,
}

impl Dense {
    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    fn forward_into(&self, input: &[f64], batch: usize, scale: f64, out: &mut Vec<f64>) {
        out.clear();
        out.reserve(batch * self.outputs);
        for n in 0..batch {
            let start = out.len();
            out.extend_from_slice(&self.bias);
            let row = &mut out[start..];
            let x = &input[n * self.inputs..(n + 1) * self.inputs];
            for (i, &xi) in x.iter().enumerate() {
                if xi != 0.0 {
                    let w = &self.weights[i * self.outputs..(i + 1) * self.outputs];
                    for (r, &wv) in row.iter_mut().zip(w) {
                        *r += xi * wv;
                    }
                }
            }
            for r in row.iter_mut() {
                *r = self.activation.apply(*r, scale);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGradient {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Parameter gradients, one entry per weight layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGradient>,
}

impl Gradients {
    pub fn zeros_like(net: &DenseNet) -> Self {
        Gradients {
            layers: net
                .layers
                .iter()
                .map(|l| LayerGradient {
                    weights: vec![0.0; l.weights.len()],
                    bias: vec![0.0; l.bias.len()],
                })
                .collect(),
        }
    }

    pub fn scale(&mut self, s: f64) {
        for l in &mut self.layers {
            l.weights.iter_mut().chain(l.bias.iter_mut()).for_each(|g| *g *= s);
        }
    }

    pub fn accumulate(&mut self, other: &Gradients) -> Result<()> {
        check_len("gradient layers", self.layers.len(), other.layers.len())?;
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            check_len("gradient weights", a.weights.len(), b.weights.len())?;
            check_len("gradient bias", a.bias.len(), b.bias.len())?;
            a.weights.iter_mut().zip(&b.weights).for_each(|(x, y)| *x += y);
            a.bias.iter_mut().zip(&b.bias).for_each(|(x, y)| *x += y);
        }
        Ok(())
    }

    pub fn flat(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(l.bias.iter()).copied())
            .collect()
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(&l.bias).all(|g| g.is_finite()))
    }
}

/// Result of a backward pass: parameter gradients plus the gradient with
/// respect to the network input (needed to chain an actor through a critic).
#[derive(Debug, Clone)]
pub struct Backward {
    pub params: Gradients,
    pub input: Vec<f64>,
}

#[derive(Debug, Clone)]
struct Cache {
    batch: usize,
    /// `acts[0]` is the input, `acts[l + 1]` the output of layer `l`.
    acts: Vec<Vec<f64>>,
}

/// Dense feedforward network.
#[derive(Debug, Clone)]
pub struct DenseNet {
    layers: Vec<Dense>,
    scale: f64,
    cache: Option<Cache>,
}

impl PartialEq for DenseNet {
    fn eq(&self, other: &Self) -> bool {
        self.layers == other.layers && self.scale.to_bits() == other.scale.to_bits()
    }
}

impl DenseNet {
    /// Builds a network with weights and biases drawn uniformly from
    /// `±1/sqrt(fan_in)`.
    pub fn new<R: Rng + ?Sized>(
        layer_sizes: &[usize],
        activations: &[Activation],
        scale: f64,
        rng: &mut R,
    ) -> Result<Self> {
        validate_shape(layer_sizes, activations, scale)?;
        let layers = layer_sizes
            .windows(2)
            .zip(activations)
            .map(|(w, &activation)| {
                let (inputs, outputs) = (w[0], w[1]);
                let bound = 1.0 / (inputs as f64).sqrt();
                let mut draw = || rng.random_range(-bound..bound);
                let weights = (0..inputs * outputs).map(|_| draw()).collect();
                let bias = (0..outputs).map(|_| draw()).collect();
                Dense {
                    inputs,
                    outputs,
                    weights,
                    bias,
                    activation,
                }
            })
            .collect();
        Ok(DenseNet {
            layers,
            scale,
            cache: None,
        })
    }

    /// Multilayer perceptron with ReLU hidden layers.
    pub fn mlp<R: Rng + ?Sized>(
        inputs: usize,
        hidden: &[usize],
        outputs: usize,
        output_activation: Activation,
        scale: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let mut sizes = vec![inputs];
        sizes.extend_from_slice(hidden);
        sizes.push(outputs);
        let mut acts = vec![Activation::Relu; hidden.len()];
        acts.push(output_activation);
        Self::new(&sizes, &acts, scale, rng)
    }

    /// Rebuilds a network from explicit parameters (`(weights, bias)` per layer).
    pub fn from_parts(
        layer_sizes: &[usize],
        activations: &[Activation],
        scale: f64,
        params: Vec<(Vec<f64>, Vec<f64>)>,
    ) -> Result<Self> {
        validate_shape(layer_sizes, activations, scale)?;
        check_len("parameter layers", activations.len(), params.len())?;
        let mut layers = Vec::with_capacity(params.len());
        for ((w, &activation), (weights, bias)) in
            layer_sizes.windows(2).zip(activations).zip(params)
        {
            check_len("layer weights", w[0] * w[1], weights.len())?;
            check_len("layer bias", w[1], bias.len())?;
            layers.push(Dense {
                inputs: w[0],
                outputs: w[1],
                weights,
                bias,
                activation,
            });
        }
        Ok(DenseNet {
            layers,
            scale,
            cache: None,
        })
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.input_dim()];
        sizes.extend(self.layers.iter().map(|l| l.outputs));
        sizes
    }

    pub fn activations(&self) -> Vec<Activation> {
        self.layers.iter().map(|l| l.activation).collect()
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    /// All parameters, layer by layer, weights before bias.
    pub fn flat_params(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(l.bias.iter()).copied())
            .collect()
    }

    pub fn set_flat_params(&mut self, params: &[f64]) -> Result<()> {
        check_len("flat parameters", self.param_count(), params.len())?;
        let mut it = params.iter().copied();
        for l in &mut self.layers {
            for p in l.weights.iter_mut().chain(l.bias.iter_mut()) {
                *p = it.next().unwrap_or_default();
            }
        }
        Ok(())
    }

    pub fn same_architecture(&self, other: &DenseNet) -> bool {
        self.layer_sizes() == other.layer_sizes()
            && self.activations() == other.activations()
            && self.scale.to_bits() == other.scale.to_bits()
    }

    /// Single-sample forward pass that caches activations for [`backward`].
    ///
    /// [`backward`]: DenseNet::backward
    pub fn forward(&mut self, input: &[f64]) -> Result<Vec<f64>> {
        check_len("network input", self.input_dim(), input.len())?;
        self.forward_batch(input, 1)
    }

    /// Batched forward pass; caches activations.
    pub fn forward_batch(&mut self, input: &[f64], batch: usize) -> Result<Vec<f64>> {
        let acts = self.run(input, batch)?;
        let out = acts[acts.len() - 1].clone();
        self.cache = Some(Cache { batch, acts });
        Ok(out)
    }

    /// Batched inference without touching the cache.
    pub fn predict(&self, input: &[f64], batch: usize) -> Result<Vec<f64>> {
        let mut acts = self.run(input, batch)?;
        Ok(acts.pop().unwrap_or_default())
    }

    fn run(&self, input: &[f64], batch: usize) -> Result<Vec<Vec<f64>>> {
        if batch == 0 {
            return Err(Error::Empty("batch"));
        }
        check_len("network input", batch * self.input_dim(), input.len())?;
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(input.to_vec());
        for layer in &self.layers {
            let mut out = Vec::new();
            layer.forward_into(&acts[acts.len() - 1], batch, self.scale, &mut out);
            acts.push(out);
        }
        Ok(acts)
    }

    /// Back-propagates `upstream` (dL/d output, same shape as the last
    /// forward output) through the cached forward pass.
    pub fn backward(&self, upstream: &[f64]) -> Result<Backward> {
        let cache = self.cache.as_ref().ok_or(Error::NoForwardCache)?;
        let batch = cache.batch;
        check_len("upstream gradient", batch * self.output_dim(), upstream.len())?;
        let mut grads = Gradients::zeros_like(self);
        let mut delta = upstream.to_vec();
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let out = &cache.acts[l + 1];
            for (d, &y) in delta.iter_mut().zip(out) {
                *d *= layer.activation.derivative(y, self.scale);
            }
            let input = &cache.acts[l];
            let g = &mut grads.layers[l];
            let (ni, no) = (layer.inputs, layer.outputs);
            let mut prev = vec![0.0; batch * ni];
            for n in 0..batch {
                let dn = &delta[n * no..(n + 1) * no];
                for (b, &d) in g.bias.iter_mut().zip(dn) {
                    *b += d;
                }
                let xn = &input[n * ni..(n + 1) * ni];
                for (i, &xi) in xn.iter().enumerate() {
                    let w = &layer.weights[i * no..(i + 1) * no];
                    prev[n * ni + i] = dot(w, dn);
                    if xi != 0.0 {
                        let gw = &mut g.weights[i * no..(i + 1) * no];
                        for (gv, &d) in gw.iter_mut().zip(dn) {
                            *gv += xi * d;
                        }
                    }
                }
            }
            delta = prev;
        }
        Ok(Backward {
            params: grads,
            input: delta,
        })
    }
}

fn validate_shape(layer_sizes: &[usize], activations: &[Activation], scale: f64) -> Result<()> {
    if layer_sizes.len() < 2 {
        return Err(Error::InvalidArgument(
            "a network needs at least an input and an output size".into(),
        ));
    }
    if layer_sizes.contains(&0) {
        return Err(Error::InvalidArgument("layer sizes must be positive".into()));
    }
    check_len("activations", layer_sizes.len() - 1, activations.len())?;
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Error::InvalidArgument("output scale must be positive".into()));
    }
    Ok(())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let tail: f64 = ra.iter().zip(rb).map(|(x, y)| x * y).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Adaptive-moment optimizer (first/second moment estimates with bias
/// correction). Minimizes: parameters move against the gradient.
#[derive(Debug, Clone)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: u64,
    first: Gradients,
    second: Gradients,
}

impl Adam {
    pub fn new(net: &DenseNet, learning_rate: f64) -> Self {
        Adam {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            first: Gradients::zeros_like(net),
            second: Gradients::zeros_like(net),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn apply_update(&mut self, net: &mut DenseNet, grads: &Gradients) -> Result<()> {
        check_len("gradient layers", net.layers.len(), grads.layers.len())?;
        for (layer, g) in net.layers.iter().zip(&grads.layers) {
            check_len("gradient weights", layer.weights.len(), g.weights.len())?;
            check_len("gradient bias", layer.bias.len(), g.bias.len())?;
        }
        check_len("moment layers", net.layers.len(), self.first.layers.len())?;
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.learning_rate, self.epsilon);
        for (((layer, g), m), v) in net
            .layers
            .iter_mut()
            .zip(&grads.layers)
            .zip(&mut self.first.layers)
            .zip(&mut self.second.layers)
        {
            let params = layer.weights.iter_mut().chain(layer.bias.iter_mut());
            let gs = g.weights.iter().chain(&g.bias);
            let ms = m.weights.iter_mut().chain(m.bias.iter_mut());
            let vs = v.weights.iter_mut().chain(v.bias.iter_mut());
            for (((p, &gv), mv), vv) in params.zip(gs).zip(ms).zip(vs) {
                *mv = b1 * *mv + (1.0 - b1) * gv;
                *vv = b2 * *vv + (1.0 - b2) * gv * gv;
                let mhat = *mv / c1;
                let vhat = *vv / c2;
                *p -= lr * mhat / (vhat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

/// Polyak averaging: `target ← tau·source + (1 − tau)·target`.
pub fn soft_update(target: &mut DenseNet, source: &DenseNet, tau: f64) -> Result<()> {
    if !target.same_architecture(source) {
        return Err(Error::ArchitectureMismatch);
    }
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::InvalidArgument("tau must lie in [0, 1]".into()));
    }
    for (t, s) in target.layers.iter_mut().zip(&source.layers) {
        let tp = t.weights.iter_mut().chain(t.bias.iter_mut());
        let sp = s.weights.iter().chain(&s.bias);
        for (tv, &sv) in tp.zip(sp) {
            *tv = if tau == 1.0 {
                sv
            } else {
                tau * sv + (1.0 - tau) * *tv
            };
        }
    }
    Ok(())
}
