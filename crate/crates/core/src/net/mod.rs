//! Dense feedforward classifiers.
//!
//! A [`Network`] is a chain of affine layers with one hidden nonlinearity
//! shared by every hidden layer and no nonlinearity after the last layer.
//! Layers are shared behind an `Arc`, so swapping the activation (the
//! softplus surrogate used by the attack and by β-smoothing) is cheap.

mod train;
mod weights;

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::activation::Activation;
use crate::error::{Error, Result};
use crate::graph::{self, BackwardRule};
use crate::tape::Tape;
use crate::tensor::Tensor;

pub use train::{accuracy, train, Dataset, TrainConfig, TrainReport};
pub use weights::{load_weights, save_weights, WeightsManifest};

/// Largest input dimension for which [`Network::hessian`] builds a dense matrix.
pub const HESSIAN_MAX_DIM: usize = 512;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    /// `out × in`.
    pub weights: Tensor,
    pub bias: Tensor,
}

impl DenseLayer {
    pub fn new(weights: Tensor, bias: Tensor) -> Result<Self> {
        if weights.shape().len() != 2 {
            return Err(Error::Shape(format!("layer weights must be 2-D, got {:?}", weights.shape())));
        }
        if bias.len() != weights.rows() {
            return Err(Error::Shape(format!("bias has {} entries for {} output units", bias.len(), weights.rows())));
        }
        let bias = bias.reshape(vec![weights.rows()])?;
        Ok(Self { weights, bias })
    }

    pub fn in_dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.rows()
    }
}

/// Per-layer values of one forward evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    /// `z^l = W^l x^l + b^l`.
    pub pre_activations: Vec<Vec<f64>>,
    /// `x^l`, the input of layer `l`; `activations[0]` is the network input.
    pub activations: Vec<Vec<f64>>,
    pub logits: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Network {
    layers: Arc<[DenseLayer]>,
    activation: Activation,
}

impl PartialEq for Network {
    fn eq(&self, other: &Self) -> bool {
        self.activation == other.activation && self.layers == other.layers
    }
}

impl Network {
    pub fn new(layers: Vec<DenseLayer>, activation: Activation) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Config("network needs at least one layer".into()));
        }
        for (l, pair) in layers.windows(2).enumerate() {
            if pair[1].in_dim() != pair[0].out_dim() {
                return Err(Error::Dimension { layer: l + 1, expected: pair[0].out_dim(), actual: pair[1].in_dim() });
            }
        }
        if let Activation::Softplus { beta } = activation {
            Activation::softplus(beta)?;
        }
        Ok(Self { layers: layers.into(), activation })
    }

    /// Uniform `U(−1/√in, 1/√in)` initialisation of weights and biases.
    pub fn random(sizes: &[usize], activation: Activation, seed: u64) -> Result<Self> {
        if sizes.len() < 2 {
            return Err(Error::Config(format!("need input and output sizes, got {sizes:?}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = sizes
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let bound = 1.0 / (fan_in as f64).sqrt();
                let mut draw = |n: usize| -> Vec<f64> { (0..n).map(|_| rng.random_range(-bound..bound)).collect() };
                let weights = Tensor::matrix(fan_out, fan_in, draw(fan_out * fan_in))?;
                let bias = Tensor::vector(draw(fan_out))?;
                DenseLayer::new(weights, bias)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(layers, activation)
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn num_classes(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    /// `[d, h₁, …, K]`.
    pub fn layer_sizes(&self) -> Vec<usize> {
        std::iter::once(self.input_dim()).chain(self.layers.iter().map(DenseLayer::out_dim)).collect()
    }

    /// Same weights, different hidden nonlinearity.
    pub fn with_activation(&self, activation: Activation) -> Network {
        Network { layers: Arc::clone(&self.layers), activation }
    }

    pub fn shares_weights_with(&self, other: &Network) -> bool {
        Arc::ptr_eq(&self.layers, &other.layers)
    }

    pub(crate) fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::Dimension { layer: 0, expected: self.input_dim(), actual: x.len() });
        }
        Ok(())
    }

    pub(crate) fn check_class(&self, class: usize) -> Result<()> {
        if class >= self.num_classes() {
            return Err(Error::ClassIndex { index: class, classes: self.num_classes() });
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<ForwardTrace> {
        self.check_input(x)?;
        let mut activations = Vec::with_capacity(self.layers.len());
        let mut pre_activations = Vec::with_capacity(self.layers.len());
        let mut a = x.to_vec();
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = layer.weights.matvec(&a);
            z.iter_mut().zip(layer.bias.data()).for_each(|(z, b)| *z += b);
            activations.push(a);
            a = if l + 1 < self.layers.len() {
                z.iter().map(|&v| self.activation.apply(v)).collect()
            } else {
                Vec::new()
            };
            pre_activations.push(z);
        }
        let logits = pre_activations.last().cloned().unwrap_or_default();
        if logits.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("forward pass produced non-finite logits".into()));
        }
        Ok(ForwardTrace { pre_activations, activations, logits })
    }

    pub fn logits(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward(x)?.logits)
    }

    /// Index of the largest logit (first one on ties).
    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        Ok(argmax(&self.logits(x)?))
    }

    /// `∂g_k/∂x` by reverse-mode backpropagation.
    pub fn grad_input(&self, x: &[f64], class: usize) -> Result<Vec<f64>> {
        self.check_class(class)?;
        let trace = self.forward(x)?;
        Ok(self.backprop(&trace, class))
    }

    pub(crate) fn backprop(&self, trace: &ForwardTrace, class: usize) -> Vec<f64> {
        let mut delta = vec![0.0; self.num_classes()];
        delta[class] = 1.0;
        for l in (0..self.layers.len()).rev() {
            let da = self.layers[l].weights.matvec_t(&delta);
            if l == 0 {
                return da;
            }
            delta =
                da.iter().zip(&trace.pre_activations[l - 1]).map(|(d, &z)| d * self.activation.derivative(z)).collect();
        }
        unreachable!("loop returns at the first layer")
    }

    /// `H(x)·v`, the input Hessian of `g_k` applied to `upstream`, computed
    /// by differentiating `⟨upstream, ∂g_k/∂x⟩` once more.
    pub fn grad_of_grad_loss(&self, x: &[f64], upstream: &[f64], class: usize) -> Result<Vec<f64>> {
        if !self.activation.is_smooth() {
            return Err(Error::NonSmooth("relu has zero second derivative; use with_activation(Softplus)"));
        }
        self.check_input(x)?;
        self.check_class(class)?;
        if upstream.len() != x.len() {
            return Err(Error::Shape(format!("upstream has {} entries, input has {}", upstream.len(), x.len())));
        }
        let mut tape = Tape::new();
        let xv = tape.input(x.to_vec());
        let fwd = graph::forward(&mut tape, self, self.activation, xv);
        let weights: Vec<&Tensor> = self.layers.iter().map(|l| &l.weights).collect();
        let grad = graph::backward(&mut tape, &fwd, &weights, self.activation, class, BackwardRule::Gradient);
        let up = tape.constant(upstream.to_vec());
        let loss = tape.dot(grad, up);
        Ok(tape.gradient(loss, xv))
    }

    /// Dense `d × d` input Hessian of `g_k`, one Hessian-vector product per
    /// basis vector, symmetrised after an asymmetry check.
    pub fn hessian(&self, x: &[f64], class: usize) -> Result<Tensor> {
        let d = x.len();
        if d > HESSIAN_MAX_DIM {
            return Err(Error::HessianGuard { dim: d, max: HESSIAN_MAX_DIM });
        }
        let mut cols = Vec::with_capacity(d);
        let mut e = vec![0.0; d];
        for i in 0..d {
            e[i] = 1.0;
            cols.push(self.grad_of_grad_loss(x, &e, class)?);
            e[i] = 0.0;
        }
        let mut h = vec![0.0; d * d];
        let mut asym: f64 = 0.0;
        let mut scale: f64 = 1.0;
        for i in 0..d {
            for j in 0..d {
                asym = asym.max((cols[j][i] - cols[i][j]).abs());
                scale = scale.max(cols[j][i].abs());
                h[i * d + j] = 0.5 * (cols[j][i] + cols[i][j]);
            }
        }
        if asym > 1e-8 * scale {
            return Err(Error::Asymmetric(asym));
        }
        Tensor::matrix(d, d, h)
    }
}

pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|&z| (z - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}
