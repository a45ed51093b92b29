//! Network passes recorded on a [`Tape`].
//!
//! The backward pass is written out as ordinary tape operations so it can be
//! differentiated again.

use crate::activation::Activation;
use crate::net::Network;
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

pub(crate) struct TapeForward {
    /// Input to each layer; `inputs[0]` is the network input.
    pub inputs: Vec<Var>,
    /// `z^l = W^l x^l + b^l` for every layer; the last one is the logits.
    pub pre: Vec<Var>,
}

impl TapeForward {
    pub fn logits(&self) -> Var {
        *self.pre.last().expect("network has layers")
    }
}

pub(crate) fn forward<'a>(tape: &mut Tape<'a>, net: &'a Network, act: Activation, x: Var) -> TapeForward {
    let layers = net.layers();
    let mut inputs = Vec::with_capacity(layers.len());
    let mut pre = Vec::with_capacity(layers.len());
    let mut a = x;
    for (l, layer) in layers.iter().enumerate() {
        inputs.push(a);
        let wx = tape.matvec(layer.weights.data(), layer.weights.cols(), a);
        let z = tape.add_const(wx, layer.bias.data());
        pre.push(z);
        if l + 1 < layers.len() {
            a = match act {
                Activation::Relu => tape.relu(z),
                Activation::Softplus { beta } => tape.softplus(z, beta),
            };
        }
    }
    TapeForward { inputs, pre }
}

pub(crate) fn activation_slope(tape: &mut Tape<'_>, act: Activation, z: Var) -> Var {
    match act {
        Activation::Relu => tape.step(z),
        Activation::Softplus { beta } => tape.sigmoid(z, beta),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum BackwardRule {
    Gradient,
    /// Negative upstream components are zeroed at every hidden nonlinearity.
    Guided,
}

/// `∂ logit_k / ∂ input` through `weights` (normally the network's own
/// weights; pattern-modified weights for PatternAttribution), using the
/// activation slopes of the recorded forward pass.
pub(crate) fn backward<'a>(
    tape: &mut Tape<'a>,
    fwd: &TapeForward,
    weights: &[&'a Tensor],
    act: Activation,
    class: usize,
    rule: BackwardRule,
) -> Var {
    let classes = weights.last().expect("network has layers").rows();
    let mut onehot = vec![0.0; classes];
    onehot[class] = 1.0;
    let mut delta = tape.constant(onehot);
    for l in (0..weights.len()).rev() {
        let w = weights[l];
        let mut da = tape.matvec_t(w.data(), w.cols(), delta);
        if l == 0 {
            return da;
        }
        if rule == BackwardRule::Guided {
            da = tape.relu(da);
        }
        let slope = activation_slope(tape, act, fwd.pre[l - 1]);
        delta = tape.mul(da, slope);
    }
    unreachable!("loop returns at the first layer")
}
