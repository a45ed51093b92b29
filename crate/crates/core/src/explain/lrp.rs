use serde::Serialize;

use crate::error::Result;
use crate::net::Network;

/// Denominators below this are treated as dead neurons.
pub const LRP_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LrpTrace {
    /// `relevances[l]` is the relevance of the input to layer `l`;
    /// `relevances[0]` is the input map and the last entry is the one-hot
    /// relevance on the logits.
    pub relevances: Vec<Vec<f64>>,
    /// At least one denominator fell below [`LRP_EPS`].
    pub stabilized: bool,
}

impl LrpTrace {
    pub fn input_relevance(&self) -> &[f64] {
        &self.relevances[0]
    }

    pub fn totals(&self) -> Vec<f64> {
        self.relevances.iter().map(|r| r.iter().sum()).collect()
    }
}

/// LRP with the `z⁺` rule on every layer but the first and the bounded
/// `[0, 1]` input rule on the first.
pub fn lrp_trace(net: &Network, x: &[f64], class: usize) -> Result<LrpTrace> {
    net.check_class(class)?;
    let trace = net.forward(x)?;
    let layers = net.layers();
    let mut relevance = vec![0.0; net.num_classes()];
    relevance[class] = 1.0;
    let mut relevances = vec![relevance.clone()];
    let mut stabilized = false;

    for l in (0..layers.len()).rev() {
        let w = &layers[l].weights;
        let a = &trace.activations[l];
        let cols = w.cols();
        let contribution = |j: usize, i: usize| -> f64 {
            let wji = w.data()[j * cols + i];
            if l == 0 {
                a[i] * wji - wji.min(0.0)
            } else {
                a[i] * wji.max(0.0)
            }
        };
        let den: Vec<f64> = (0..w.rows()).map(|j| (0..cols).map(|i| contribution(j, i)).sum()).collect();
        stabilized |= stabilize(&mut relevance, &den);
        let mut next = vec![0.0; cols];
        for (j, (&r, &d)) in relevance.iter().zip(&den).enumerate() {
            if d < LRP_EPS || r == 0.0 {
                continue;
            }
            for (i, n) in next.iter_mut().enumerate() {
                *n += contribution(j, i) / d * r;
            }
        }
        relevance = next;
        relevances.push(relevance.clone());
    }
    relevances.reverse();
    Ok(LrpTrace { relevances, stabilized })
}

/// Moves relevance off neurons with a vanishing denominator onto the others,
/// in proportion to their relevance. Returns whether anything was dead.
fn stabilize(relevance: &mut [f64], den: &[f64]) -> bool {
    let dead: Vec<bool> = den.iter().map(|&d| d < LRP_EPS).collect();
    if !dead.iter().any(|&d| d) {
        return false;
    }
    let total: f64 = relevance.iter().sum();
    let alive: f64 = relevance.iter().zip(&dead).filter(|(_, &d)| !d).map(|(r, _)| r).sum();
    if alive != 0.0 {
        for (r, &d) in relevance.iter_mut().zip(&dead) {
            *r = if d { 0.0 } else { *r * total / alive };
        }
    }
    true
}
