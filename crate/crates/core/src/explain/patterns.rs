use log::warn;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::net::{Dataset, Network};
use crate::tensor::Tensor;

/// Patterns for PatternAttribution, one matrix per layer shaped like the
/// layer's weights.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Patterns {
    pub layers: Vec<Tensor>,
    /// `(layer, neuron)` pairs whose pre-activation had no variance; their
    /// pattern rows are zero.
    pub degenerate: Vec<(usize, usize)>,
}

/// Linear pattern estimator: for neuron `j` of layer `l` with pre-activation
/// `y_j` and layer input `x`, the pattern row is `cov(x, y_j) / var(y_j)`
/// over the dataset.
pub fn learn_patterns(net: &Network, data: &Dataset) -> Result<Patterns> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let traces = (0..data.len()).map(|i| net.forward(data.input(i))).collect::<Result<Vec<_>>>()?;
    let n = data.len() as f64;
    let mut layers = Vec::with_capacity(net.layers().len());
    let mut degenerate = Vec::new();

    for (l, layer) in net.layers().iter().enumerate() {
        let (rows, cols) = (layer.out_dim(), layer.in_dim());
        let mut mean_x = vec![0.0; cols];
        let mut mean_y = vec![0.0; rows];
        for t in &traces {
            mean_x.iter_mut().zip(&t.activations[l]).for_each(|(m, v)| *m += v / n);
            mean_y.iter_mut().zip(&t.pre_activations[l]).for_each(|(m, v)| *m += v / n);
        }
        let mut cov = vec![0.0; rows * cols];
        let mut var = vec![0.0; rows];
        let mut cx = vec![0.0; cols];
        for t in &traces {
            cx.iter_mut().zip(&t.activations[l]).zip(&mean_x).for_each(|((c, v), m)| *c = v - m);
            for j in 0..rows {
                let cy = t.pre_activations[l][j] - mean_y[j];
                var[j] += cy * cy / n;
                if cy != 0.0 {
                    cov[j * cols..(j + 1) * cols].iter_mut().zip(&cx).for_each(|(c, x)| *c += x * cy / n);
                }
            }
        }
        for j in 0..rows {
            let row = &mut cov[j * cols..(j + 1) * cols];
            if var[j] <= 1e-20 * (1.0 + mean_y[j] * mean_y[j]) {
                row.fill(0.0);
                degenerate.push((l, j));
            } else {
                row.iter_mut().for_each(|c| *c /= var[j]);
            }
        }
        layers.push(Tensor::matrix(rows, cols, cov)?);
    }
    if !degenerate.is_empty() {
        warn!("{} neurons have zero pre-activation variance; their patterns are zero", degenerate.len());
    }
    Ok(Patterns { layers, degenerate })
}
