use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{softmax, DenseLayer, Network};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Labelled inputs stored as one flat row-major block.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    inputs: Vec<f64>,
    dim: usize,
    labels: Vec<usize>,
    num_classes: usize,
}

impl Dataset {
    pub fn new(inputs: Vec<f64>, dim: usize, labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        if dim == 0 || inputs.len() != dim * labels.len() {
            return Err(Error::Shape(format!(
                "{} input values for {} labels of dimension {dim}",
                inputs.len(),
                labels.len()
            )));
        }
        if let Some(&label) = labels.iter().find(|&&l| l >= num_classes) {
            return Err(Error::Label { label, classes: num_classes });
        }
        Ok(Self { inputs, dim, labels, num_classes })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>, labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::Shape("rows have differing lengths".into()));
        }
        Self::new(rows.concat(), dim, labels, num_classes)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn input(&self, i: usize) -> &[f64] {
        &self.inputs[i * self.dim..(i + 1) * self.dim]
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// The first `n` samples (or all of them).
    pub fn head(&self, n: usize) -> Dataset {
        let n = n.min(self.len());
        Dataset {
            inputs: self.inputs[..n * self.dim].to_vec(),
            dim: self.dim,
            labels: self.labels[..n].to_vec(),
            num_classes: self.num_classes,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { epochs: 20, lr: 0.1, batch_size: 32, seed: 0 }
    }
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub network: Network,
    pub train_accuracy: f64,
    pub test_accuracy: Option<f64>,
    /// Mean cross-entropy over the last epoch.
    pub final_loss: f64,
}

pub fn accuracy(net: &Network, data: &Dataset) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let correct = (0..data.len())
        .into_par_iter()
        .map(|i| net.predict(data.input(i)).map(|p| (p == data.label(i)) as usize))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .sum::<usize>();
    Ok(correct as f64 / data.len() as f64)
}

/// Samples per gradient chunk. Chunks are reduced in a fixed order so the
/// result does not depend on thread scheduling.
const CHUNK: usize = 8;

/// Mini-batch SGD on softmax cross-entropy.
pub fn train(net: &Network, data: &Dataset, test: Option<&Dataset>, cfg: &TrainConfig) -> Result<TrainReport> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if data.dim() != net.input_dim() {
        return Err(Error::Dimension { layer: 0, expected: net.input_dim(), actual: data.dim() });
    }
    if data.num_classes() > net.num_classes() {
        return Err(Error::Label { label: data.num_classes() - 1, classes: net.num_classes() });
    }
    if cfg.batch_size == 0 || !(cfg.lr > 0.0) {
        return Err(Error::Config(format!(
            "batch size must be positive and lr > 0, got {} / {}",
            cfg.batch_size, cfg.lr
        )));
    }

    let mut params: Vec<(Vec<f64>, Vec<f64>)> =
        net.layers().iter().map(|l| (l.weights.data().to_vec(), l.bias.data().to_vec())).collect();
    let sizes = net.layer_sizes();
    let act = net.activation();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut final_loss = f64::NAN;

    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let parts: Vec<(Grads, f64)> = batch
                .par_chunks(CHUNK)
                .map(|chunk| {
                    let mut g = Grads::zeros(&sizes);
                    let mut loss = 0.0;
                    for &i in chunk {
                        loss += accumulate(&params, act, data.input(i), data.label(i), &mut g);
                    }
                    (g, loss)
                })
                .collect();
            let mut parts = parts.into_iter();
            let (mut total, mut loss) = parts.next().expect("non-empty batch");
            for (g, l) in parts {
                total.add(&g);
                loss += l;
            }
            epoch_loss += loss;
            let step = cfg.lr / batch.len() as f64;
            for ((w, b), (gw, gb)) in params.iter_mut().zip(&total.layers) {
                w.iter_mut().zip(gw).for_each(|(p, g)| *p -= step * g);
                b.iter_mut().zip(gb).for_each(|(p, g)| *p -= step * g);
            }
        }
        final_loss = epoch_loss / data.len() as f64;
        if !final_loss.is_finite() {
            return Err(Error::NonFinite(format!("training loss diverged to {final_loss}")));
        }
    }

    let layers = params
        .into_iter()
        .zip(sizes.windows(2))
        .map(|((w, b), s)| DenseLayer::new(Tensor::matrix(s[1], s[0], w)?, Tensor::vector(b)?))
        .collect::<Result<Vec<_>>>()?;
    let network = Network::new(layers, act)?;
    let train_accuracy = accuracy(&network, data)?;
    let test_accuracy = test.map(|t| accuracy(&network, t)).transpose()?;
    Ok(TrainReport { network, train_accuracy, test_accuracy, final_loss })
}

struct Grads {
    layers: Vec<(Vec<f64>, Vec<f64>)>,
}

impl Grads {
    fn zeros(sizes: &[usize]) -> Self {
        Self { layers: sizes.windows(2).map(|s| (vec![0.0; s[0] * s[1]], vec![0.0; s[1]])).collect() }
    }

    fn add(&mut self, other: &Grads) {
        for ((w, b), (ow, ob)) in self.layers.iter_mut().zip(&other.layers) {
            w.iter_mut().zip(ow).for_each(|(a, c)| *a += c);
            b.iter_mut().zip(ob).for_each(|(a, c)| *a += c);
        }
    }
}

/// Adds one sample's cross-entropy gradient to `g`; returns its loss.
fn accumulate(
    params: &[(Vec<f64>, Vec<f64>)],
    act: crate::activation::Activation,
    x: &[f64],
    label: usize,
    g: &mut Grads,
) -> f64 {
    let n = params.len();
    let mut inputs: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut pre: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut a = x.to_vec();
    for (l, (w, b)) in params.iter().enumerate() {
        let cols = a.len();
        let z: Vec<f64> = w.chunks_exact(cols).zip(b).map(|(row, bias)| crate::tensor::dot(row, &a) + bias).collect();
        inputs.push(std::mem::take(&mut a));
        if l + 1 < n {
            a = z.iter().map(|&v| act.apply(v)).collect();
        }
        pre.push(z);
    }
    let probs = softmax(&pre[n - 1]);
    let loss = -probs[label].max(1e-300).ln();
    let mut delta = probs;
    delta[label] -= 1.0;
    for l in (0..n).rev() {
        let (gw, gb) = &mut g.layers[l];
        let input = &inputs[l];
        let cols = input.len();
        for (j, &d) in delta.iter().enumerate() {
            gb[j] += d;
            if d != 0.0 {
                gw[j * cols..(j + 1) * cols].iter_mut().zip(input).for_each(|(gv, &xv)| *gv += d * xv);
            }
        }
        if l == 0 {
            break;
        }
        let back = crate::tensor::matvec_t(&params[l].0, cols, &delta);
        delta = back.iter().zip(&pre[l - 1]).map(|(d, &z)| d * act.derivative(z)).collect();
    }
    loss
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activation::Activation;
    use rand_distr::{Distribution, Normal};

    fn blobs(n: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 0.3).unwrap();
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n {
            let label = i % 2;
            let c = if label == 0 { -1.5 } else { 1.5 };
            rows.push(vec![c + noise.sample(&mut rng), c + noise.sample(&mut rng)]);
            labels.push(label);
        }
        Dataset::from_rows(rows, labels, 2).unwrap()
    }

    #[test]
    fn separable_blobs_reach_full_accuracy() {
        let data = blobs(200, 1);
        let net = Network::random(&[2, 2], Activation::Relu, 5).unwrap();
        let cfg = TrainConfig { epochs: 50, lr: 0.1, batch_size: 16, seed: 2 };
        let report = train(&net, &data, None, &cfg).unwrap();
        assert_eq!(report.train_accuracy, 1.0);
    }

    #[test]
    fn zero_epochs_keep_weights() {
        let data = blobs(20, 1);
        let net = Network::random(&[2, 3, 2], Activation::Relu, 5).unwrap();
        let cfg = TrainConfig { epochs: 0, ..TrainConfig::default() };
        let report = train(&net, &data, None, &cfg).unwrap();
        assert_eq!(report.network, net);
    }

    #[test]
    fn training_is_deterministic() {
        let data = blobs(100, 3);
        let net = Network::random(&[2, 5, 2], Activation::Relu, 7).unwrap();
        let cfg = TrainConfig { epochs: 3, lr: 0.05, batch_size: 10, seed: 11 };
        let a = train(&net, &data, None, &cfg).unwrap();
        let b = train(&net, &data, None, &cfg).unwrap();
        assert_eq!(a.network, b.network);
    }

    #[test]
    fn rejects_empty_and_bad_labels() {
        let net = Network::random(&[2, 2], Activation::Relu, 5).unwrap();
        let empty = Dataset::new(vec![], 2, vec![], 2).unwrap();
        assert!(matches!(train(&net, &empty, None, &TrainConfig::default()), Err(Error::EmptyDataset)));
        assert!(matches!(Dataset::new(vec![0.0, 0.0], 2, vec![5], 2), Err(Error::Label { label: 5, classes: 2 })));
    }
}
