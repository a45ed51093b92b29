#![allow(dead_code, clippy::needless_range_loop)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use xmanip::net::Dataset;
use xmanip::{Activation, Network};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(dim: usize, lo: f64, hi: f64, seed: u64) -> Vec<f64> {
    let mut r = rng(seed);
    (0..dim).map(|_| r.random_range(lo..hi)).collect()
}

/// Random dense softplus net with input dim ≤ 32 and 1 to 3 layers.
pub fn random_softplus_net(seed: u64) -> (Network, Vec<f64>) {
    let mut r = rng(seed);
    let depth = r.random_range(1..=3usize);
    let mut sizes = vec![r.random_range(2..=32usize)];
    for _ in 1..depth {
        sizes.push(r.random_range(2..=16usize));
    }
    sizes.push(r.random_range(1..=4usize));
    let beta = r.random_range(0.5..5.0);
    let net = Network::random(&sizes, Activation::Softplus { beta }, r.random()).unwrap();
    let x = (0..sizes[0]).map(|_| r.random_range(-1.0..1.0)).collect();
    (net, x)
}

/// Logits by plain nested loops over the layer tensors, independent of
/// `Network::forward`.
pub fn reference_logits(net: &Network, x: &[f64]) -> Vec<f64> {
    let act = |z: f64| match net.activation() {
        Activation::Relu => {
            if z > 0.0 {
                z
            } else {
                0.0
            }
        }
        Activation::Softplus { beta } => (1.0 + (beta * z).exp()).ln() / beta,
    };
    let layers = net.layers();
    let mut a = x.to_vec();
    for (l, layer) in layers.iter().enumerate() {
        let w = &layer.weights;
        let mut z = Vec::new();
        for j in 0..w.rows() {
            let mut s = layer.bias.data()[j];
            for i in 0..w.cols() {
                s += w.at(j, i) * a[i];
            }
            z.push(s);
        }
        a = if l + 1 < layers.len() { z.into_iter().map(act).collect() } else { z };
    }
    a
}

pub fn central_diff(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let mut p = x.to_vec();
            let mut m = x.to_vec();
            p[i] += h;
            m[i] -= h;
            (f(&p) - f(&m)) / (2.0 * h)
        })
        .collect()
}

/// `H·v` as a central difference of analytic gradients along `v`.
pub fn hvp_by_gradient_difference(net: &Network, x: &[f64], v: &[f64], class: usize, h: f64) -> Vec<f64> {
    let shifted = |s: f64| -> Vec<f64> {
        let p: Vec<f64> = x.iter().zip(v).map(|(a, b)| a + s * b).collect();
        net.grad_input(&p, class).unwrap()
    };
    let (gp, gm) = (shifted(h), shifted(-h));
    gp.iter().zip(&gm).map(|(a, b)| (a - b) / (2.0 * h)).collect()
}

pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    num / den.max(1e-300)
}

/// Two Gaussian blobs per class in `[0, 1]^dim`, clamped.
pub fn blob_dataset(n: usize, dim: usize, classes: usize, seed: u64) -> Dataset {
    let mut r = rng(seed);
    let centres: Vec<Vec<f64>> = (0..classes).map(|_| (0..dim).map(|_| r.random_range(0.2..0.8)).collect()).collect();
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let c = i % classes;
        rows.push(centres[c].iter().map(|m| (m + r.random_range(-0.15..0.15f64)).clamp(0.0, 1.0)).collect());
        labels.push(c);
    }
    Dataset::from_rows(rows, labels, classes).unwrap()
}
