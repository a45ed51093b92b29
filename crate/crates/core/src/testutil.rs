use crate::activation::Activation;
use crate::net::{DenseLayer, Network};
use crate::tensor::Tensor;

/// `g(x) = softplus_β(wᵀx)` as one hidden unit followed by an identity
/// output layer.
pub(crate) fn softplus_unit(w: &[f64], beta: f64) -> Network {
    let d = w.len();
    let hidden = DenseLayer::new(Tensor::matrix(1, d, w.to_vec()).unwrap(), Tensor::zeros(vec![1])).unwrap();
    let out = DenseLayer::new(Tensor::matrix(1, 1, vec![1.0]).unwrap(), Tensor::zeros(vec![1])).unwrap();
    Network::new(vec![hidden, out], Activation::Softplus { beta }).unwrap()
}

/// Single affine layer with zero bias.
pub(crate) fn linear(w: Vec<f64>, rows: usize, cols: usize, act: Activation) -> Network {
    let layer = DenseLayer::new(Tensor::matrix(rows, cols, w).unwrap(), Tensor::zeros(vec![rows])).unwrap();
    Network::new(vec![layer], act).unwrap()
}

pub(crate) fn central_diff(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
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

pub(crate) fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    num / den.max(1e-300)
}
