//! β-smoothing and SmoothGrad on an MNIST gradient map: how far each moves
//! the map from the plain relu explanation, and p_β-noise SmoothGrad on a
//! single relu unit converging to the β-smoothed map.
//!
//!     cargo run --release --example smoothing

mod common;

use xmanip::explain::{explain, normalize, pixel_relevance, smooth_explain, Method, MethodSpec, Noise, Smoothing};
use xmanip::metrics::pcc;
use xmanip::net::DenseLayer;
use xmanip::{Activation, Network, Tensor};

fn shown(net: &Network, x: &[f64], class: usize, spec: &MethodSpec, s: &Smoothing) -> Vec<f64> {
    let raw = smooth_explain(net, x, class, spec, s).unwrap();
    normalize(&pixel_relevance(&raw, 1).unwrap()).unwrap().values().to_vec()
}

fn main() {
    let (train_set, test) = common::mnist();
    let net = common::mnist_net(&train_set);
    let x = test.input(7);
    let class = net.predict(x).unwrap();
    let spec = MethodSpec::new(Method::Gradient);
    let plain = shown(&net, x, class, &spec, &Smoothing::None);

    println!("PCC to the plain gradient map:");
    for beta in [100.0, 20.0, 5.0, 1.0, 0.8] {
        let m = shown(&net, x, class, &spec, &Smoothing::Beta { beta });
        println!("  β-smoothing β = {beta:<5} {:.4}", pcc(&m, &plain).unwrap());
    }
    for samples in [10, 50] {
        let m = shown(&net, x, class, &spec, &Smoothing::smoothgrad(samples, 0.1, 0));
        println!("  SmoothGrad N = {samples:<4} {:.4}", pcc(&m, &plain).unwrap());
    }

    // One relu unit: SmoothGrad with p_β noise averages to the softplus map.
    // Per-coordinate noise projects onto p_β only for an axis-aligned w; see
    // the smoothgrad_theorem example for the general case.
    let w = vec![0.0, -1.5, 0.0];
    let hidden = DenseLayer::new(Tensor::matrix(1, 3, w.clone()).unwrap(), Tensor::zeros(vec![1])).unwrap();
    let out = DenseLayer::new(Tensor::matrix(1, 1, vec![1.0]).unwrap(), Tensor::zeros(vec![1])).unwrap();
    let unit = Network::new(vec![hidden, out], Activation::Relu).unwrap();
    let xs = [0.2, 0.1, -0.3];
    let beta = 2.0;
    let w_norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
    let smoothed = explain(&unit.with_activation(Activation::Softplus { beta: beta / w_norm }), &xs, 0, &spec).unwrap();
    println!("\none unit, softplus map at β/‖w‖: {:.4?}", smoothed.values());
    for samples in [100, 10_000, 200_000] {
        let sg = Smoothing::SmoothGrad { samples, noise_level: 0.0, seed: 1, noise: Noise::PBeta { beta } };
        let m = smooth_explain(&unit, &xs, 0, &spec, &sg).unwrap();
        println!("  p_β SmoothGrad N = {samples:<7} {:.4?}", m.values());
    }
}
