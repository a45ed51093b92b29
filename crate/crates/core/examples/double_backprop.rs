//! Second derivatives by differentiating a recorded backward pass: a
//! Hessian-vector product of `Σ softplus(Wx)` built by hand on the tape,
//! checked against the network API and against differences of gradients.
//!
//!     cargo run --release --example double_backprop

use xmanip::net::DenseLayer;
use xmanip::tape::Tape;
use xmanip::{Activation, Network, Tensor};

fn main() {
    let w = vec![0.7, -0.2, 0.4, 0.1, 0.9, -0.6];
    let beta = 2.0;
    let x = vec![0.3, -0.5, 0.8];
    let v = vec![1.0, 0.5, -0.25];

    // Forward value, its gradient Wᵀσ(Wx) written out as tape operations,
    // then the gradient of ⟨∇f, v⟩, which is H·v.
    let mut tape = Tape::new();
    let xv = tape.input(x.clone());
    let z = tape.matvec(&w, 3, xv);
    let slope = tape.sigmoid(z, beta);
    let grad = tape.matvec_t(&w, 3, slope);
    let vv = tape.constant(v.clone());
    let along = tape.dot(grad, vv);
    let hv = tape.gradient(along, xv);
    println!("∇f       {:.6?}", tape.value(grad));
    println!("H·v tape {hv:.6?}");

    // The same function as a network: softplus hidden layer, summing output.
    let hidden = DenseLayer::new(Tensor::matrix(2, 3, w.clone()).unwrap(), Tensor::zeros(vec![2])).unwrap();
    let out = DenseLayer::new(Tensor::matrix(1, 2, vec![1.0, 1.0]).unwrap(), Tensor::zeros(vec![1])).unwrap();
    let net = Network::new(vec![hidden, out], Activation::Softplus { beta }).unwrap();
    println!("H·v net  {:.6?}", net.grad_of_grad_loss(&x, &v, 0).unwrap());

    let h = 1e-5;
    let at = |s: f64| {
        let p: Vec<f64> = x.iter().zip(&v).map(|(a, b)| a + s * b).collect();
        net.grad_input(&p, 0).unwrap()
    };
    let (gp, gm) = (at(h), at(-h));
    let fd: Vec<f64> = gp.iter().zip(&gm).map(|(a, b)| (a - b) / (2.0 * h)).collect();
    println!("H·v fd   {fd:.6?}");
    println!("full Hessian:\n{:?}", net.hessian(&x, 0).unwrap().data().chunks(3).collect::<Vec<_>>());
}
