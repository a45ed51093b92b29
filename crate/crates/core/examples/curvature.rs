//! Principal curvatures of decision level sets: a sphere, the 2-D toy
//! network at several β, and a random softplus MLP next to its weight-norm
//! bound.
//!
//!     cargo run --release --example curvature

use xmanip::geometry::{curvature_bound_constant, curvature_report, toy_network, NetworkField, SphereField};
use xmanip::{Activation, Network};

fn main() {
    for r in [0.5, 1.0, 5.0] {
        let rep = curvature_report(&SphereField { dim: 3 }, &[r, 0.0, 0.0]).unwrap();
        println!("sphere r = {r}: curvatures {:?}", rep.principal_curvatures);
    }

    println!("\ntoy network at (−0.4, 0.1):");
    for beta in [0.5, 1.0, 2.0, 5.0, 10.0] {
        let field = NetworkField::new(toy_network(50, Activation::Softplus { beta }, 0).unwrap(), 0).unwrap();
        let rep = curvature_report(&field, &[-0.4, 0.1]).unwrap();
        println!("  β = {beta:<4} λ = {:>8.4}  bound β·C̃/‖∇g‖ = {:.1}", rep.lambda_max, rep.bound.unwrap());
    }

    // A 32-input softplus MLP: every principal curvature stays under the
    // bound, which shrinks linearly with β.
    let base = Network::random(&[32, 24, 16, 3], Activation::Relu, 5).unwrap();
    let x: Vec<f64> = (0..32).map(|i| (i as f64 * 0.37).sin().abs()).collect();
    println!("\n32-24-16-3 MLP, C̃ = {:.3}", curvature_bound_constant(&base));
    for beta in [0.5, 2.0, 10.0, 50.0] {
        let field = NetworkField::new(base.with_activation(Activation::Softplus { beta }), 0).unwrap();
        let rep = curvature_report(&field, &x).unwrap();
        println!(
            "  β = {beta:<4} |λ|max = {:.4}  ‖∇g‖ = {:.3}  bound = {:.3}",
            rep.lambda_max.abs(),
            rep.gradient_norm,
            rep.bound.unwrap()
        );
    }
}
