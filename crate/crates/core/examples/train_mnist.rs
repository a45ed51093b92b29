//! Trains the 784-128-64-10 relu MLP on the bundled MNIST subset and saves
//! its weights for the other examples.
//!
//!     cargo run --release --example train_mnist [epochs]

mod common;

use std::time::Instant;

use xmanip::net::{accuracy, save_weights, train, TrainConfig};
use xmanip::{Activation, Network};

fn main() {
    let epochs = std::env::args().nth(1).map_or(20, |s| s.parse().expect("epochs"));
    let (train_set, test) = common::mnist();
    println!("{} training / {} test images", train_set.len(), test.len());

    let init = Network::random(&[784, 128, 64, 10], Activation::Relu, 0).unwrap();
    let t = Instant::now();
    let report = train(&init, &train_set, Some(&test), &TrainConfig { epochs, ..TrainConfig::default() }).unwrap();
    println!(
        "{epochs} epochs in {:.1?}: loss {:.4}, train accuracy {:.4}, test accuracy {:.4}",
        t.elapsed(),
        report.final_loss,
        report.train_accuracy,
        accuracy(&report.network, &test).unwrap()
    );

    let path = common::out_dir("train_mnist").join("weights.json");
    let manifest = save_weights(&report.network, &path).unwrap();
    println!("saved {:?} to {}", manifest.layer_sizes, path.display());
}
