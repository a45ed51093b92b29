#![allow(dead_code)]

use std::path::PathBuf;

use xmanip::experiment::DataConfig;
use xmanip::net::{load_weights, save_weights, train, Dataset, TrainConfig};
use xmanip::{Activation, Network};

/// `$XMANIP_DATA`, or the repository's `data/mnist`.
pub fn data_dir() -> PathBuf {
    std::env::var_os("XMANIP_DATA")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist"))
}

pub fn out_dir(name: &str) -> PathBuf {
    let dir = PathBuf::from("out/examples").join(name);
    std::fs::create_dir_all(&dir).expect("create output directory");
    dir
}

pub fn mnist() -> (Dataset, Dataset) {
    let data = DataConfig::at(data_dir());
    (data.load_train().expect("training split"), data.load_test().expect("test split"))
}

/// The MNIST MLP from `train_mnist`, or a quick 3-epoch one when that
/// example has not been run yet.
pub fn mnist_net(train_set: &Dataset) -> Network {
    let path = PathBuf::from("out/examples/train_mnist/weights.json");
    if let Ok(net) = load_weights(&path) {
        return net;
    }
    eprintln!("no {}; training a 3-epoch network", path.display());
    let init = Network::random(&[784, 128, 64, 10], Activation::Relu, 0).unwrap();
    let cfg = TrainConfig { epochs: 3, ..TrainConfig::default() };
    let net = train(&init, train_set, None, &cfg).unwrap().network;
    std::fs::create_dir_all(path.parent().unwrap()).unwrap();
    save_weights(&net, &path).unwrap();
    net
}
