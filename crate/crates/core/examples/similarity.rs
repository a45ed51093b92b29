//! SSIM, PCC and MSE between explanation maps and between images, with the
//! map and image normalisation conventions.
//!
//!     cargo run --release --example similarity

mod common;

use xmanip::explain::{explain, Method, MethodSpec};
use xmanip::metrics::{pcc, report, Kind};

fn main() {
    let (train_set, test) = common::mnist();
    let net = common::mnist_net(&train_set);
    let spec = MethodSpec::new(Method::Gradient);
    let (a, b) = (test.input(0), test.input(1));
    let class = net.predict(a).unwrap();
    let ha = explain(&net, a, class, &spec).unwrap();
    let hb = explain(&net, b, class, &spec).unwrap();
    let abs = |v: &[f64]| v.iter().map(|x| x.abs()).collect::<Vec<_>>();

    let same = report(a, a, Kind::Image).unwrap();
    println!("image vs itself        ssim {:.4} pcc {:.4} mse {:.2e}", same.ssim, same.pcc, same.mse);
    let img = report(a, b, Kind::Image).unwrap();
    println!("image 0 vs image 1     ssim {:.4} pcc {:.4} mse {:.2e}", img.ssim, img.pcc, img.mse);
    let maps = report(&abs(ha.values()), &abs(hb.values()), Kind::Map).unwrap();
    println!("map 0 vs map 1         ssim {:.4} pcc {:.4} mse {:.2e}", maps.ssim, maps.pcc, maps.mse);

    let shifted: Vec<f64> = a.iter().map(|v| 0.5 * v + 0.2).collect();
    let inverted: Vec<f64> = a.iter().map(|v| 1.0 - v).collect();
    println!("pcc(x, 0.5x + 0.2)     {:.6}", pcc(a, &shifted).unwrap());
    println!("pcc(x, 1 − x)          {:.6}", pcc(a, &inverted).unwrap());
    println!("pcc(constant, x)       {:?}", pcc(&[0.5; 784], a).map_err(|e| e.to_string()));
}
