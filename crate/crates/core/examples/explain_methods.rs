//! All six explanation methods on one MNIST test image, written as PGM
//! heatmaps, with the pairwise correlation between their maps.
//!
//!     cargo run --release --example explain_methods [test index]

mod common;

use xmanip::experiment::method_spec;
use xmanip::explain::{explain, normalize, pixel_relevance, Method};
use xmanip::metrics::pcc;

fn main() {
    let index = std::env::args().nth(1).map_or(0, |s| s.parse().expect("index"));
    let (train_set, test) = common::mnist();
    let net = common::mnist_net(&train_set);
    let x = test.input(index);
    let class = net.predict(x).unwrap();
    println!("test image {index}: label {}, predicted {class}", test.label(index));

    let out = common::out_dir("explain_methods");
    let mut maps = Vec::new();
    for method in Method::ALL {
        let spec = method_spec(method, &net, Some(&train_set), 30, 2000).unwrap();
        let raw = explain(&net, x, class, &spec).unwrap();
        let map = normalize(&pixel_relevance(&raw, 1).unwrap()).unwrap();
        map.write_pgm(&out.join(format!("{}.pgm", method.name())), 28, 28).unwrap();
        let top = map.values().iter().cloned().fold(0.0, f64::max);
        println!("{:<20} raw sum {:>9.4}  max share {:.4}", method.name(), raw.values().iter().sum::<f64>(), top);
        maps.push((method, map));
    }

    print!("\n{:<20}", "PCC");
    for (m, _) in &maps {
        print!("{:>8.6}", &m.name()[..6.min(m.name().len())]);
    }
    println!();
    for (m, a) in &maps {
        print!("{:<20}", m.name());
        for (_, b) in &maps {
            print!("{:>8.3}", pcc(a.values(), b.values()).unwrap());
        }
        println!();
    }
    println!("\nheatmaps in {}", out.display());
}
