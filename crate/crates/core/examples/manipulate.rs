//! One targeted manipulation: moves an MNIST digit so its gradient map looks
//! like another digit's while the logits stay put.
//!
//!     cargo run --release --example manipulate [method]

mod common;

use xmanip::attack::{manipulate, target_from_image, AttackConfig};
use xmanip::experiment::method_spec;
use xmanip::explain::{explain, normalize, pixel_relevance, Method};

fn main() {
    let method: Method = std::env::args().nth(1).map_or(Method::Gradient, |s| s.parse().expect("method name"));
    let (train_set, test) = common::mnist();
    let net = common::mnist_net(&train_set);
    let (source, target) = (0, 1);
    let x = test.input(source);
    let class = net.predict(x).unwrap();
    let spec = method_spec(method, &net, Some(&train_set), 30, 2000).unwrap();
    let target_map = target_from_image(&net, test.input(target), class, &spec).unwrap();

    let cfg = AttackConfig::for_method(method);
    println!(
        "{}: {} iterations, lr {:.1e}, weights h {:.0e} / g {:.0e}",
        method.name(),
        cfg.iterations,
        cfg.lr,
        cfg.weight_h,
        cfg.weight_g
    );
    let r = manipulate(&net, x, &target_map, class, &spec, &cfg).unwrap();
    let loss = &r.loss_trace;
    println!("loss {:.3e} -> {:.3e}", loss[0], loss[loss.len() - 1]);
    println!("map PCC to target {:.3} -> {:.3}", r.initial_map_similarity.pcc, r.final_map_similarity.pcc);
    println!(
        "image MSE {:.2e}, logit change {:.2e}, class {} -> {}",
        r.image_similarity.mse, r.output_delta_logits, r.original_prediction, r.adversarial_prediction
    );

    let out = common::out_dir("manipulate");
    let show = |v: &[f64]| normalize(&pixel_relevance(&explain(&net, v, class, &spec).unwrap(), 1).unwrap()).unwrap();
    show(x).write_pgm(&out.join("original_map.pgm"), 28, 28).unwrap();
    target_map.write_pgm(&out.join("target_map.pgm"), 28, 28).unwrap();
    show(&r.x_adv).write_pgm(&out.join("manipulated_map.pgm"), 28, 28).unwrap();
    xmanip::artifact::write_pgm(&out.join("x_adv.pgm"), &r.x_adv, 28, 28).unwrap();
    println!("heatmaps in {}", out.display());
}
