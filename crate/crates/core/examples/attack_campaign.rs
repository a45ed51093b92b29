//! A seeded campaign of manipulations on disjoint MNIST test pairs, with the
//! same artifacts the `xmanip attack` command writes.
//!
//!     cargo run --release --example attack_campaign [method] [runs]

mod common;

use xmanip::attack::AttackConfig;
use xmanip::experiment::{method_spec, run_attack_campaign, CampaignConfig};
use xmanip::explain::Method;

fn main() {
    let mut args = std::env::args().skip(1);
    let method: Method = args.next().map_or(Method::Gbp, |s| s.parse().expect("method name"));
    let runs = args.next().map_or(5, |s| s.parse().expect("runs"));
    let (train_set, test) = common::mnist();
    let net = common::mnist_net(&train_set);
    let spec = method_spec(method, &net, Some(&train_set), 30, 2000).unwrap();

    let out = common::out_dir("attack_campaign");
    let (summary, records) =
        run_attack_campaign(&net, &test, &spec, &AttackConfig::for_method(method), &CampaignConfig::new(runs, 0), &out)
            .unwrap();
    for r in &records {
        if let Some(res) = &r.result {
            println!(
                "run {}: {} -> {}  PCC {:.3} -> {:.3}  image MSE {:.1e}",
                r.run,
                r.source,
                r.target,
                res.initial_map_similarity.pcc,
                res.final_map_similarity.pcc,
                res.image_similarity.mse
            );
        }
    }
    for m in &summary.metrics {
        let cells: Vec<String> =
            m.percentiles.iter().map(|(p, v)| format!("p{p}={:.3e}", v.unwrap_or(f64::NAN))).collect();
        println!("{:<22} {}", m.name, cells.join(" "));
    }
    println!("class preserved {}/{}; artifacts in {}", summary.class_preserved, summary.completed, out.display());
}
