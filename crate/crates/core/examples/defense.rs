//! Plain versus β-smoothed versus SmoothGrad attacks on the same targets,
//! and the recovery curve of a manipulated map as β is lowered.
//!
//!     cargo run --release --example defense [runs]

mod common;

use xmanip::experiment::{run_defense_eval, DefenseConfig};
use xmanip::explain::{Method, MethodSpec};

fn main() {
    let runs = std::env::args().nth(1).map_or(3, |s| s.parse().expect("runs"));
    let (train_set, test) = common::mnist();
    let net = common::mnist_net(&train_set);
    let cfg = DefenseConfig::for_method(Method::Gradient, runs, 0);
    let out = common::out_dir("defense");
    let (summary, _) = run_defense_eval(&net, &test, &MethodSpec::new(Method::Gradient), &cfg, &out).unwrap();

    for arm in &summary.arms {
        println!("{:<16} median target PCC {:.3}", format!("{:?}", arm.arm), arm.median_target_pcc.unwrap_or(f64::NAN));
    }
    println!("\n  β      manipulated→original  clean→original");
    for (i, beta) in summary.recovery_betas.iter().enumerate() {
        println!(
            "{beta:>5}   {:>10.3}            {:>10.3}",
            summary.median_recovery[i].unwrap_or(f64::NAN),
            summary.median_unmanipulated[i].unwrap_or(f64::NAN)
        );
    }
    println!("artifacts in {}", out.display());
}
