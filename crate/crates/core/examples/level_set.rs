//! Traces contours of the 2-D toy network and checks that the unit normal
//! turns no faster than the largest curvature allows along each one.
//!
//!     cargo run --release --example level_set

mod common;

use std::fmt::Write;

use xmanip::artifact::write_atomic;
use xmanip::geometry::{toy_network, trace_level_set_2d_with, verify_theorem1, NetworkField, TraceOptions};
use xmanip::Activation;

fn main() {
    let out = common::out_dir("level_set");
    let mut opts = TraceOptions::new(8.0, 1e-3);
    opts.bounds = Some([-1.0, 1.0, -1.0, 1.0]);
    opts.stop_when_closed = true;
    for beta in [0.5, 1.0, 2.0, 5.0, 10.0] {
        let field = NetworkField::new(toy_network(50, Activation::Softplus { beta }, 0).unwrap(), 0).unwrap();
        let trace = trace_level_set_2d_with(&field, [-0.4, 0.1], &opts).unwrap();
        let rep = verify_theorem1(&field, &trace).unwrap();
        let chained = rep.chained.as_ref().unwrap();
        println!(
            "β = {beta:<4} {:>5} vertices, length {:.3}, closed {}, |λ_max| {:.3}, worst slack {:.2e}, \
             curvature bound {:.1} holds {}",
            trace.points.len(),
            trace.length(),
            trace.closed,
            rep.lambda_max.abs(),
            rep.worst_slack,
            chained.bound,
            chained.holds
        );
        let mut csv = String::from("x,y,lambda\n");
        for (p, k) in trace.points.iter().zip(&rep.curvatures) {
            writeln!(csv, "{},{},{}", p[0], p[1], k).unwrap();
        }
        write_atomic(&out.join(format!("contour_beta{beta}.csv")), csv.as_bytes()).unwrap();
    }
    println!("contours in {}", out.display());
}
