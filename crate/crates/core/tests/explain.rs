mod common;

use common::*;
use proptest::prelude::*;
use xmanip::explain::{explain, ig_completeness, lrp_trace, normalize, pixel_relevance, Method, MethodSpec};
use xmanip::metrics::pcc;
use xmanip::{Activation, Network, Tensor};

fn relu_net(seed: u64) -> (Network, Vec<f64>) {
    let (soft, _) = random_softplus_net(seed);
    let x = uniform(soft.input_dim(), 0.0, 1.0, seed + 7);
    (soft.with_activation(Activation::Relu), x)
}

#[test]
fn lrp_conserves_relevance_on_100_nets() {
    let mut checked = 0;
    let mut seed = 0;
    while checked < 100 {
        let (net, x) = relu_net(seed);
        seed += 1;
        let class = net.predict(&x).unwrap();
        let trace = lrp_trace(&net, &x, class).unwrap();
        if trace.stabilized {
            continue;
        }
        for (l, total) in trace.totals().iter().enumerate() {
            assert!((total - 1.0).abs() < 1e-10, "net {seed}, layer {l}: {total}");
        }
        let sum: f64 = trace.input_relevance().iter().sum();
        assert!((sum - 1.0).abs() < 1e-10);
        checked += 1;
    }
    assert!(seed < 400, "too many degenerate nets: {seed}");
}

#[test]
fn lrp_map_equals_trace_input_relevance() {
    let (net, x) = relu_net(3);
    let class = net.predict(&x).unwrap();
    let map = explain(&net, &x, class, &MethodSpec::new(Method::Lrp)).unwrap();
    let trace = lrp_trace(&net, &x, class).unwrap();
    for (a, b) in map.values().iter().zip(trace.input_relevance()) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn ig_is_complete_at_300_steps_on_50_nets() {
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    let mut seed = 0;
    while checked < 50 {
        let (net, x) = random_softplus_net(seed);
        seed += 1;
        let spec = MethodSpec::integrated_gradients(Tensor::zeros(vec![x.len()]), 300);
        let c = ig_completeness(&net, &x, 0, &spec).unwrap();
        // The relative error is ill-conditioned when the score barely moves.
        if c.score_difference.abs() < 1e-2 {
            continue;
        }
        worst = worst.max(c.relative_error);
        checked += 1;
    }
    assert!(worst < 0.01, "worst relative error {worst}");
}

#[test]
fn distinct_images_have_distinct_maps() {
    let net = Network::random(&[16, 12, 4], Activation::Relu, 5).unwrap();
    for kind in [Method::Gradient, Method::GradientXInput, Method::Gbp, Method::Lrp] {
        let spec = MethodSpec::new(kind);
        let a = explain(&net, &uniform(16, 0.0, 1.0, 1), 0, &spec).unwrap();
        let b = explain(&net, &uniform(16, 0.0, 1.0, 2), 0, &spec).unwrap();
        assert!(pcc(a.values(), b.values()).unwrap() < 1.0, "{kind:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn gradient_x_input_is_pointwise_product(seed in 0u64..10_000) {
        let (net, x) = random_softplus_net(seed);
        let g = explain(&net, &x, 0, &MethodSpec::new(Method::Gradient)).unwrap();
        let gx = explain(&net, &x, 0, &MethodSpec::new(Method::GradientXInput)).unwrap();
        for ((a, b), xi) in gx.values().iter().zip(g.values()).zip(&x) {
            prop_assert!((a - b * xi).abs() < 1e-12);
        }
    }

    #[test]
    fn normalized_maps_sum_to_one(seed in 0u64..10_000) {
        let (net, x) = relu_net(seed);
        let class = net.predict(&x).unwrap();
        let map = explain(&net, &x, class, &MethodSpec::new(Method::Gradient)).unwrap();
        if map.values().iter().any(|v| *v != 0.0) {
            let n = normalize(&pixel_relevance(&map, 1).unwrap()).unwrap();
            prop_assert!((n.values().iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }
}
