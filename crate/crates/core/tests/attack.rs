mod common;

use common::*;
use proptest::prelude::*;
use xmanip::attack::{manipulate, target_from_image, AttackConfig};
use xmanip::experiment::median;
use xmanip::explain::{Method, MethodSpec};
use xmanip::{Activation, Network};

fn small_net() -> Network {
    Network::random(&[64, 12, 8, 3], Activation::Relu, 4).unwrap()
}

fn quick(method: Method) -> AttackConfig {
    AttackConfig { iterations: 40, lr: 1e-2, weight_h: 1e4, weight_g: 1.0, ..AttackConfig::for_method(method) }
}

#[test]
fn output_delta_shrinks_as_the_output_weight_grows() {
    let net = small_net();
    let spec = MethodSpec::new(Method::Gradient);
    let mut medians = Vec::new();
    for gamma in [1e-2, 1e2, 1e4 * 1e9] {
        let cfg = AttackConfig { weight_g: gamma, ..quick(Method::Gradient) };
        let deltas: Vec<f64> = (0..10)
            .map(|r| {
                let x = uniform(64, 0.0, 1.0, 2 * r);
                let xt = uniform(64, 0.0, 1.0, 2 * r + 1);
                let class = net.predict(&x).unwrap();
                let target = target_from_image(&net, &xt, class, &spec).unwrap();
                manipulate(&net, &x, &target, class, &spec, &cfg).unwrap().output_delta_logits
            })
            .collect();
        medians.push(median(&deltas).unwrap());
    }
    assert!(medians[0] > medians[1] && medians[1] > medians[2], "{medians:?}");
}

#[test]
fn lrp_defaults_disable_beta_growth() {
    assert!(!AttackConfig::for_method(Method::Lrp).beta_growth.enabled);
    for m in Method::ALL.into_iter().filter(|m| *m != Method::Lrp) {
        assert!(AttackConfig::for_method(m).beta_growth.enabled, "{m:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn adversarial_inputs_stay_in_the_box(seed in 0u64..1000, lr in 1e-3f64..0.5) {
        let net = small_net();
        let spec = MethodSpec::new(Method::GradientXInput);
        let x = uniform(64, 0.0, 1.0, seed);
        let class = net.predict(&x).unwrap();
        let target = target_from_image(&net, &uniform(64, 0.0, 1.0, seed + 1), class, &spec).unwrap();
        let cfg = AttackConfig { lr, iterations: 15, ..quick(Method::GradientXInput) };
        let r = manipulate(&net, &x, &target, class, &spec, &cfg).unwrap();
        prop_assert!(r.x_adv.iter().all(|v| (0.0..=1.0).contains(v)));
        prop_assert_eq!(r.loss_trace.len(), 15);
    }
}
