use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::explain::Noise;
use crate::tensor::Tensor;
use crate::testutil::{central_diff, rel_err};

fn uniform(dim: usize, lo: f64, hi: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..dim).map(|_| rng.random_range(lo..hi)).collect()
}

fn small_net(seed: u64) -> Network {
    Network::random(&[64, 12, 8, 3], Activation::Relu, seed).unwrap()
}

fn quick_config(method: Method) -> AttackConfig {
    AttackConfig { iterations: 30, lr: 1e-2, weight_h: 1e4, weight_g: 1.0, ..AttackConfig::for_method(method) }
}

fn spec_for(net: &Network, method: Method) -> MethodSpec {
    match method {
        Method::IntegratedGradients => MethodSpec::new(method).with_zero_baseline(net.input_dim()),
        Method::PatternAttribution => {
            let patterns = net
                .layers()
                .iter()
                .enumerate()
                .map(|(l, layer)| {
                    let vals = uniform(layer.weights.len(), 0.2, 1.0, 90 + l as u64);
                    Tensor::new(layer.weights.shape().to_vec(), vals).unwrap()
                })
                .collect();
            MethodSpec::pattern_attribution(patterns)
        }
        _ => MethodSpec::new(method),
    }
}

#[test]
fn beta_schedule_examples() {
    assert_eq!(beta_schedule(0, 1500, 10.0, 100.0), 10.0);
    assert_eq!(beta_schedule(1500, 1500, 10.0, 100.0), 100.0);
    assert!((beta_schedule(750, 1500, 10.0, 100.0) - 10.0 * 10f64.sqrt()).abs() < 1e-12);
    assert!((beta_schedule(750, 1500, 10.0, 100.0) - 31.6228).abs() < 1e-4);
    let mut prev = 0.0;
    for t in 0..=100 {
        let b = beta_schedule(t, 100, 10.0, 100.0);
        assert!(b >= prev);
        prev = b;
    }
}

#[test]
fn defaults_follow_the_tables() {
    let grad = AttackConfig::for_method(Method::Gradient);
    assert_eq!(grad.iterations, 1500);
    assert!((grad.lr - 1e-3 * defaults().desk_lr_scale).abs() < 1e-18);
    assert!(grad.beta_growth.enabled);
    assert_eq!((grad.weight_h, grad.weight_g, grad.weight_x), (1e11, 1e6, 0.0));
    let lrp = AttackConfig::for_method(Method::Lrp);
    assert!(!lrp.beta_growth.enabled);
    assert_eq!(lrp.beta_at(0), lrp.beta_at(700));
    let beta = AttackConfig::for_arm(Method::Gradient, Arm::BetaSmoothing);
    assert_eq!(beta.iterations, 500);
    assert_eq!(beta.smoothing, Smoothing::Beta { beta: 0.8 });
    let sg = AttackConfig::for_arm(Method::Lrp, Arm::SmoothGrad);
    assert!(matches!(sg.smoothing, Smoothing::SmoothGrad { samples: 10, .. }));
}

#[test]
fn config_validation() {
    let ok = AttackConfig::for_method(Method::Gradient);
    assert!(ok.validate().is_ok());
    for bad in [
        AttackConfig { lr: 0.0, ..ok.clone() },
        AttackConfig { weight_g: -1.0, ..ok.clone() },
        AttackConfig { clamp_lo: 1.0, clamp_hi: 0.0, ..ok.clone() },
        AttackConfig { beta_growth: BetaGrowth { enabled: true, beta0: 100.0, beta_end: 10.0 }, ..ok.clone() },
    ] {
        assert!(matches!(bad.validate(), Err(Error::Config(_))));
    }
}

#[test]
fn zero_iterations_return_the_input() {
    let net = small_net(1);
    let x = uniform(64, 0.0, 1.0, 2);
    let spec = MethodSpec::new(Method::Gradient);
    let target = target_from_image(&net, &uniform(64, 0.0, 1.0, 3), 0, &spec).unwrap();
    let cfg = AttackConfig { iterations: 0, ..AttackConfig::for_method(Method::Gradient) };
    let r = manipulate(&net, &x, &target, 0, &spec, &cfg).unwrap();
    assert_eq!(r.x_adv, x);
    assert!(r.class_preserved);
    assert!(r.loss_trace.is_empty());
    assert_eq!(r.output_delta_logits, 0.0);
    assert_eq!(r.final_map_similarity, r.initial_map_similarity);
}

#[test]
fn output_term_alone_keeps_the_input() {
    let net = small_net(4);
    let x = uniform(64, 0.0, 1.0, 5);
    let spec = MethodSpec::new(Method::Gradient);
    let target = target_from_image(&net, &uniform(64, 0.0, 1.0, 6), 0, &spec).unwrap();
    for optimizer in [Optimizer::Gd, Optimizer::Momentum { momentum: 0.9 }, defaults().optimizer] {
        let cfg = AttackConfig {
            weight_h: 0.0,
            weight_g: 1e6,
            iterations: 50,
            optimizer,
            ..AttackConfig::for_method(Method::Gradient)
        };
        let r = manipulate(&net, &x, &target, 0, &spec, &cfg).unwrap();
        assert!(r.output_delta_logits < 1e-8);
        assert_eq!(r.x_adv, x);
    }
}

#[test]
fn self_target_starts_at_the_fixed_point() {
    let net = small_net(7);
    let x = uniform(64, 0.1, 0.9, 8);
    let spec = MethodSpec::new(Method::Gradient);
    let target = target_from_image(&net, &x, 1, &spec).unwrap();
    assert!((target.values().iter().sum::<f64>() - 1.0).abs() < 1e-9);
    let r = manipulate(&net, &x, &target, 1, &spec, &AttackConfig::for_method(Method::Gradient)).unwrap();
    assert!((r.initial_map_similarity.pcc - 1.0).abs() < 1e-12);
    assert!(r.final_map_similarity.pcc > 0.99);
}

#[test]
fn objective_gradient_matches_finite_differences() {
    let net = small_net(11);
    let x = uniform(64, 0.2, 0.8, 12);
    let x_adv: Vec<f64> = x.iter().zip(uniform(64, -0.05, 0.05, 13)).map(|(a, b)| a + b).collect();
    for method in Method::ALL {
        let spec = spec_for(&net, method);
        let target = target_from_image(&net, &uniform(64, 0.0, 1.0, 14), 2, &spec).unwrap();
        let cfg = AttackConfig { weight_h: 1e3, weight_g: 1.0, weight_x: 0.5, ..AttackConfig::for_method(method) };
        let obj = AttackObjective::new(&net, &x, &target, 2, &spec, &cfg).unwrap();
        let beta = 3.0;
        let eval = obj.evaluate(&x_adv, beta, 0).unwrap();
        let fd = central_diff(|p| obj.evaluate(p, beta, 0).unwrap().total, &x_adv, 1e-6);
        let err = rel_err(&eval.gradient, &fd);
        assert!(err < 1e-3, "{method}: {err}");
        let parts = 1e3 * eval.map_term + eval.output_term + 0.5 * eval.image_term;
        assert!((eval.total - parts).abs() <= 1e-12 * eval.total.abs());
    }
}

#[test]
fn smoothed_objectives_match_finite_differences() {
    let net = small_net(21);
    let x = uniform(64, 0.2, 0.8, 22);
    let spec = MethodSpec::new(Method::Gradient);
    let target = target_from_image(&net, &uniform(64, 0.0, 1.0, 23), 0, &spec).unwrap();
    for smoothing in [
        Smoothing::Beta { beta: 0.8 },
        Smoothing::smoothgrad(4, 0.1, 3),
        Smoothing::SmoothGrad { samples: 3, noise_level: 0.0, seed: 1, noise: Noise::PBeta { beta: 20.0 } },
    ] {
        let cfg = AttackConfig { weight_h: 1e3, smoothing, ..AttackConfig::for_method(Method::Gradient) };
        let obj = AttackObjective::new(&net, &x, &target, 0, &spec, &cfg).unwrap();
        let eval = obj.evaluate(&x, 5.0, 7).unwrap();
        let fd = central_diff(|p| obj.evaluate(p, 5.0, 7).unwrap().total, &x, 1e-6);
        assert!(rel_err(&eval.gradient, &fd) < 1e-3, "{smoothing:?}");
    }
}

#[test]
fn attack_moves_the_map_towards_the_target() {
    let net = small_net(31);
    let x = uniform(64, 0.2, 0.8, 32);
    let spec = MethodSpec::new(Method::Gradient);
    let target = target_from_image(&net, &uniform(64, 0.0, 1.0, 33), 0, &spec).unwrap();
    let cfg = AttackConfig { iterations: 200, ..quick_config(Method::Gradient) };
    let r = manipulate(&net, &x, &target, 0, &spec, &cfg).unwrap();
    assert_eq!(r.loss_trace.len(), 200);
    assert!(r.loss_trace.last().unwrap() < &r.loss_trace[0]);
    assert!(r.final_map_similarity.mse < r.initial_map_similarity.mse);
    assert_eq!(r.final_beta, 100.0);
}

#[test]
fn rejects_bad_inputs() {
    let net = small_net(1);
    let x = uniform(64, 0.0, 1.0, 2);
    let spec = MethodSpec::new(Method::Gradient);
    let target = target_from_image(&net, &x, 0, &spec).unwrap();
    let cfg = quick_config(Method::Gradient);
    let soft = net.with_activation(Activation::Softplus { beta: 10.0 });
    assert!(matches!(manipulate(&soft, &x, &target, 0, &spec, &cfg), Err(Error::Config(_))));
    let mut outside = x.clone();
    outside[0] = 1.5;
    assert!(matches!(manipulate(&net, &outside, &target, 0, &spec, &cfg), Err(Error::Config(_))));
    let short = ExplanationMap::raw(vec![0.5, 0.5]).unwrap();
    assert!(matches!(manipulate(&net, &x, &short, 0, &spec, &cfg), Err(Error::Shape(_))));
    let signed = ExplanationMap::raw(vec![-1.0 / 64.0; 64]).unwrap();
    assert!(matches!(manipulate(&net, &x, &signed, 0, &spec, &cfg), Err(Error::DegenerateMap(_))));
}

#[test]
fn runs_are_deterministic() {
    let net = small_net(41);
    let x = uniform(64, 0.0, 1.0, 42);
    let spec = MethodSpec::new(Method::Gradient);
    let target = target_from_image(&net, &uniform(64, 0.0, 1.0, 43), 0, &spec).unwrap();
    let cfg = AttackConfig { smoothing: Smoothing::smoothgrad(3, 0.1, 9), ..quick_config(Method::Gradient) };
    let a = manipulate(&net, &x, &target, 0, &spec, &cfg).unwrap();
    let b = manipulate(&net, &x, &target, 0, &spec, &cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn adversarial_input_stays_in_the_box(seed in 0u64..1000, lr in 1e-3f64..1.0, gd in any::<bool>()) {
        let net = small_net(seed);
        let x = uniform(64, 0.0, 1.0, seed + 1);
        let spec = MethodSpec::new(Method::Gradient);
        let target = target_from_image(&net, &uniform(64, 0.0, 1.0, seed + 2), 0, &spec).unwrap();
        let cfg = AttackConfig {
            iterations: 10,
            lr,
            optimizer: if gd { Optimizer::Gd } else { defaults().optimizer },
            ..quick_config(Method::Gradient)
        };
        let r = manipulate(&net, &x, &target, 0, &spec, &cfg).unwrap();
        prop_assert!(r.x_adv.iter().all(|v| (0.0..=1.0).contains(v)));
    }
}
