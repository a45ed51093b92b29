#![allow(clippy::needless_range_loop)]

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::testutil::rel_err;

fn random_point(dim: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn softplus_field(sizes: &[usize], beta: f64, seed: u64) -> NetworkField {
    NetworkField::new(Network::random(sizes, Activation::Softplus { beta }, seed).unwrap(), 0).unwrap()
}

#[test]
fn normal_examples() {
    let n = unit_normal(&SphereField { dim: 2 }, &[3.0, 4.0]).unwrap();
    assert!(rel_err(&n, &[0.6, 0.8]) < 1e-15);
    let lin = LinearField { weights: vec![1.0, -2.0, 2.0], bias: 0.5 };
    for seed in 0..3 {
        let n = unit_normal(&lin, &random_point(3, seed)).unwrap();
        assert!(rel_err(&n, &[1.0 / 3.0, -2.0 / 3.0, 2.0 / 3.0]) < 1e-15);
    }
    assert!(matches!(unit_normal(&SphereField { dim: 2 }, &[0.0, 0.0]), Err(Error::VanishingGradient { .. })));
}

#[test]
fn sphere_curvatures_are_minus_inverse_radius() {
    for r in [0.5, 1.0, 5.0] {
        for dir in [[1.0, 0.0, 0.0], [0.6, 0.0, 0.8], [1.0, 1.0, 1.0]] {
            let len = norm(&dir);
            let p: Vec<f64> = dir.iter().map(|v| r * v / len).collect();
            let report = curvature_report(&SphereField { dim: 3 }, &p).unwrap();
            for &lambda in &report.principal_curvatures {
                assert!((lambda + 1.0 / r).abs() < 1e-8, "r {r}: {lambda}");
            }
            assert!(report.bound.is_none());
        }
    }
    let p = [2.0, 0.0, 0.0];
    let ff = second_fundamental_form(&SphereField { dim: 3 }, &p).unwrap();
    let lambdas = principal_curvatures(&ff.form).unwrap();
    assert!(rel_err(&lambdas, &[-0.5, -0.5]) < 1e-14);
}

#[test]
fn linear_field_is_flat() {
    let lin = LinearField { weights: vec![0.3, -1.0, 2.0, 0.5], bias: 0.0 };
    let report = curvature_report(&lin, &random_point(4, 1)).unwrap();
    assert!(report.fundamental_form.data().iter().all(|&v| v == 0.0));
    assert_eq!(report.lambda_max, 0.0);
}

#[test]
fn fundamental_form_matches_finite_difference_weingarten() {
    for seed in 0..5 {
        let f = softplus_field(&[8, 10, 6, 2], 2.0, seed);
        let p = random_point(8, 40 + seed);
        let ff = second_fundamental_form(&f, &p).unwrap();
        let e = &ff.tangent_basis;
        let column = |j: usize| -> Vec<f64> { (0..8).map(|i| e.at(i, j)).collect() };
        let h = 1e-5;
        for i in 0..7 {
            let u = column(i);
            let shifted = |s: f64| -> Vec<f64> {
                let q: Vec<f64> = p.iter().zip(&u).map(|(a, b)| a + s * b).collect();
                unit_normal(&f, &q).unwrap()
            };
            let (np, nm) = (shifted(h), shifted(-h));
            let dn: Vec<f64> = np.iter().zip(&nm).map(|(a, b)| (a - b) / (2.0 * h)).collect();
            for j in 0..7 {
                let oracle = -dot(&dn, &column(j));
                assert!((ff.form.at(i, j) - oracle).abs() < 1e-4, "seed {seed} ({i},{j})");
            }
        }
    }
}

/// Characteristic polynomial by the Faddeev–LeVerrier recursion; returns
/// `c` with `det(λI − A) = Σ_k c[k] λ^{n−k}`.
fn char_poly(a: &[Vec<f64>]) -> Vec<f64> {
    let n = a.len();
    let mut c = vec![1.0];
    let mut m = vec![vec![0.0; n]; n];
    for k in 1..=n {
        // M_k = A·M_{k−1} + c_{k−1}·I
        let mut next = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                next[i][j] = (0..n).map(|l| a[i][l] * m[l][j]).sum::<f64>() + if i == j { c[k - 1] } else { 0.0 };
            }
        }
        m = next;
        let trace: f64 = (0..n).map(|i| (0..n).map(|l| a[i][l] * m[l][i]).sum::<f64>()).sum();
        c.push(-trace / k as f64);
    }
    c
}

fn poly_roots_bracketed(c: &[f64], lo: f64, hi: f64) -> Vec<f64> {
    let eval = |x: f64| c.iter().fold(0.0, |acc, &ci| acc * x + ci);
    let grid = 200_000;
    let mut roots = Vec::new();
    let mut prev = (lo, eval(lo));
    for s in 1..=grid {
        let x = lo + (hi - lo) * s as f64 / grid as f64;
        let v = eval(x);
        if v == 0.0 || v.signum() != prev.1.signum() {
            let (mut a, mut b) = (prev.0, x);
            for _ in 0..200 {
                let mid = 0.5 * (a + b);
                if eval(mid).signum() == eval(a).signum() {
                    a = mid;
                } else {
                    b = mid;
                }
            }
            roots.push(0.5 * (a + b));
        }
        prev = (x, v);
    }
    roots
}

#[test]
fn eigenvalues_match_characteristic_polynomial_roots() {
    for seed in 0..10 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut a = vec![vec![0.0; 5]; 5];
        for i in 0..5 {
            for j in 0..=i {
                let v = rng.random_range(-1.0..1.0);
                a[i][j] = v;
                a[j][i] = v;
            }
        }
        let form = Tensor::matrix(5, 5, a.concat()).unwrap();
        let mut ours = principal_curvatures(&form).unwrap();
        let radius = (0..5).map(|i| a[i].iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
        let mut oracle = poly_roots_bracketed(&char_poly(&a), -radius - 0.1, radius + 0.1);
        assert_eq!(oracle.len(), 5, "seed {seed}");
        ours.sort_by(f64::total_cmp);
        oracle.sort_by(f64::total_cmp);
        for (x, y) in ours.iter().zip(&oracle) {
            assert!((x - y).abs() < 1e-8, "seed {seed}: {x} vs {y}");
        }
        let frob = form.frobenius_norm();
        let from_eigs = ours.iter().map(|l| l * l).sum::<f64>().sqrt();
        assert!((frob - from_eigs).abs() < 1e-10);
    }
}

#[test]
fn principal_curvatures_edge_cases() {
    assert_eq!(principal_curvatures(&Tensor::zeros(vec![3, 3])).unwrap(), vec![0.0; 3]);
    let asym = Tensor::matrix(2, 2, vec![1.0, 0.5, 0.0, 1.0]).unwrap();
    assert!(matches!(principal_curvatures(&asym), Err(Error::Asymmetric(_))));
    let sorted = principal_curvatures(&Tensor::matrix(2, 2, vec![0.5, 0.0, 0.0, -2.0]).unwrap()).unwrap();
    assert_eq!(sorted, vec![-2.0, 0.5]);
}

#[test]
fn bound_constant_examples() {
    let w = Tensor::matrix(2, 3, vec![1.0, -2.0, 0.5, 0.0, 1.5, -1.0]).unwrap();
    let single = Network::new(
        vec![DenseLayer::new(w.clone(), Tensor::zeros(vec![2])).unwrap()],
        Activation::Softplus { beta: 1.0 },
    )
    .unwrap();
    let f2 = w.frobenius_norm().powi(2);
    assert!((curvature_bound_constant(&single) - f2).abs() < 1e-12);

    let zero = Network::random(&[3, 4, 2], Activation::Softplus { beta: 1.0 }, 0).unwrap();
    let layers = zero
        .layers()
        .iter()
        .map(|l| DenseLayer::new(l.weights.map(|_| 0.0).unwrap(), l.bias.clone()).unwrap())
        .collect();
    let zero = Network::new(layers, zero.activation()).unwrap();
    assert_eq!(curvature_bound_constant(&zero), 0.0);

    // Two layers: ‖W²‖·‖W¹‖² + ‖W¹‖²·‖W²‖².
    let net = Network::random(&[3, 4, 2], Activation::Softplus { beta: 1.0 }, 5).unwrap();
    let (a, b) = (net.layers()[0].weights.frobenius_norm(), net.layers()[1].weights.frobenius_norm());
    assert!((curvature_bound_constant(&net) - (b * a * a + a * a * b * b)).abs() < 1e-12);
}

#[test]
fn sampled_curvature_stays_below_bound() {
    for (k, beta) in [0.5, 2.0, 10.0].into_iter().enumerate() {
        let f = softplus_field(&[6, 8, 8, 3], beta, 7 + k as u64);
        for s in 0..200 {
            let p = random_point(6, 1000 * k as u64 + s);
            let r = curvature_report(&f, &p).unwrap();
            let bound = r.bound.unwrap();
            assert!(r.lambda_max <= bound, "beta {beta} point {s}: {} > {bound}", r.lambda_max);
            assert_eq!(r.beta, Some(beta));
        }
    }
}

#[test]
fn circle_trace_has_length_two_pi() {
    let f = SphereField { dim: 2 };
    let tr = trace_level_set_2d(&f, [1.0, 0.0], 2.0 * std::f64::consts::PI, 1e-3).unwrap();
    assert!(tr.error.is_none());
    assert!((tr.length() - 2.0 * std::f64::consts::PI).abs() < 1e-4);
    let end = tr.points.last().unwrap();
    assert!(((end[0] - 1.0).powi(2) + end[1].powi(2)).sqrt() < 1e-3);
    assert!(tr.max_residual() < 1e-10);

    let mut opts = TraceOptions::new(10.0, 1e-2);
    opts.stop_when_closed = true;
    let closed = trace_level_set_2d_with(&f, [1.0, 0.0], &opts).unwrap();
    assert!(closed.closed);
    assert!(closed.length() < 2.0 * std::f64::consts::PI + 1e-2);
}

#[test]
fn linear_trace_is_a_straight_segment() {
    let f = LinearField { weights: vec![1.0, 2.0], bias: -0.5 };
    let tr = trace_level_set_2d(&f, [0.1, 0.2], 1.5, 0.1).unwrap();
    assert!((tr.length() - 1.5).abs() < 1e-12);
    let (p0, end) = (tr.points[0], *tr.points.last().unwrap());
    let chord = ((end[0] - p0[0]).powi(2) + (end[1] - p0[1]).powi(2)).sqrt();
    assert!((chord - 1.5).abs() < 1e-12);
    let report = verify_theorem1(&f, &tr).unwrap();
    assert!(report.holds);
    assert_eq!(report.lambda_max, 0.0);
    assert!(report.pairs.iter().all(|p| p.normal_change == 0.0 && p.bound == 0.0));
}

#[test]
fn trace_respects_bounds_and_reports_collapse() {
    let f = LinearField { weights: vec![0.0, 1.0], bias: 0.0 };
    let mut opts = TraceOptions::new(100.0, 0.1);
    opts.bounds = Some([-1.0, 1.0, -1.0, 1.0]);
    let tr = trace_level_set_2d_with(&f, [0.0, 0.0], &opts).unwrap();
    assert!(tr.points.iter().all(|p| p[0].abs() <= 1.0));
    assert!(tr.length() < 1.0 + 1e-12);

    assert!(matches!(trace_level_set_2d(&SphereField { dim: 3 }, [1.0, 0.0], 1.0, 0.1), Err(Error::Dimension { .. })));
}

#[test]
fn toy_contour_stays_on_level() {
    let net = toy_network(50, Activation::Softplus { beta: 1.0 }, 3).unwrap();
    let f = NetworkField::new(net, 0).unwrap();
    let tr = trace_level_set_2d(&f, [0.3, -0.2], 1.0, 1e-2).unwrap();
    assert!(tr.error.is_none(), "{:?}", tr.error);
    assert!(tr.max_residual() < 1e-8);
    // Corrected chords are slightly shorter than the predictor step.
    assert!(tr.points.len() >= 101);
    assert!((1.0..1.0 + 1e-2).contains(&tr.length()));
}

#[test]
fn circle_satisfies_theorem1_with_analytic_gaps() {
    let r = 2.0;
    let f = SphereField { dim: 2 };
    let tr = trace_level_set_2d(&f, [r, 0.0], 3.0, 1e-2).unwrap();
    let report = verify_theorem1(&f, &tr).unwrap();
    assert!(report.holds);
    assert!(report.worst_slack >= -1e-6);
    assert!((report.lambda_max - 1.0 / r).abs() < 1e-8);
    for pair in &report.pairs {
        // The arc length is the polyline length; it differs from r·Δθ by
        // the chord error, far below the tolerance used here.
        let theta = pair.geodesic / r;
        assert!((pair.normal_change - 2.0 * (theta / 2.0).sin()).abs() < 1e-5);
    }
}

#[test]
fn toy_contour_satisfies_theorem1_and_chained_bound() {
    let net = toy_network(50, Activation::Softplus { beta: 1.0 }, 3).unwrap();
    let f = NetworkField::new(net, 0).unwrap();
    let tr = trace_level_set_2d(&f, [0.3, -0.2], 0.8, 1e-2).unwrap();
    let report = verify_theorem1(&f, &tr).unwrap();
    assert!(report.holds, "worst slack {}", report.worst_slack);
    let chained = report.chained.unwrap();
    assert!(chained.holds);
    assert!(chained.bound >= report.lambda_max);
}

#[test]
fn p_beta_sampler_matches_logistic_cdf() {
    assert_eq!(p_beta_quantile(0.5, 3.0), 0.0);
    let mut xs = sample_p_beta(1.0, 11, 1_000_000).unwrap();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let ks = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let cdf = crate::activation::sigmoid(x, 1.0);
            (cdf - i as f64 / n).abs().max((cdf - (i + 1) as f64 / n).abs())
        })
        .fold(0.0, f64::max);
    assert!(ks < 0.002, "KS {ks}");
}

#[test]
fn p_beta_variance_matches_numeric_integral() {
    let beta = 2.0;
    // ∫ε²·p_β(ε)dε by the midpoint rule; the density decays like e^{−β|ε|}.
    let density = |e: f64| beta / ((beta * e / 2.0).exp() + (-beta * e / 2.0).exp()).powi(2);
    let (lo, hi, steps) = (-40.0, 40.0, 400_000);
    let h = (hi - lo) / steps as f64;
    let oracle: f64 = (0..steps)
        .map(|i| {
            let e = lo + (i as f64 + 0.5) * h;
            e * e * density(e) * h
        })
        .sum();
    assert!((oracle - std::f64::consts::PI.powi(2) / 12.0).abs() < 1e-8);
    let xs = sample_p_beta(beta, 5, 1_000_000).unwrap();
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / xs.len() as f64;
    assert!((var / oracle - 1.0).abs() < 0.01, "variance {var} vs {oracle}");
}

#[test]
fn theorem2_examples() {
    let report = verify_theorem2(&[1.0, 0.0, 0.0], 2.0, &[0.3, 0.9, 0.1], 1_000_000, 1).unwrap();
    assert!(report.relative_error < 1e-2, "{report:?}");
    assert_eq!(report.closed_form[1], 0.0);

    let beta = 4.0;
    let w = [0.0, 1.0];
    let far = verify_theorem2(&w, beta, &[0.0, 50.0 / beta], 10_000, 2).unwrap();
    assert!(rel_err(&far.monte_carlo, &w) < 1e-12);
    assert!(rel_err(&far.closed_form, &w) < 1e-12);

    assert!((gaussian_sigma_for_beta(1.0) - 1.7375).abs() < 1e-4);
    assert!(verify_theorem2(&[0.0, 0.0], 1.0, &[1.0, 1.0], 10, 0).is_err());
}

#[test]
fn theorem2_counts_are_thread_independent() {
    let w = [0.4, -0.3, 0.8];
    let x = [0.2, 0.5, 0.1];
    let a = verify_theorem2(&w, 1.5, &x, 100_000, 9).unwrap();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let b = pool.install(|| verify_theorem2(&w, 1.5, &x, 100_000, 9).unwrap());
    assert_eq!(a, b);
}

#[test]
fn along_weight_noise_is_exact_in_expectation() {
    let w = [0.4, -0.3, 0.8];
    let x = [0.2, 0.5, 0.1];
    let decay = theorem2_error_decay(&w, 1.5, &x, &[1_000, 10_000, 100_000], 20, 3, NoiseModel::AlongWeight).unwrap();
    assert!((decay.slope + 0.5).abs() < 0.15, "{decay:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn normals_are_unit_and_orthogonal_to_tangents(seed in 0u64..10_000) {
        let f = softplus_field(&[5, 7, 3], 1.5, seed % 17);
        let p = random_point(5, seed);
        let n = unit_normal(&f, &p).unwrap();
        prop_assert!((norm(&n) - 1.0).abs() < 1e-12);
        let g = f.gradient(&p).unwrap();
        let e = tangent_basis(&n);
        for j in 0..4 {
            let col: Vec<f64> = (0..5).map(|i| e.at(i, j)).collect();
            prop_assert!(dot(&g, &col).abs() < 1e-10);
            prop_assert!((norm(&col) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn fundamental_form_is_symmetric(seed in 0u64..10_000) {
        let f = softplus_field(&[4, 6, 2], 3.0, seed % 13);
        let ff = second_fundamental_form(&f, &random_point(4, seed)).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                prop_assert_eq!(ff.form.at(i, j), ff.form.at(j, i));
            }
        }
    }
}
