mod common;

use common::*;
use xmanip::metrics::{mse, pcc, report, ssim, Kind};

#[test]
fn identical_inputs_give_the_perfect_triple() {
    let img = uniform(784, 0.0, 1.0, 1);
    let r = report(&img, &img, Kind::Image).unwrap();
    assert_eq!((r.ssim, r.pcc, r.mse), (1.0, 1.0, 0.0));
    let map = uniform(784, 0.0, 1.0, 2);
    let r = report(&map, &map, Kind::Map).unwrap();
    assert_eq!((r.ssim, r.pcc, r.mse), (1.0, 1.0, 0.0));
}

#[test]
fn mse_examples() {
    assert_eq!(mse(&[0.0, 0.0], &[1.0, 1.0]).unwrap(), 1.0);
    let a = uniform(50, -1.0, 1.0, 3);
    let b = uniform(50, -1.0, 1.0, 4);
    let mut sum = 0.0;
    for i in 0..50 {
        sum += (a[i] - b[i]) * (a[i] - b[i]);
    }
    assert!((mse(&a, &b).unwrap() - sum / 50.0).abs() < 1e-12);
    assert!(mse(&a, &b[..49]).is_err());
}

#[test]
fn pcc_affine_and_inverted() {
    let a = uniform(100, -1.0, 1.0, 5);
    let affine: Vec<f64> = a.iter().map(|v| 2.0 * v + 3.0).collect();
    let inverted: Vec<f64> = a.iter().map(|v| -v).collect();
    assert!((pcc(&a, &affine).unwrap() - 1.0).abs() < 1e-12);
    assert!((pcc(&a, &inverted).unwrap() + 1.0).abs() < 1e-12);
    assert!(pcc(&[0.5; 10], &a[..10]).is_err());
}

#[test]
fn ssim_of_opposite_constants() {
    let l = 1.0;
    let c1 = (0.01 * l) * (0.01 * l);
    let zeros = vec![0.0; 100];
    let ones = vec![l; 100];
    let want = c1 / (l * l + c1);
    let got = ssim(&zeros, &ones, 10, 7, l).unwrap();
    assert!((got - want).abs() < 1e-12, "{got} vs {want}");
    assert!(ssim(&zeros, &ones, 10, 11, l).is_err());
}

#[test]
fn metrics_are_symmetric() {
    let a = uniform(784, 0.0, 1.0, 6);
    let b = uniform(784, 0.0, 1.0, 7);
    let ab = report(&a, &b, Kind::Image).unwrap();
    let ba = report(&b, &a, Kind::Image).unwrap();
    assert!((ab.ssim - ba.ssim).abs() < 1e-12);
    assert!((ab.pcc - ba.pcc).abs() < 1e-12);
    assert!((ab.mse - ba.mse).abs() < 1e-12);
}
