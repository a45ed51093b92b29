//! Reads the MNIST IDX files, prints their headers and a digit, and writes
//! a small IDX round trip.
//!
//!     cargo run --release --example idx_io

mod common;

use xmanip::experiment::idx::{
    encode_idx_images, encode_idx_labels, parse_idx_images, parse_idx_labels, read_idx_images,
};

fn main() {
    let images = read_idx_images(&common::data_dir().join("t10k-images-idx3-ubyte.gz")).unwrap();
    println!("{} test images of {}×{}", images.count, images.rows, images.cols);
    let (_, test) = common::mnist();
    println!("first label {}; pixels scaled to [0, 1]:", test.label(0));
    for row in test.input(0).chunks(28).step_by(2) {
        println!(
            "  {}",
            row.iter()
                .map(|&v| if v > 0.5 {
                    '#'
                } else if v > 0.1 {
                    '+'
                } else {
                    '.'
                })
                .collect::<String>()
        );
    }

    let pixels: Vec<f64> = (0..2 * 3 * 4).map(|i| i as f64 / 23.0).collect();
    let bytes = encode_idx_images(&pixels, 2, 3, 4);
    let back = parse_idx_images(&bytes).unwrap();
    println!("round trip: {} images of {}×{}, first row {:?}", back.count, back.rows, back.cols, &back.pixels[..4]);
    println!("labels {:?}", parse_idx_labels(&encode_idx_labels(&[3, 1, 4])).unwrap());
}
