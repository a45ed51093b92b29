//! IDX files (the MNIST distribution format), optionally gzip-compressed.

use std::fs;
use std::io::Read;
use std::path::Path;

use flate2::read::GzDecoder;

use crate::error::{Error, Result};
use crate::net::Dataset;

const IMAGE_MAGIC: u32 = 0x0000_0803;
const LABEL_MAGIC: u32 = 0x0000_0801;

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    let raw = fs::read(path)?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice()).read_to_end(&mut out)?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

fn be_u32(bytes: &[u8], offset: usize) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes(b.try_into().expect("4 bytes")))
        .ok_or(Error::Truncated { expected: offset + 4, actual: bytes.len() })
}

/// Images as rows of `rows·cols` values scaled from bytes to `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<f64>,
}

pub fn parse_idx_images(bytes: &[u8]) -> Result<IdxImages> {
    let magic = be_u32(bytes, 0)?;
    if magic != IMAGE_MAGIC {
        return Err(Error::Parse {
            offset: 0,
            msg: format!("expected image magic 0x{IMAGE_MAGIC:08x}, found 0x{magic:08x}"),
        });
    }
    let count = be_u32(bytes, 4)? as usize;
    let rows = be_u32(bytes, 8)? as usize;
    let cols = be_u32(bytes, 12)? as usize;
    let expected = 16 + count * rows * cols;
    if bytes.len() != expected {
        return Err(Error::Truncated { expected, actual: bytes.len() });
    }
    Ok(IdxImages { count, rows, cols, pixels: bytes[16..].iter().map(|&b| b as f64 / 255.0).collect() })
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    let magic = be_u32(bytes, 0)?;
    if magic != LABEL_MAGIC {
        return Err(Error::Parse {
            offset: 0,
            msg: format!("expected label magic 0x{LABEL_MAGIC:08x}, found 0x{magic:08x}"),
        });
    }
    let count = be_u32(bytes, 4)? as usize;
    let expected = 8 + count;
    if bytes.len() != expected {
        return Err(Error::Truncated { expected, actual: bytes.len() });
    }
    Ok(bytes[8..].to_vec())
}

pub fn read_idx_images(path: &Path) -> Result<IdxImages> {
    parse_idx_images(&read_bytes(path)?)
}

pub fn read_idx_labels(path: &Path) -> Result<Vec<u8>> {
    parse_idx_labels(&read_bytes(path)?)
}

/// Loads an image file and its label file into a [`Dataset`].
pub fn load_idx(images: &Path, labels: &Path, num_classes: usize) -> Result<Dataset> {
    let img = read_idx_images(images)?;
    let lab = read_idx_labels(labels)?;
    if img.count != lab.len() {
        return Err(Error::Shape(format!("{} images but {} labels", img.count, lab.len())));
    }
    Dataset::new(img.pixels, img.rows * img.cols, lab.into_iter().map(usize::from).collect(), num_classes)
}

/// Serialises images (values in `[0, 1]`, rounded to bytes) in IDX form.
pub fn encode_idx_images(pixels: &[f64], count: usize, rows: usize, cols: usize) -> Vec<u8> {
    assert_eq!(pixels.len(), count * rows * cols, "idx: size mismatch");
    let mut out = Vec::with_capacity(16 + pixels.len());
    for v in [IMAGE_MAGIC, count as u32, rows as u32, cols as u32] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out.extend(pixels.iter().map(|&p| (p.clamp(0.0, 1.0) * 255.0).round() as u8));
    out
}

pub fn encode_idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Fixture written byte by byte, independent of the encoder.
    fn fixture(count: u32) -> (Vec<u8>, Vec<u8>) {
        let mut img = vec![0, 0, 8, 3];
        img.extend_from_slice(&count.to_be_bytes());
        img.extend_from_slice(&[0, 0, 0, 28, 0, 0, 0, 28]);
        for i in 0..count as usize * 784 {
            img.push((i % 256) as u8);
        }
        let mut lab = vec![0, 0, 8, 1];
        lab.extend_from_slice(&count.to_be_bytes());
        lab.extend((0..count as u8).map(|i| i % 10));
        (img, lab)
    }

    #[test]
    fn four_image_fixture() {
        let (img, lab) = fixture(4);
        let images = parse_idx_images(&img).unwrap();
        assert_eq!((images.count, images.rows, images.cols), (4, 28, 28));
        assert_eq!(images.pixels.len(), 4 * 784);
        assert_eq!(images.pixels[255], 1.0);
        assert_eq!(parse_idx_labels(&lab).unwrap(), vec![0, 1, 2, 3]);
    }

    #[test]
    fn wrong_magic_names_offset_zero() {
        let (mut img, _) = fixture(1);
        img[3] = 1;
        assert!(matches!(parse_idx_images(&img), Err(Error::Parse { offset: 0, .. })));
    }

    #[test]
    fn truncated_payload_reports_sizes() {
        let (img, _) = fixture(2);
        let short = &img[..img.len() - 10];
        assert!(matches!(
            parse_idx_images(short),
            Err(Error::Truncated { expected, actual }) if expected == 16 + 2 * 784 && actual == expected - 10
        ));
    }

    #[test]
    fn gz_files_and_count_mismatch() {
        use flate2::write::GzEncoder;
        use std::io::Write;
        let dir = tempfile::tempdir().unwrap();
        let (img, _) = fixture(3);
        let mut enc = GzEncoder::new(Vec::new(), flate2::Compression::default());
        enc.write_all(&img).unwrap();
        let ip = dir.path().join("img.gz");
        fs::write(&ip, enc.finish().unwrap()).unwrap();
        let lp = dir.path().join("lab");
        fs::write(&lp, encode_idx_labels(&[1, 2, 3])).unwrap();
        let data = load_idx(&ip, &lp, 10).unwrap();
        assert_eq!((data.len(), data.dim()), (3, 784));
        fs::write(&lp, encode_idx_labels(&[1, 2])).unwrap();
        assert!(matches!(load_idx(&ip, &lp, 10), Err(Error::Shape(_))));
        fs::write(&lp, encode_idx_labels(&[1, 2, 12])).unwrap();
        assert!(matches!(load_idx(&ip, &lp, 10), Err(Error::Label { label: 12, .. })));
    }

    #[test]
    fn encoder_roundtrip() {
        let pixels: Vec<f64> = (0..8).map(|i| i as f64 / 255.0).collect();
        let back = parse_idx_images(&encode_idx_images(&pixels, 2, 2, 2)).unwrap();
        assert_eq!(back.pixels, pixels);
    }
}
