//! Weights on disk: a JSON manifest plus a sibling little-endian `f64` blob
//! holding every layer's row-major weights followed by its bias, in layer
//! order.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{DenseLayer, Network};
use crate::activation::Activation;
use crate::artifact::write_atomic;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightsManifest {
    pub layer_sizes: Vec<usize>,
    /// `"relu"` or `"softplus"`.
    pub activation: String,
    pub beta: Option<f64>,
    pub endianness: String,
    pub dtype: String,
    /// File name of the blob, relative to the manifest.
    pub blob: String,
}

impl WeightsManifest {
    fn expected_values(&self) -> usize {
        self.layer_sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    fn activation(&self) -> Result<Activation> {
        match (self.activation.as_str(), self.beta) {
            ("relu", _) => Ok(Activation::Relu),
            ("softplus", Some(beta)) => Activation::softplus(beta),
            ("softplus", None) => Err(Error::Config("softplus manifest without beta".into())),
            (other, _) => Err(Error::Config(format!("unknown activation {other:?}"))),
        }
    }
}

fn blob_path(manifest_path: &Path, blob: &str) -> PathBuf {
    manifest_path.parent().map_or_else(|| PathBuf::from(blob), |d| d.join(blob))
}

/// Writes `<path>` (manifest) and `<path stem>.bin` next to it.
pub fn save_weights(net: &Network, path: &Path) -> Result<WeightsManifest> {
    let blob = format!("{}.bin", path.file_stem().map_or("weights".into(), |s| s.to_string_lossy()));
    let (activation, beta) = match net.activation() {
        Activation::Relu => ("relu", None),
        Activation::Softplus { beta } => ("softplus", Some(beta)),
    };
    let manifest = WeightsManifest {
        layer_sizes: net.layer_sizes(),
        activation: activation.into(),
        beta,
        endianness: "little".into(),
        dtype: "f64".into(),
        blob,
    };
    let mut bytes = Vec::with_capacity(manifest.expected_values() * 8);
    for layer in net.layers() {
        for v in layer.weights.data().iter().chain(layer.bias.data()) {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    write_atomic(&blob_path(path, &manifest.blob), &bytes)?;
    crate::artifact::write_json(path, &manifest)?;
    Ok(manifest)
}

pub fn load_weights(path: &Path) -> Result<Network> {
    let manifest: WeightsManifest = serde_json::from_slice(&fs::read(path)?)?;
    if manifest.endianness != "little" || manifest.dtype != "f64" {
        return Err(Error::Config(format!("unsupported blob encoding {}/{}", manifest.endianness, manifest.dtype)));
    }
    if manifest.layer_sizes.len() < 2 {
        return Err(Error::Config("manifest needs at least two layer sizes".into()));
    }
    let activation = manifest.activation()?;
    let bytes = fs::read(blob_path(path, &manifest.blob))?;
    let expected = manifest.expected_values() * 8;
    if bytes.len() != expected {
        return Err(Error::Truncated { expected, actual: bytes.len() });
    }
    let mut values = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")));
    let mut take = |n: usize| -> Vec<f64> { values.by_ref().take(n).collect() };
    let layers = manifest
        .layer_sizes
        .windows(2)
        .map(|w| {
            let weights = Tensor::matrix(w[1], w[0], take(w[0] * w[1]))?;
            let bias = Tensor::vector(take(w[1]))?;
            DenseLayer::new(weights, bias)
        })
        .collect::<Result<Vec<_>>>()?;
    Network::new(layers, activation)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.json");
        let net = Network::random(&[5, 4, 3], Activation::Softplus { beta: 7.5 }, 4).unwrap();
        let m = save_weights(&net, &path).unwrap();
        assert_eq!(m.blob, "net.bin");
        assert_eq!(load_weights(&path).unwrap(), net);
    }

    #[test]
    fn short_blob_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.json");
        let net = Network::random(&[3, 2], Activation::Relu, 4).unwrap();
        save_weights(&net, &path).unwrap();
        let blob = dir.path().join("net.bin");
        let mut bytes = fs::read(&blob).unwrap();
        bytes.pop();
        fs::write(&blob, bytes).unwrap();
        assert!(matches!(load_weights(&path), Err(Error::Truncated { expected: 64, actual: 63 })));
    }
}
