//! Seeded experiment runners: attack campaigns, defense comparisons and the
//! toy geometry study, plus the dataset and network plumbing they share.
//!
//! Runs inside a campaign are independent and execute in parallel; records
//! and summaries are always assembled in run-index order, so a rerun with
//! the same configuration writes byte-identical JSON.

mod campaign;
mod defense;
mod geometry_study;
pub mod idx;

use std::path::{Path, PathBuf};

use log::info;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::activation::Activation;
use crate::attack::AttackConfig;
use crate::defaults::defaults;
use crate::error::{Error, Result};
use crate::explain::{learn_patterns, Method, MethodSpec, Smoothing};
use crate::net::{load_weights, train, Dataset, Network, TrainConfig};
use crate::tensor::Tensor;

pub use campaign::{run_attack_campaign, CampaignConfig, CampaignSummary, RunRecord};
pub use defense::{run_defense_eval, ArmOutcome, DefenseConfig, DefenseRun, DefenseSummary, RecoveryPoint};
pub use geometry_study::{run_geometry_study, GeometryStudyConfig, GeometrySummary};

/// IDX files of a train/test split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DataConfig {
    pub dir: PathBuf,
    pub train_images: String,
    pub train_labels: String,
    pub test_images: String,
    pub test_labels: String,
    pub num_classes: usize,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("data/mnist"),
            train_images: "train-images-idx3-ubyte.gz".into(),
            train_labels: "train-labels-idx1-ubyte.gz".into(),
            test_images: "t10k-images-idx3-ubyte.gz".into(),
            test_labels: "t10k-labels-idx1-ubyte.gz".into(),
            num_classes: 10,
        }
    }
}

impl DataConfig {
    pub fn at(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into(), ..Self::default() }
    }

    fn files(&self) -> [PathBuf; 4] {
        [
            self.dir.join(&self.train_images),
            self.dir.join(&self.train_labels),
            self.dir.join(&self.test_images),
            self.dir.join(&self.test_labels),
        ]
    }

    pub fn check_files(&self) -> Result<()> {
        for f in self.files() {
            if !f.is_file() {
                return Err(Error::Config(format!("missing data file {}", f.display())));
            }
        }
        Ok(())
    }

    pub fn load_train(&self) -> Result<Dataset> {
        let [ti, tl, _, _] = self.files();
        idx::load_idx(&ti, &tl, self.num_classes)
    }

    pub fn load_test(&self) -> Result<Dataset> {
        let [_, _, ti, tl] = self.files();
        idx::load_idx(&ti, &tl, self.num_classes)
    }
}

/// One JSON document describing an experiment. Missing fields take the
/// embedded defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub data: DataConfig,
    pub layer_sizes: Vec<usize>,
    /// Weights manifest; the network is trained when absent.
    pub weights: Option<PathBuf>,
    pub training: TrainConfig,
    pub method: Method,
    pub ig_steps: usize,
    /// Training images used to fit PatternAttribution patterns.
    pub pattern_samples: usize,
    /// Attack settings; per-method table defaults when absent.
    pub attack: Option<AttackConfig>,
    pub smoothing: Smoothing,
    pub runs: usize,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub percentiles: Vec<f64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let d = defaults();
        Self {
            data: DataConfig::default(),
            layer_sizes: d.training.layer_sizes.clone(),
            weights: None,
            training: TrainConfig {
                epochs: d.training.epochs,
                lr: d.training.lr,
                batch_size: d.training.batch_size,
                seed: 0,
            },
            method: Method::Gradient,
            ig_steps: d.ig_steps,
            pattern_samples: 2000,
            attack: None,
            smoothing: Smoothing::None,
            runs: 20,
            seed: 0,
            output_dir: PathBuf::from("out"),
            percentiles: d.percentiles.clone(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Checks the configuration and that every referenced file exists.
    pub fn validate(&self) -> Result<()> {
        self.data.check_files()?;
        if let Some(w) = &self.weights {
            if !w.is_file() {
                return Err(Error::Config(format!("missing weights manifest {}", w.display())));
            }
        }
        if self.layer_sizes.len() < 2 {
            return Err(Error::Config("layer_sizes needs input and output sizes".into()));
        }
        if self.layer_sizes.last() != Some(&self.data.num_classes) {
            return Err(Error::Config(format!(
                "last layer size {:?} differs from num_classes {}",
                self.layer_sizes.last(),
                self.data.num_classes
            )));
        }
        if self.ig_steps == 0 {
            return Err(Error::Config("ig_steps must be at least 1".into()));
        }
        if let Some(a) = &self.attack {
            a.validate()?;
        }
        self.smoothing.validate()?;
        check_percentiles(&self.percentiles)
    }

    /// Attack settings with the configured smoothing and seed applied.
    pub fn attack_config(&self) -> AttackConfig {
        let mut cfg = self.attack.clone().unwrap_or_else(|| AttackConfig::for_method(self.method));
        if self.attack.is_none() {
            cfg.smoothing = self.smoothing;
        }
        cfg.seed = self.seed;
        cfg
    }
}

pub(crate) fn check_percentiles(ps: &[f64]) -> Result<()> {
    match ps.iter().find(|p| !(0.0..=100.0).contains(*p)) {
        Some(p) => Err(Error::Config(format!("percentile {p} outside [0, 100]"))),
        None => Ok(()),
    }
}

/// Loads the configured weights, or trains a relu network on the training
/// split when none are given.
pub fn prepare_network(cfg: &ExperimentConfig, train_data: &Dataset, test_data: &Dataset) -> Result<Network> {
    if let Some(path) = &cfg.weights {
        let net = load_weights(path)?;
        if net.layer_sizes() != cfg.layer_sizes {
            return Err(Error::Config(format!(
                "weights have layer sizes {:?}, config says {:?}",
                net.layer_sizes(),
                cfg.layer_sizes
            )));
        }
        return Ok(net.with_activation(Activation::Relu));
    }
    let init = Network::random(&cfg.layer_sizes, Activation::Relu, cfg.training.seed)?;
    let report = train(&init, train_data, Some(test_data), &cfg.training)?;
    info!(
        "trained {:?}: train accuracy {:.4}, test accuracy {:.4}",
        cfg.layer_sizes,
        report.train_accuracy,
        report.test_accuracy.unwrap_or(f64::NAN)
    );
    Ok(report.network)
}

/// Data splits and the relu network of a validated configuration.
pub struct Prepared {
    pub config: ExperimentConfig,
    pub train: Dataset,
    pub test: Dataset,
    pub network: Network,
}

impl Prepared {
    /// Validates `config`, loads both splits and loads or trains the network.
    pub fn open(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let train = config.data.load_train()?;
        let test = config.data.load_test()?;
        let network = prepare_network(&config, &train, &test)?;
        Ok(Self { config, train, test, network })
    }

    pub fn spec(&self, method: Method) -> Result<MethodSpec> {
        method_spec(method, &self.network, Some(&self.train), self.config.ig_steps, self.config.pattern_samples)
    }
}

/// The method spec for `method`: a zero IG baseline with `ig_steps`, or
/// patterns fitted on the first `pattern_samples` training images.
pub fn method_spec(
    method: Method,
    net: &Network,
    train_data: Option<&Dataset>,
    ig_steps: usize,
    pattern_samples: usize,
) -> Result<MethodSpec> {
    Ok(match method {
        Method::IntegratedGradients => MethodSpec::integrated_gradients(Tensor::zeros(vec![net.input_dim()]), ig_steps),
        Method::PatternAttribution => {
            let data = train_data.ok_or_else(|| Error::Config("pattern attribution needs training data".into()))?;
            let patterns = learn_patterns(net, &data.head(pattern_samples))?;
            MethodSpec::pattern_attribution(patterns.layers)
        }
        other => MethodSpec::new(other),
    })
}

/// `runs` disjoint `(source, target)` index pairs drawn without replacement
/// from `0..n`.
pub fn sample_pairs(n: usize, runs: usize, seed: u64) -> Result<Vec<(usize, usize)>> {
    if 2 * runs > n {
        return Err(Error::Config(format!("{runs} disjoint pairs need {} images, have {n}", 2 * runs)));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Ok(idx[..2 * runs].chunks_exact(2).map(|c| (c[0], c[1])).collect())
}

/// Linearly interpolated percentile of `values` (`p` in `[0, 100]`).
pub fn percentile(values: &[f64], p: f64) -> Option<f64> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let rank = p / 100.0 * (v.len() - 1) as f64;
    let (lo, hi) = (rank.floor() as usize, rank.ceil() as usize);
    Some(v[lo] + (v[hi] - v[lo]) * (rank - lo as f64))
}

pub fn median(values: &[f64]) -> Option<f64> {
    percentile(values, 50.0)
}

/// Percentiles of one metric over the completed runs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricSummary {
    pub name: String,
    pub count: usize,
    /// `(percentile, value)` pairs.
    pub percentiles: Vec<(f64, Option<f64>)>,
    pub median: Option<f64>,
}

impl MetricSummary {
    pub fn new(name: &str, values: &[f64], ps: &[f64]) -> Self {
        Self {
            name: name.into(),
            count: values.len(),
            percentiles: ps.iter().map(|&p| (p, percentile(values, p))).collect(),
            median: median(values),
        }
    }
}

pub(crate) fn metrics_csv(metrics: &[MetricSummary], ps: &[f64]) -> String {
    let mut out = String::from("metric,count");
    for p in ps {
        out.push_str(&format!(",p{p}"));
    }
    out.push('\n');
    for m in metrics {
        out.push_str(&format!("{},{}", m.name, m.count));
        for (_, v) in &m.percentiles {
            match v {
                Some(v) => out.push_str(&format!(",{v:e}")),
                None => out.push(','),
            }
        }
        out.push('\n');
    }
    out
}
