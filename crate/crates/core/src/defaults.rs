//! Versioned experiment defaults, embedded at build time so every report
//! can name the settings it ran with.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::explain::Method;
use crate::metrics::SsimConfig;

pub const DEFAULTS_JSON: &str = include_str!("../defaults/v1.json");

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub iterations: usize,
    pub lr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchitectureRow {
    pub iterations: usize,
    pub lr: f64,
    pub weight_h: f64,
    pub weight_g: f64,
    #[serde(default)]
    pub beta0: Option<f64>,
    #[serde(default)]
    pub beta_end: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tables {
    /// Unsmoothed attacks, per method.
    pub plain: BTreeMap<Method, Schedule>,
    pub architectures: BTreeMap<String, ArchitectureRow>,
    pub cifar_lrp: ArchitectureRow,
    /// Attacks on SmoothGrad explanations.
    pub smoothgrad: BTreeMap<Method, Schedule>,
    /// Attacks on β-smoothed explanations.
    pub beta_smoothing: BTreeMap<Method, Schedule>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthDefaults {
    pub beta0: f64,
    pub beta_end: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Factors {
    pub weight_h: f64,
    pub weight_g: f64,
    pub weight_x: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefenseDefaults {
    pub beta_smoothing_beta: f64,
    pub smoothgrad_samples: usize,
    pub smoothgrad_noise_level: f64,
    pub recovery_betas: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingDefaults {
    pub layer_sizes: Vec<usize>,
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Defaults {
    pub version: u32,
    pub beta_growth: GrowthDefaults,
    pub lrp_fixed_beta: f64,
    /// Multiplier applied to every tabulated learning rate.
    pub desk_lr_scale: f64,
    pub optimizer: crate::attack::Optimizer,
    pub factors: Factors,
    pub ig_steps: usize,
    pub tables: Tables,
    pub defense: DefenseDefaults,
    pub ssim: SsimConfig,
    pub percentiles: Vec<f64>,
    pub training: TrainingDefaults,
}

pub fn defaults() -> &'static Defaults {
    static CELL: OnceLock<Defaults> = OnceLock::new();
    CELL.get_or_init(|| serde_json::from_str(DEFAULTS_JSON).expect("embedded defaults parse"))
}
