use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{explain, explain_with, record, ExplanationMap, MethodSpec, Prepared};
use crate::activation::Activation;
use crate::error::{Error, Result};
use crate::geometry::draw_p_beta;
use crate::net::Network;
use crate::tape::{Tape, Var};

/// Noise distribution for SmoothGrad.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Noise {
    /// `N(0, σ²)` per coordinate with `σ = noise_level · (x_max − x_min)`
    /// on the `[0, 1]` input range.
    #[default]
    Gaussian,
    /// Logistic-type density `β / (e^{βε/2} + e^{−βε/2})²` per coordinate;
    /// `noise_level` is ignored.
    PBeta { beta: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Smoothing {
    #[default]
    None,
    /// Explain on the softplus_β network instead of the relu network.
    Beta { beta: f64 },
    /// Mean of maps at `x − ε_i`, `i < samples`. Noisy inputs are not
    /// clamped to the input range.
    SmoothGrad {
        samples: usize,
        noise_level: f64,
        seed: u64,
        #[serde(default)]
        noise: Noise,
    },
}

impl Smoothing {
    pub fn smoothgrad(samples: usize, noise_level: f64, seed: u64) -> Self {
        Smoothing::SmoothGrad { samples, noise_level, seed, noise: Noise::Gaussian }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Smoothing::None => Ok(()),
            Smoothing::Beta { beta } => Activation::softplus(beta).map(|_| ()),
            Smoothing::SmoothGrad { samples, noise_level, noise, .. } => {
                if samples == 0 {
                    return Err(Error::Config("SmoothGrad needs at least one sample".into()));
                }
                if !(0.0..1.0).contains(&noise_level) {
                    return Err(Error::Config(format!("noise level {noise_level} outside [0, 1)")));
                }
                if let Noise::PBeta { beta } = noise {
                    Activation::softplus(beta)?;
                }
                Ok(())
            }
        }
    }
}

/// Noise vector of sample `index`, drawn from its own stream seeded with
/// `seed ^ index`.
pub(crate) fn noise_sample(dim: usize, noise_level: f64, noise: Noise, seed: u64, index: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ index as u64);
    match noise {
        Noise::Gaussian => {
            let sigma = noise_level * (1.0 - 0.0);
            if sigma == 0.0 {
                return vec![0.0; dim];
            }
            let normal = Normal::new(0.0, sigma).expect("finite sigma");
            (0..dim).map(|_| normal.sample(&mut rng)).collect()
        }
        Noise::PBeta { beta } => (0..dim).map(|_| draw_p_beta(&mut rng, beta)).collect(),
    }
}

pub fn smooth_explain(
    net: &Network,
    x: &[f64],
    class: usize,
    spec: &MethodSpec,
    smoothing: &Smoothing,
) -> Result<ExplanationMap> {
    smoothing.validate()?;
    match *smoothing {
        Smoothing::None => explain(net, x, class, spec),
        Smoothing::Beta { beta } => explain_with(net, Activation::Softplus { beta }, x, class, spec),
        Smoothing::SmoothGrad { samples, noise_level, seed, noise } => {
            net.check_input(x)?;
            net.check_class(class)?;
            let prep = Prepared::new(net, spec)?;
            let act = net.activation();
            let maps: Vec<Vec<f64>> = (0..samples)
                .into_par_iter()
                .map(|i| {
                    let eps = noise_sample(x.len(), noise_level, noise, seed, i);
                    let shifted: Vec<f64> = x.iter().zip(&eps).map(|(a, e)| a - e).collect();
                    let mut tape = Tape::new();
                    let xv = tape.constant(shifted);
                    let h = record(&mut tape, net, act, &prep, spec, xv, class);
                    tape.value(h).to_vec()
                })
                .collect();
            let mut mean = vec![0.0; x.len()];
            for m in &maps {
                mean.iter_mut().zip(m).for_each(|(a, v)| *a += v);
            }
            mean.iter_mut().for_each(|a| *a /= samples as f64);
            if mean.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("SmoothGrad map".into()));
            }
            ExplanationMap::raw(mean)
        }
    }
}

/// Records the smoothed map at tape value `x`. `act` is the nonlinearity
/// used when the smoothing itself does not fix one; `seed_offset` is mixed
/// into the SmoothGrad seed so repeated evaluations can draw fresh noise.
#[allow(clippy::too_many_arguments)]
pub(crate) fn record_smoothed<'a>(
    tape: &mut Tape<'a>,
    net: &'a Network,
    act: Activation,
    prep: &'a Prepared,
    spec: &MethodSpec,
    smoothing: &Smoothing,
    seed_offset: u64,
    x: Var,
    class: usize,
) -> Var {
    match *smoothing {
        Smoothing::None => record(tape, net, act, prep, spec, x, class),
        Smoothing::Beta { beta } => record(tape, net, Activation::Softplus { beta }, prep, spec, x, class),
        Smoothing::SmoothGrad { samples, noise_level, seed, noise } => {
            let dim = tape.value(x).len();
            let mut total: Option<Var> = None;
            for i in 0..samples {
                let eps: Vec<f64> = noise_sample(dim, noise_level, noise, seed.wrapping_add(seed_offset), i)
                    .into_iter()
                    .map(|e| -e)
                    .collect();
                let shifted = tape.add_const(x, &eps);
                let h = record(tape, net, act, prep, spec, shifted, class);
                total = Some(match total {
                    Some(acc) => tape.add(acc, h),
                    None => h,
                });
            }
            let sum = total.expect("at least one sample");
            tape.scale(sum, 1.0 / samples as f64)
        }
    }
}
