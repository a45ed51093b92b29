//! The logistic-type noise density `p_β(ε) = β/(e^{βε/2} + e^{−βε/2})²`,
//! whose CDF is `σ_β`, and the Monte-Carlo check that relu gradients
//! averaged under it equal softplus gradients.

use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::activation::{sigmoid, Activation};
use crate::error::{Error, Result};
use crate::tensor::{dot, norm};

/// Inverse CDF of `p_β`.
pub fn p_beta_quantile(u: f64, beta: f64) -> f64 {
    (u / (1.0 - u)).ln() / beta
}

pub fn draw_p_beta<R: Rng + ?Sized>(rng: &mut R, beta: f64) -> f64 {
    let u: f64 = rng.sample(Open01);
    p_beta_quantile(u, beta)
}

pub fn sample_p_beta(beta: f64, seed: u64, count: usize) -> Result<Vec<f64>> {
    Activation::softplus(beta)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..count).map(|_| draw_p_beta(&mut rng, beta)).collect())
}

/// Standard deviation of the Gaussian that `p_β` resembles: matching the
/// densities at zero gives `σ = ln2·√(2π)/β`.
pub fn gaussian_sigma_for_beta(beta: f64) -> f64 {
    std::f64::consts::LN_2 * (2.0 * std::f64::consts::PI).sqrt() / beta
}

/// How the noise vector `ε` is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseModel {
    /// Every coordinate independently from `p_β`.
    #[default]
    Iid,
    /// `ε = e·w/‖w‖` with one scalar `e ~ p_β`.
    AlongWeight,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Theorem2Report {
    pub beta: f64,
    /// `β/‖w‖`.
    pub effective_beta: f64,
    pub samples: usize,
    pub seed: u64,
    pub noise: NoiseModel,
    pub weight_dot_input: f64,
    /// `E[∇relu(wᵀ(x − ε))]` estimated from the samples.
    pub monte_carlo: Vec<f64>,
    /// `∇softplus_{β/‖w‖}(wᵀx)`.
    pub closed_form: Vec<f64>,
    /// Relative ℓ₂ error between the two.
    pub relative_error: f64,
    /// `ln2·√(2π)/β`.
    pub gaussian_sigma: f64,
}

const CHUNK: usize = 1 << 14;

/// Number of samples with `wᵀ(x − ε) > 0`. Chunk `c` draws from ChaCha
/// stream `c`, so the count does not depend on thread scheduling.
fn count_active(w: &[f64], wx: f64, beta: f64, samples: usize, seed: u64, noise: NoiseModel) -> usize {
    let w_norm = norm(w);
    let chunks = samples.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let n = CHUNK.min(samples - c * CHUNK);
            let mut active = 0;
            for _ in 0..n {
                let shift = match noise {
                    NoiseModel::Iid => w.iter().map(|wi| wi * draw_p_beta(&mut rng, beta)).sum::<f64>(),
                    NoiseModel::AlongWeight => w_norm * draw_p_beta(&mut rng, beta),
                };
                if wx - shift > 0.0 {
                    active += 1;
                }
            }
            active
        })
        .collect::<Vec<_>>()
        .into_iter()
        .sum()
}

pub fn verify_theorem2(w: &[f64], beta: f64, x: &[f64], samples: usize, seed: u64) -> Result<Theorem2Report> {
    verify_theorem2_with(w, beta, x, samples, seed, NoiseModel::Iid)
}

/// One-layer check of `E_{ε∼p_β}[∇relu(wᵀ(x−ε))] = ∇softplus_{β/‖w‖}(wᵀx)`.
pub fn verify_theorem2_with(
    w: &[f64],
    beta: f64,
    x: &[f64],
    samples: usize,
    seed: u64,
    noise: NoiseModel,
) -> Result<Theorem2Report> {
    Activation::softplus(beta)?;
    if w.len() != x.len() {
        return Err(Error::Shape(format!("w has {} entries, x has {}", w.len(), x.len())));
    }
    let w_norm = norm(w);
    if !(w_norm > 0.0) {
        return Err(Error::Config("weight vector must be non-zero".into()));
    }
    if samples == 0 {
        return Err(Error::Config("need at least one sample".into()));
    }
    let wx = dot(w, x);
    let effective_beta = beta / w_norm;
    let fraction = count_active(w, wx, beta, samples, seed, noise) as f64 / samples as f64;
    let slope = sigmoid(wx, effective_beta);
    let monte_carlo: Vec<f64> = w.iter().map(|wi| wi * fraction).collect();
    let closed_form: Vec<f64> = w.iter().map(|wi| wi * slope).collect();
    let diff: Vec<f64> = monte_carlo.iter().zip(&closed_form).map(|(a, b)| a - b).collect();
    Ok(Theorem2Report {
        beta,
        effective_beta,
        samples,
        seed,
        noise,
        weight_dot_input: wx,
        relative_error: norm(&diff) / norm(&closed_form),
        monte_carlo,
        closed_form,
        gaussian_sigma: gaussian_sigma_for_beta(beta),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayReport {
    pub sample_counts: Vec<usize>,
    /// Root-mean-square relative error over the repeats at each count.
    pub rms_errors: Vec<f64>,
    /// Least-squares slope of `log(rms error)` against `log(N)`.
    pub slope: f64,
}

/// Error of [`verify_theorem2_with`] as the sample count grows. Repeat `r`
/// at every count uses seed `seed + r`.
#[allow(clippy::too_many_arguments)]
pub fn theorem2_error_decay(
    w: &[f64],
    beta: f64,
    x: &[f64],
    sample_counts: &[usize],
    repeats: usize,
    seed: u64,
    noise: NoiseModel,
) -> Result<DecayReport> {
    if sample_counts.len() < 2 || repeats == 0 {
        return Err(Error::Config("need two sample counts and at least one repeat".into()));
    }
    let mut rms_errors = Vec::with_capacity(sample_counts.len());
    for &n in sample_counts {
        let mut sq = 0.0;
        for r in 0..repeats {
            let rep = verify_theorem2_with(w, beta, x, n, seed.wrapping_add(r as u64), noise)?;
            sq += rep.relative_error.powi(2);
        }
        rms_errors.push((sq / repeats as f64).sqrt());
    }
    let lx: Vec<f64> = sample_counts.iter().map(|&n| (n as f64).ln()).collect();
    let ly: Vec<f64> = rms_errors.iter().map(|e| e.max(1e-300).ln()).collect();
    let k = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / k, ly.iter().sum::<f64>() / k);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    Ok(DecayReport { sample_counts: sample_counts.to_vec(), rms_errors, slope: sxy / sxx })
}
