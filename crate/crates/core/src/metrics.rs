//! Similarity of maps and images: SSIM, Pearson correlation and MSE.

use serde::{Deserialize, Serialize};

use crate::artifact::square_side;
use crate::error::{Error, Result};

fn same_len(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!("{} vs {} values", a.len(), b.len())));
    }
    if a.is_empty() {
        return Err(Error::Shape("empty input".into()));
    }
    Ok(())
}

pub fn mse(a: &[f64], b: &[f64]) -> Result<f64> {
    same_len(a, b)?;
    Ok(a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64)
}

pub fn pcc(a: &[f64], b: &[f64]) -> Result<f64> {
    same_len(a, b)?;
    // Rounding in the mean would give a constant vector a tiny variance.
    let constant = |v: &[f64]| v.iter().all(|x| *x == v[0]);
    if constant(a) || constant(b) {
        return Err(Error::ZeroVariance);
    }
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::ZeroVariance);
    }
    Ok((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SsimConfig {
    /// Side of the square uniform window; odd.
    pub window: usize,
    /// `C₁ = (k1·L)²`.
    pub k1: f64,
    /// `C₂ = (k2·L)²`.
    pub k2: f64,
}

impl Default for SsimConfig {
    fn default() -> Self {
        Self { window: 7, k1: 0.01, k2: 0.03 }
    }
}

/// Mean SSIM over every fully contained `window × window` patch of two
/// row-major grids `width` values wide, with uniform weights and
/// population statistics.
pub fn ssim(a: &[f64], b: &[f64], width: usize, window: usize, data_range: f64) -> Result<f64> {
    ssim_with(a, b, width, &SsimConfig { window, ..SsimConfig::default() }, data_range)
}

pub fn ssim_with(a: &[f64], b: &[f64], width: usize, cfg: &SsimConfig, data_range: f64) -> Result<f64> {
    same_len(a, b)?;
    if width == 0 || !a.len().is_multiple_of(width) {
        return Err(Error::Shape(format!("{} values do not form rows of {width}", a.len())));
    }
    let height = a.len() / width;
    let w = cfg.window;
    if w == 0 || w.is_multiple_of(2) {
        return Err(Error::Config(format!("SSIM window must be odd, got {w}")));
    }
    if w > width.min(height) {
        return Err(Error::Shape(format!("window {w} larger than the {width}×{height} grid")));
    }
    if !(data_range > 0.0) {
        return Err(Error::Config(format!("data range must be positive, got {data_range}")));
    }
    let c1 = (cfg.k1 * data_range).powi(2);
    let c2 = (cfg.k2 * data_range).powi(2);
    let np = (w * w) as f64;

    // Summed-area tables of a, b, a², b², ab.
    let stride = width + 1;
    let mut tables = vec![[0.0f64; 5]; stride * (height + 1)];
    for r in 0..height {
        for c in 0..width {
            let (x, y) = (a[r * width + c], b[r * width + c]);
            let here = [x, y, x * x, y * y, x * y];
            let up = tables[r * stride + c + 1];
            let left = tables[(r + 1) * stride + c];
            let diag = tables[r * stride + c];
            let mut cell = [0.0; 5];
            for k in 0..5 {
                cell[k] = here[k] + up[k] + left[k] - diag[k];
            }
            tables[(r + 1) * stride + c + 1] = cell;
        }
    }
    let window_sum = |r: usize, c: usize, k: usize| {
        tables[(r + w) * stride + c + w][k] - tables[r * stride + c + w][k] - tables[(r + w) * stride + c][k]
            + tables[r * stride + c][k]
    };

    let mut total = 0.0;
    let mut count = 0usize;
    for r in 0..=height - w {
        for c in 0..=width - w {
            let mu_a = window_sum(r, c, 0) / np;
            let mu_b = window_sum(r, c, 1) / np;
            let var_a = window_sum(r, c, 2) / np - mu_a * mu_a;
            let var_b = window_sum(r, c, 3) / np - mu_b * mu_b;
            let cov = window_sum(r, c, 4) / np - mu_a * mu_b;
            total += ((2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2))
                / ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2));
            count += 1;
        }
    }
    Ok(total / count as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    /// Non-negative explanation maps, compared after scaling to unit sum.
    Map,
    /// Images with entries in `[0, 1]`.
    Image,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarityReport {
    pub ssim: f64,
    pub pcc: f64,
    pub mse: f64,
    pub kind: Kind,
    pub data_range: f64,
    pub grid_width: usize,
    pub ssim_config: SsimConfig,
    pub pcc_negative: bool,
    pub ssim_negative: bool,
}

/// All three metrics on a square grid with the default SSIM settings.
pub fn report(a: &[f64], b: &[f64], kind: Kind) -> Result<SimilarityReport> {
    let width =
        square_side(a.len()).ok_or_else(|| Error::Shape(format!("{} values do not form a square grid", a.len())))?;
    report_with(a, b, kind, width, &SsimConfig::default())
}

pub fn report_with(a: &[f64], b: &[f64], kind: Kind, width: usize, cfg: &SsimConfig) -> Result<SimilarityReport> {
    same_len(a, b)?;
    let (a, b, data_range) = match kind {
        Kind::Map => {
            let (a, b) = (unit_sum(a)?, unit_sum(b)?);
            let (lo, hi) =
                a.iter().chain(&b).fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
            let range = if hi > lo { hi - lo } else { 1.0 };
            (a, b, range)
        }
        Kind::Image => {
            if let Some(v) = a.iter().chain(b).find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(Error::Shape(format!("image value {v} outside [0, 1]")));
            }
            (a.to_vec(), b.to_vec(), 1.0)
        }
    };
    let s = ssim_with(&a, &b, width, cfg, data_range)?;
    let p = pcc(&a, &b)?;
    Ok(SimilarityReport {
        ssim: s,
        pcc: p,
        mse: mse(&a, &b)?,
        kind,
        data_range,
        grid_width: width,
        ssim_config: *cfg,
        pcc_negative: p < 0.0,
        ssim_negative: s < 0.0,
    })
}

fn unit_sum(v: &[f64]) -> Result<Vec<f64>> {
    if let Some(x) = v.iter().find(|&&x| x < 0.0) {
        return Err(Error::DegenerateMap(format!("negative entry {x} cannot be normalized")));
    }
    let total: f64 = v.iter().sum();
    if !(total > 0.0) {
        return Err(Error::DegenerateMap("map sums to zero".into()));
    }
    Ok(v.iter().map(|x| x / total).collect())
}
