//! Targeted manipulation of explanation maps.
//!
//! Starting from `x`, the input is moved so that its explanation matches a
//! target map while the logits stay where they were. Relu maps have no
//! useful input gradient, so the loss is evaluated on a softplus copy of the
//! network whose β can grow over the run; the result is judged on the
//! original relu network.

use serde::{Deserialize, Serialize};

use crate::activation::Activation;
use crate::defaults::defaults;
use crate::error::{Error, Result};
use crate::explain::{
    self, normalize, pixel_relevance, record_normalized, record_smoothed, smooth_explain, ExplanationMap, Method,
    MethodSpec, Prepared, Smoothing,
};
use crate::graph;
use crate::metrics::{self, Kind, SimilarityReport};
use crate::net::{argmax, softmax, Network};
use crate::tape::Tape;
use crate::tensor::norm;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Optimizer {
    /// `x ← x − lr·∇L`.
    Gd,
    /// Heavy-ball: `v ← μv + ∇L`, `x ← x − lr·v`.
    Momentum {
        momentum: f64,
    },
    Adam {
        beta1: f64,
        beta2: f64,
        eps: f64,
    },
}

impl Default for Optimizer {
    fn default() -> Self {
        defaults().optimizer
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaGrowth {
    pub enabled: bool,
    pub beta0: f64,
    pub beta_end: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackConfig {
    pub iterations: usize,
    pub lr: f64,
    /// Factor on the MSE between the normalised maps.
    pub weight_h: f64,
    /// Factor on the MSE between surrogate logits at `x_adv` and at `x`.
    pub weight_g: f64,
    /// Factor on the MSE between `x_adv` and `x`.
    pub weight_x: f64,
    pub beta_growth: BetaGrowth,
    /// Surrogate β when growth is disabled.
    pub fixed_beta: f64,
    pub clamp_lo: f64,
    pub clamp_hi: f64,
    pub seed: u64,
    pub optimizer: Optimizer,
    /// Explanation being attacked. SmoothGrad draws fresh noise at every
    /// iteration; β-smoothing evaluates the map at its own fixed β.
    pub smoothing: Smoothing,
    /// Channels folded by `pixel_relevance` inside the loss.
    pub channels: usize,
}

/// Which hyperparameter table a default configuration is taken from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arm {
    Plain,
    SmoothGrad,
    BetaSmoothing,
}

impl AttackConfig {
    /// Tabulated iterations and learning rate for `method` (scaled by the
    /// defaults' desk learning-rate factor), the default optimiser, β growth
    /// except for LRP, which runs at a fixed β.
    pub fn for_method(method: Method) -> Self {
        Self::for_arm(method, Arm::Plain)
    }

    pub fn for_arm(method: Method, arm: Arm) -> Self {
        let d = defaults();
        let tables = &d.tables;
        let schedule = match arm {
            Arm::Plain => tables.plain.get(&method),
            Arm::SmoothGrad => tables.smoothgrad.get(&method).or(tables.plain.get(&method)),
            Arm::BetaSmoothing => tables.beta_smoothing.get(&method),
        }
        .copied()
        .expect("defaults list every method");
        let smoothing = match arm {
            Arm::Plain => Smoothing::None,
            Arm::SmoothGrad => Smoothing::smoothgrad(d.defense.smoothgrad_samples, d.defense.smoothgrad_noise_level, 0),
            Arm::BetaSmoothing => Smoothing::Beta { beta: d.defense.beta_smoothing_beta },
        };
        Self {
            iterations: schedule.iterations,
            lr: schedule.lr * d.desk_lr_scale,
            weight_h: d.factors.weight_h,
            weight_g: d.factors.weight_g,
            weight_x: d.factors.weight_x,
            beta_growth: BetaGrowth {
                enabled: method != Method::Lrp,
                beta0: d.beta_growth.beta0,
                beta_end: d.beta_growth.beta_end,
            },
            fixed_beta: d.lrp_fixed_beta,
            clamp_lo: 0.0,
            clamp_hi: 1.0,
            seed: 0,
            optimizer: d.optimizer,
            smoothing,
            channels: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.lr > 0.0) {
            return bad(format!("lr must be positive, got {}", self.lr));
        }
        for (name, w) in [("weight_h", self.weight_h), ("weight_g", self.weight_g), ("weight_x", self.weight_x)] {
            if !(w >= 0.0 && w.is_finite()) {
                return bad(format!("{name} must be finite and non-negative, got {w}"));
            }
        }
        let g = &self.beta_growth;
        if g.enabled && !(g.beta0 > 0.0 && g.beta0 <= g.beta_end && g.beta_end.is_finite()) {
            return bad(format!("need 0 < beta0 ≤ beta_end, got {} / {}", g.beta0, g.beta_end));
        }
        if !g.enabled {
            Activation::softplus(self.fixed_beta)?;
        }
        if !(self.clamp_lo < self.clamp_hi) {
            return bad(format!("need clamp_lo < clamp_hi, got {} / {}", self.clamp_lo, self.clamp_hi));
        }
        if self.channels == 0 {
            return bad("channels must be positive".into());
        }
        self.smoothing.validate()
    }

    pub fn beta_at(&self, t: usize) -> f64 {
        let g = &self.beta_growth;
        if g.enabled {
            beta_schedule(t, self.iterations.max(1), g.beta0, g.beta_end)
        } else {
            self.fixed_beta
        }
    }
}

/// `β(t) = β₀·(β_e/β₀)^{t/T}`.
pub fn beta_schedule(t: usize, total: usize, beta0: f64, beta_end: f64) -> f64 {
    if t == 0 {
        return beta0;
    }
    if t >= total {
        return beta_end;
    }
    beta0 * (beta_end / beta0).powf(t as f64 / total as f64)
}

/// One evaluation of the manipulation loss.
#[derive(Debug, Clone, PartialEq)]
pub struct LossEval {
    pub total: f64,
    pub map_term: f64,
    pub output_term: f64,
    pub image_term: f64,
    pub gradient: Vec<f64>,
}

/// The manipulation loss for one `(x, target, class, method)`, evaluable at
/// any `x_adv` and surrogate β.
pub struct AttackObjective<'a> {
    net: &'a Network,
    spec: &'a MethodSpec,
    prep: Prepared,
    x: Vec<f64>,
    target: Vec<f64>,
    class: usize,
    cfg: &'a AttackConfig,
}

impl<'a> AttackObjective<'a> {
    pub fn new(
        net: &'a Network,
        x: &[f64],
        target: &ExplanationMap,
        class: usize,
        spec: &'a MethodSpec,
        cfg: &'a AttackConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        net.check_input(x)?;
        net.check_class(class)?;
        if !x.len().is_multiple_of(cfg.channels) || target.len() != x.len() / cfg.channels {
            return Err(Error::Shape(format!(
                "target has {} values for {} inputs in {} channels",
                target.len(),
                x.len(),
                cfg.channels
            )));
        }
        let target = normalize(target)?.values().to_vec();
        Ok(Self { net, spec, prep: Prepared::new(net, spec)?, x: x.to_vec(), target, class, cfg })
    }

    /// Loss and its input gradient at `x_adv` on the softplus_β surrogate.
    /// `noise_round` selects the SmoothGrad noise draw.
    pub fn evaluate(&self, x_adv: &[f64], beta: f64, noise_round: u64) -> Result<LossEval> {
        let cfg = self.cfg;
        let act = Activation::softplus(beta)?;
        let mut tape = Tape::new();
        let xv = tape.input(x_adv.to_vec());
        let mut total = tape.constant(vec![0.0]);
        let (mut map_term, mut output_term, mut image_term) = (0.0, 0.0, 0.0);
        if cfg.weight_h > 0.0 {
            let h = record_smoothed(
                &mut tape,
                self.net,
                act,
                &self.prep,
                self.spec,
                &cfg.smoothing,
                noise_round,
                xv,
                self.class,
            );
            let hn = record_normalized(&mut tape, h, cfg.channels);
            let target = tape.constant(self.target.clone());
            let m = tape.mse(hn, target);
            map_term = tape.scalar(m);
            let term = tape.scale(m, cfg.weight_h);
            total = tape.add(total, term);
        }
        if cfg.weight_g > 0.0 {
            let reference = self.net.with_activation(act).logits(&self.x)?;
            let fwd = graph::forward(&mut tape, self.net, act, xv);
            let r = tape.constant(reference);
            let m = tape.mse(fwd.logits(), r);
            output_term = tape.scalar(m);
            let term = tape.scale(m, cfg.weight_g);
            total = tape.add(total, term);
        }
        if cfg.weight_x > 0.0 {
            let x0 = tape.constant(self.x.clone());
            let m = tape.mse(xv, x0);
            image_term = tape.scalar(m);
            let term = tape.scale(m, cfg.weight_x);
            total = tape.add(total, term);
        }
        let value = tape.scalar(total);
        let gradient = tape.gradient(total, xv);
        Ok(LossEval { total: value, map_term, output_term, image_term, gradient })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttackResult {
    pub method: Method,
    pub class: usize,
    pub x_adv: Vec<f64>,
    pub loss_trace: Vec<f64>,
    /// Relu-network map of `x_adv` (after pixel relevance and normalisation)
    /// against the target.
    pub final_map_similarity: SimilarityReport,
    /// Same comparison for the unperturbed input.
    pub initial_map_similarity: SimilarityReport,
    /// `x` against `x_adv`.
    pub image_similarity: SimilarityReport,
    /// `‖g(x_adv) − g(x)‖₂` on the relu logits.
    pub output_delta_logits: f64,
    /// The same after softmax.
    pub output_delta_softmax: f64,
    pub original_prediction: usize,
    pub adversarial_prediction: usize,
    pub class_preserved: bool,
    pub final_beta: f64,
}

fn map_report(
    net: &Network,
    x: &[f64],
    class: usize,
    spec: &MethodSpec,
    cfg: &AttackConfig,
    target: &[f64],
    width: usize,
) -> Result<SimilarityReport> {
    let h = smooth_explain(net, x, class, spec, &cfg.smoothing)?;
    let h = normalize(&pixel_relevance(&h, cfg.channels)?)?;
    metrics::report_with(h.values(), target, Kind::Map, width, &defaults().ssim)
}

/// Grid width used for SSIM on `n` values: the square side when there is
/// one, otherwise the whole vector as a single row.
pub(crate) fn grid_width(n: usize) -> usize {
    crate::artifact::square_side(n).unwrap_or(n)
}

/// Moves `x` so the explanation of `class` matches `target` while the
/// logits stay fixed. `net` must use relu.
pub fn manipulate(
    net: &Network,
    x: &[f64],
    target: &ExplanationMap,
    class: usize,
    spec: &MethodSpec,
    cfg: &AttackConfig,
) -> Result<AttackResult> {
    if net.activation() != Activation::Relu {
        return Err(Error::Config("manipulate expects the relu network".into()));
    }
    if let Some(v) = x.iter().find(|v| !(cfg.clamp_lo..=cfg.clamp_hi).contains(*v)) {
        return Err(Error::Config(format!("input value {v} outside [{}, {}]", cfg.clamp_lo, cfg.clamp_hi)));
    }
    let objective = AttackObjective::new(net, x, target, class, spec, cfg)?;
    let d = x.len();
    let mut x_adv = x.to_vec();
    let mut loss_trace = Vec::with_capacity(cfg.iterations);
    let mut first = vec![0.0; d];
    let mut second = vec![0.0; d];

    for t in 0..cfg.iterations {
        let beta = cfg.beta_at(t);
        let eval = objective.evaluate(&x_adv, beta, t as u64 + 1)?;
        if !eval.total.is_finite() || eval.gradient.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFiniteLoss {
                iteration: t,
                beta,
                map_term: eval.map_term,
                output_term: eval.output_term,
                image_term: eval.image_term,
            });
        }
        loss_trace.push(eval.total);
        let g = &eval.gradient;
        match cfg.optimizer {
            Optimizer::Gd => {
                for (xi, gi) in x_adv.iter_mut().zip(g) {
                    *xi -= cfg.lr * gi;
                }
            }
            Optimizer::Momentum { momentum } => {
                for i in 0..d {
                    first[i] = momentum * first[i] + g[i];
                    x_adv[i] -= cfg.lr * first[i];
                }
            }
            Optimizer::Adam { beta1, beta2, eps } => {
                let step = (t + 1) as i32;
                let (c1, c2) = (1.0 - beta1.powi(step), 1.0 - beta2.powi(step));
                for i in 0..d {
                    first[i] = beta1 * first[i] + (1.0 - beta1) * g[i];
                    second[i] = beta2 * second[i] + (1.0 - beta2) * g[i] * g[i];
                    x_adv[i] -= cfg.lr * (first[i] / c1) / ((second[i] / c2).sqrt() + eps);
                }
            }
        }
        x_adv.iter_mut().for_each(|v| *v = v.clamp(cfg.clamp_lo, cfg.clamp_hi));
    }

    let width = grid_width(target.len());
    let target_values = normalize(target)?.values().to_vec();
    let final_map_similarity = map_report(net, &x_adv, class, spec, cfg, &target_values, width)?;
    let initial_map_similarity = map_report(net, x, class, spec, cfg, &target_values, width)?;
    let image_width = grid_width(d);
    let image_similarity =
        metrics::report_with(x, &x_adv, Kind::Image, image_width, &defaults().ssim).or_else(|e| match e {
            // A zero-variance image (for example an untouched constant input)
            // has no correlation; report it as identical when it is.
            Error::ZeroVariance if x == x_adv.as_slice() => Ok(identical_report(image_width)),
            other => Err(other),
        })?;
    let (before, after) = (net.logits(x)?, net.logits(&x_adv)?);
    let diff = |a: &[f64], b: &[f64]| norm(&a.iter().zip(b).map(|(p, q)| p - q).collect::<Vec<_>>());
    let (original_prediction, adversarial_prediction) = (argmax(&before), argmax(&after));
    Ok(AttackResult {
        method: spec.kind,
        class,
        output_delta_logits: diff(&before, &after),
        output_delta_softmax: diff(&softmax(&before), &softmax(&after)),
        x_adv,
        loss_trace,
        final_map_similarity,
        initial_map_similarity,
        image_similarity,
        original_prediction,
        adversarial_prediction,
        class_preserved: original_prediction == adversarial_prediction,
        final_beta: cfg.beta_at(cfg.iterations),
    })
}

fn identical_report(width: usize) -> SimilarityReport {
    SimilarityReport {
        ssim: 1.0,
        pcc: 1.0,
        mse: 0.0,
        kind: Kind::Image,
        data_range: 1.0,
        grid_width: width,
        ssim_config: defaults().ssim,
        pcc_negative: false,
        ssim_negative: false,
    }
}

/// Normalised pixel relevance of `x_target`'s explanation for `class` on
/// `net`.
pub fn target_from_image(net: &Network, x_target: &[f64], class: usize, spec: &MethodSpec) -> Result<ExplanationMap> {
    normalize(&pixel_relevance(&explain::explain(net, x_target, class, spec)?, 1)?)
}

#[cfg(test)]
mod tests;
