//! Explanation maps `h(x)` for a target class.
//!
//! Every method is recorded on a [`Tape`], so the same code serves plain
//! evaluation and the attack, which differentiates maps with respect to the
//! input. [`lrp_trace`] is a separate loop-based LRP that also returns the
//! per-layer relevances.

mod lrp;
mod patterns;
mod smooth;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::activation::Activation;
use crate::artifact;
use crate::error::{Error, Result};
use crate::graph::{self, BackwardRule};
use crate::net::Network;
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

pub use lrp::{lrp_trace, LrpTrace, LRP_EPS};
pub use patterns::{learn_patterns, Patterns};
pub(crate) use smooth::record_smoothed;
pub use smooth::{smooth_explain, Noise, Smoothing};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Gradient,
    GradientXInput,
    IntegratedGradients,
    /// Guided backpropagation.
    Gbp,
    Lrp,
    PatternAttribution,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Gradient,
        Method::GradientXInput,
        Method::IntegratedGradients,
        Method::Gbp,
        Method::Lrp,
        Method::PatternAttribution,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Gradient => "gradient",
            Method::GradientXInput => "gradient_x_input",
            Method::IntegratedGradients => "integrated_gradients",
            Method::Gbp => "gbp",
            Method::Lrp => "lrp",
            Method::PatternAttribution => "pattern_attribution",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.to_ascii_lowercase().replace('-', "_");
        Method::ALL
            .into_iter()
            .find(|m| m.name() == key)
            .or(match key.as_str() {
                "grad" => Some(Method::Gradient),
                "gxi" | "grad_x_input" => Some(Method::GradientXInput),
                "ig" | "intgrad" => Some(Method::IntegratedGradients),
                "pa" => Some(Method::PatternAttribution),
                _ => None,
            })
            .ok_or_else(|| Error::Config(format!("unknown explanation method {s:?}")))
    }
}

/// Integration rule for Integrated Gradients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quadrature {
    /// `(1/m)·Σ_{s<m} f(s/m)`.
    #[default]
    LeftRiemann,
    Trapezoid,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodSpec {
    pub kind: Method,
    /// Integrated Gradients only.
    pub ig_baseline: Option<Tensor>,
    pub ig_steps: usize,
    pub quadrature: Quadrature,
    /// PatternAttribution only: one pattern matrix per layer, shaped like
    /// the layer's weights.
    pub patterns: Option<Vec<Tensor>>,
}

pub const DEFAULT_IG_STEPS: usize = 30;

impl MethodSpec {
    pub fn new(kind: Method) -> Self {
        Self {
            kind,
            ig_baseline: None,
            ig_steps: DEFAULT_IG_STEPS,
            quadrature: Quadrature::LeftRiemann,
            patterns: None,
        }
    }

    pub fn integrated_gradients(baseline: Tensor, steps: usize) -> Self {
        Self { ig_baseline: Some(baseline), ig_steps: steps, ..Self::new(Method::IntegratedGradients) }
    }

    pub fn pattern_attribution(patterns: Vec<Tensor>) -> Self {
        Self { patterns: Some(patterns), ..Self::new(Method::PatternAttribution) }
    }

    /// Sets an all-zero IG baseline of length `dim`.
    pub fn with_zero_baseline(mut self, dim: usize) -> Self {
        self.ig_baseline = Some(Tensor::zeros(vec![dim]));
        self
    }

    pub fn with_quadrature(mut self, quadrature: Quadrature) -> Self {
        self.quadrature = quadrature;
        self
    }

    pub(crate) fn validate(&self, net: &Network) -> Result<()> {
        match self.kind {
            Method::IntegratedGradients => {
                if self.ig_steps == 0 {
                    return Err(Error::Config("ig_steps must be at least 1".into()));
                }
                let base = self
                    .ig_baseline
                    .as_ref()
                    .ok_or_else(|| Error::Config("integrated gradients needs a baseline".into()))?;
                if base.len() != net.input_dim() {
                    return Err(Error::Shape(format!(
                        "baseline has {} entries, input has {}",
                        base.len(),
                        net.input_dim()
                    )));
                }
            }
            Method::PatternAttribution => {
                let patterns =
                    self.patterns.as_ref().ok_or_else(|| Error::Config("pattern attribution needs patterns".into()))?;
                if patterns.len() != net.layers().len() {
                    return Err(Error::Shape(format!(
                        "{} pattern matrices for {} layers",
                        patterns.len(),
                        net.layers().len()
                    )));
                }
                for (l, (p, layer)) in patterns.iter().zip(net.layers()).enumerate() {
                    if p.shape() != layer.weights.shape() {
                        return Err(Error::Shape(format!(
                            "pattern {l} has shape {:?}, weights have {:?}",
                            p.shape(),
                            layer.weights.shape()
                        )));
                    }
                }
            }
            _ => {}
        }
        Ok(())
    }
}

/// Derived matrices a method needs while recording, kept alive for the
/// lifetime of the tape.
pub(crate) struct Prepared {
    /// Backward weights: `W ⊙ A` for PatternAttribution.
    pattern_weights: Vec<Tensor>,
    /// `max(W, 0)` per layer, for LRP.
    positive: Vec<Tensor>,
    /// `min(W, 0)` of the first layer and its row sums, for LRP.
    negative_first: Option<Tensor>,
    negative_first_rowsum: Vec<f64>,
    baseline: Vec<f64>,
}

impl Prepared {
    pub(crate) fn new(net: &Network, spec: &MethodSpec) -> Result<Self> {
        spec.validate(net)?;
        let mut prep = Prepared {
            pattern_weights: Vec::new(),
            positive: Vec::new(),
            negative_first: None,
            negative_first_rowsum: Vec::new(),
            baseline: Vec::new(),
        };
        match spec.kind {
            Method::PatternAttribution => {
                let patterns = spec.patterns.as_ref().expect("validated");
                prep.pattern_weights = net
                    .layers()
                    .iter()
                    .zip(patterns)
                    .map(|(layer, a)| {
                        let data = layer.weights.data().iter().zip(a.data()).map(|(w, a)| w * a).collect();
                        Tensor::new(layer.weights.shape().to_vec(), data)
                    })
                    .collect::<Result<_>>()?;
            }
            Method::Lrp => {
                prep.positive = net.layers().iter().map(|l| l.weights.map(|w| w.max(0.0))).collect::<Result<_>>()?;
                let neg = net.layers()[0].weights.map(|w| w.min(0.0))?;
                prep.negative_first_rowsum = (0..neg.rows()).map(|j| -neg.row(j).iter().sum::<f64>()).collect();
                prep.negative_first = Some(neg);
            }
            Method::IntegratedGradients => {
                prep.baseline = spec.ig_baseline.as_ref().expect("validated").data().to_vec();
            }
            _ => {}
        }
        Ok(prep)
    }
}

/// Records the raw map of `spec` at the tape value `x`, evaluated with the
/// hidden nonlinearity `act` over `net`'s weights.
#[allow(clippy::too_many_arguments)]
pub(crate) fn record<'a>(
    tape: &mut Tape<'a>,
    net: &'a Network,
    act: Activation,
    prep: &'a Prepared,
    spec: &MethodSpec,
    x: Var,
    class: usize,
) -> Var {
    let weights: Vec<&'a Tensor> = net.layers().iter().map(|l| &l.weights).collect();
    let gradient_at = |tape: &mut Tape<'a>, at: Var, rule: BackwardRule, w: &[&'a Tensor]| {
        let fwd = graph::forward(tape, net, act, at);
        graph::backward(tape, &fwd, w, act, class, rule)
    };
    match spec.kind {
        Method::Gradient => gradient_at(tape, x, BackwardRule::Gradient, &weights),
        Method::GradientXInput => {
            let g = gradient_at(tape, x, BackwardRule::Gradient, &weights);
            tape.mul(g, x)
        }
        Method::Gbp => gradient_at(tape, x, BackwardRule::Guided, &weights),
        Method::PatternAttribution => {
            let w: Vec<&'a Tensor> = prep.pattern_weights.iter().collect();
            gradient_at(tape, x, BackwardRule::Gradient, &w)
        }
        Method::IntegratedGradients => {
            let base = tape.constant(prep.baseline.clone());
            let diff = tape.sub(x, base);
            let mut total: Option<Var> = None;
            for (t, weight) in quadrature_nodes(spec.quadrature, spec.ig_steps) {
                let shift = tape.scale(diff, t);
                let point = tape.add(base, shift);
                let g = gradient_at(tape, point, BackwardRule::Gradient, &weights);
                let g = tape.scale(g, weight);
                total = Some(match total {
                    Some(acc) => tape.add(acc, g),
                    None => g,
                });
            }
            let avg = total.expect("at least one step");
            tape.mul(diff, avg)
        }
        Method::Lrp => record_lrp(tape, net, act, prep, x, class),
    }
}

fn quadrature_nodes(rule: Quadrature, steps: usize) -> Vec<(f64, f64)> {
    let m = steps as f64;
    match rule {
        Quadrature::LeftRiemann => (0..steps).map(|s| (s as f64 / m, 1.0 / m)).collect(),
        Quadrature::Trapezoid => (0..=steps)
            .map(|s| {
                let w = if s == 0 || s == steps { 0.5 / m } else { 1.0 / m };
                (s as f64 / m, w)
            })
            .collect(),
    }
}

/// Zeroes relevance of neurons whose denominator is below [`LRP_EPS`] and
/// hands it to the remaining neurons in proportion to their own relevance.
fn redistribute(tape: &mut Tape<'_>, relevance: Var, den: Var) -> Var {
    let mask: Vec<f64> = tape.value(den).iter().map(|&d| if d >= LRP_EPS { 1.0 } else { 0.0 }).collect();
    if mask.iter().all(|&m| m == 1.0) {
        return relevance;
    }
    let alive_share: f64 = tape.value(relevance).iter().zip(&mask).map(|(r, m)| r * m).sum();
    if alive_share == 0.0 {
        return relevance;
    }
    let alive = tape.mul_const(relevance, mask);
    let total = tape.sum(relevance);
    let alive_total = tape.sum(alive);
    let scaled = tape.mul_scalar(alive, total);
    tape.div_scalar(scaled, alive_total)
}

fn record_lrp<'a>(
    tape: &mut Tape<'a>,
    net: &'a Network,
    act: Activation,
    prep: &'a Prepared,
    x: Var,
    class: usize,
) -> Var {
    let fwd = graph::forward(tape, net, act, x);
    let mut onehot = vec![0.0; net.num_classes()];
    onehot[class] = 1.0;
    let mut relevance = tape.constant(onehot);
    for l in (1..net.layers().len()).rev() {
        let w = &prep.positive[l];
        let a = fwd.inputs[l];
        let z = tape.matvec(w.data(), w.cols(), a);
        let r = redistribute(tape, relevance, z);
        let s = tape.safe_div(r, z, LRP_EPS);
        let c = tape.matvec_t(w.data(), w.cols(), s);
        relevance = tape.mul(a, c);
    }
    // Bounded-input rule on the first layer with bounds 0 and 1:
    // num_ji = x_i·W_ji − min(W_ji, 0), which is ≥ 0 on [0, 1].
    let w = &net.layers()[0].weights;
    let neg = prep.negative_first.as_ref().expect("prepared for lrp");
    let wx = tape.matvec(w.data(), w.cols(), x);
    let den = tape.add_const(wx, &prep.negative_first_rowsum);
    let r = redistribute(tape, relevance, den);
    let s = tape.safe_div(r, den, LRP_EPS);
    let c = tape.matvec_t(w.data(), w.cols(), s);
    let xc = tape.mul(x, c);
    let cn = tape.matvec_t(neg.data(), neg.cols(), s);
    tape.sub(xc, cn)
}

/// Per-feature relevance with a normalisation flag.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExplanationMap {
    values: Tensor,
    normalized: bool,
}

impl ExplanationMap {
    pub fn raw(values: Vec<f64>) -> Result<Self> {
        Ok(Self { values: Tensor::vector(values)?, normalized: false })
    }

    pub fn values(&self) -> &[f64] {
        self.values.data()
    }

    pub fn tensor(&self) -> &Tensor {
        &self.values
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn to_csv_row(&self) -> String {
        let mut s = self.values().iter().map(|v| format!("{v:e}")).collect::<Vec<_>>().join(",");
        s.push('\n');
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        artifact::write_atomic(path, self.to_csv_row().as_bytes())
    }

    /// Heatmap of the normalised absolute map, min-max scaled for display.
    pub fn write_pgm(&self, path: &Path, width: usize, height: usize) -> Result<()> {
        let shown = if self.normalized {
            self.clone()
        } else {
            match normalize(&pixel_relevance(self, 1)?) {
                Ok(m) => m,
                Err(Error::DegenerateMap(_)) => pixel_relevance(self, 1)?,
                Err(e) => return Err(e),
            }
        };
        if shown.len() != width * height {
            return Err(Error::Shape(format!("{} values for a {width}×{height} image", shown.len())));
        }
        artifact::write_pgm(path, shown.values(), width, height)
    }
}

/// Raw, possibly signed map of `spec` for class `class` at `x`.
pub fn explain(net: &Network, x: &[f64], class: usize, spec: &MethodSpec) -> Result<ExplanationMap> {
    explain_with(net, net.activation(), x, class, spec)
}

pub(crate) fn explain_with(
    net: &Network,
    act: Activation,
    x: &[f64],
    class: usize,
    spec: &MethodSpec,
) -> Result<ExplanationMap> {
    net.check_input(x)?;
    net.check_class(class)?;
    let prep = Prepared::new(net, spec)?;
    let mut tape = Tape::new();
    let xv = tape.constant(x.to_vec());
    let h = record(&mut tape, net, act, &prep, spec, xv, class);
    let values = tape.value(h).to_vec();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("{} map", spec.kind)));
    }
    ExplanationMap::raw(values)
}

/// Sums absolute values over channels. Values are laid out channel-major:
/// all pixels of channel 0, then all pixels of channel 1, and so on.
pub fn pixel_relevance(map: &ExplanationMap, channels: usize) -> Result<ExplanationMap> {
    if channels == 0 || !map.len().is_multiple_of(channels) {
        return Err(Error::Shape(format!("{} values are not divisible into {channels} channels", map.len())));
    }
    let pixels = map.len() / channels;
    let mut out = vec![0.0; pixels];
    for block in map.values().chunks_exact(pixels) {
        out.iter_mut().zip(block).for_each(|(o, v)| *o += v.abs());
    }
    ExplanationMap::raw(out)
}

/// Scales a non-negative map to unit sum.
pub fn normalize(map: &ExplanationMap) -> Result<ExplanationMap> {
    if map.normalized {
        return Ok(map.clone());
    }
    if let Some(v) = map.values().iter().find(|&&v| v < 0.0) {
        return Err(Error::DegenerateMap(format!("negative entry {v} cannot be normalized")));
    }
    let total: f64 = map.values().iter().sum();
    if !(total > 0.0) {
        return Err(Error::DegenerateMap("map sums to zero".into()));
    }
    Ok(ExplanationMap { values: map.values.map(|v| v / total)?, normalized: true })
}

/// Records `normalize(pixel_relevance(h))` on the tape.
pub(crate) fn record_normalized(tape: &mut Tape<'_>, h: Var, channels: usize) -> Var {
    let a = tape.abs(h);
    let folded = if channels > 1 { tape.fold_channels(a, channels) } else { a };
    let total = tape.sum(folded);
    tape.div_scalar(folded, total)
}

/// How far an Integrated Gradients map is from summing to the score change.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Completeness {
    pub attribution_sum: f64,
    pub score_difference: f64,
    /// `|Σh − Δg| / |Δg|`.
    pub relative_error: f64,
}

pub fn ig_completeness(net: &Network, x: &[f64], class: usize, spec: &MethodSpec) -> Result<Completeness> {
    if spec.kind != Method::IntegratedGradients {
        return Err(Error::Config("completeness applies to integrated gradients".into()));
    }
    let h = explain(net, x, class, spec)?;
    let base = spec.ig_baseline.as_ref().expect("validated by explain");
    let score_difference = net.logits(x)?[class] - net.logits(base.data())?[class];
    let attribution_sum: f64 = h.values().iter().sum();
    Ok(Completeness {
        attribution_sum,
        score_difference,
        relative_error: (attribution_sum - score_difference).abs() / score_difference.abs(),
    })
}
