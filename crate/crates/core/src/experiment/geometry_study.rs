use std::path::Path;

use log::info;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::activation::Activation;
use crate::artifact::{write_atomic, write_json, write_pgm};
use crate::error::{Error, Result};
use crate::geometry::{
    curvature_bound_constant, curvature_report, theorem2_error_decay, toy_network, trace_level_set_2d_with,
    verify_theorem1, verify_theorem2_with, CurvatureReport, DecayReport, NetworkField, NoiseModel, ScalarField,
    Theorem1Report, Theorem2Report, TraceOptions,
};
use crate::tensor::dot;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeometryStudyConfig {
    /// Seeds the toy network and the noise checks.
    pub seed: u64,
    pub hidden: usize,
    pub betas: Vec<f64>,
    /// Contour start points; the first one is the primary contour.
    pub start_points: Vec<[f64; 2]>,
    pub step: f64,
    pub arc_budget: f64,
    pub bounds: [f64; 4],
    pub theorem2_triples: usize,
    pub theorem2_dim: usize,
    pub theorem2_samples: usize,
    pub decay_counts: Vec<usize>,
    pub decay_repeats: usize,
    /// Side of the square rasters.
    pub raster: usize,
}

impl GeometryStudyConfig {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            hidden: 50,
            betas: vec![0.5, 1.0, 2.0, 5.0, 10.0],
            start_points: vec![[-0.4, 0.1], [0.3, -0.2], [0.5, 0.5]],
            step: 1e-3,
            arc_budget: 8.0,
            bounds: [-1.0, 1.0, -1.0, 1.0],
            theorem2_triples: 10,
            theorem2_dim: 4,
            theorem2_samples: 1_000_000,
            decay_counts: vec![1_000, 10_000, 100_000, 1_000_000],
            decay_repeats: 20,
            raster: 201,
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if self.hidden == 0 || self.betas.is_empty() || self.start_points.is_empty() {
            return bad("need hidden units, betas and start points");
        }
        if !(self.step > 0.0 && self.arc_budget > self.step) {
            return bad("need 0 < step < arc_budget");
        }
        if self.raster < 2 || self.theorem2_dim == 0 {
            return bad("raster side must be at least 2 and theorem2_dim positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContourSummary {
    pub beta: f64,
    pub start: [f64; 2],
    pub vertices: usize,
    pub length: f64,
    pub closed: bool,
    pub max_residual: f64,
    pub trace_error: Option<String>,
    pub lambda_max: f64,
    pub worst_slack: f64,
    pub holds: bool,
    pub chained_holds: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Monotonicity {
    pub start: [f64; 2],
    pub betas: Vec<f64>,
    pub lambda_max: Vec<f64>,
    pub non_decreasing: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Theorem2Study {
    pub triples: Vec<Theorem2Report>,
    pub max_relative_error: f64,
    pub all_below_1e_2: bool,
    pub decay: DecayReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeometrySummary {
    pub seed: u64,
    pub contours: Vec<ContourSummary>,
    /// Smallest `worst_slack` over all contours.
    pub min_slack: f64,
    pub theorem1_holds: bool,
    pub chained_holds: bool,
    pub monotonicity: Vec<Monotonicity>,
    pub theorem2_iid: Theorem2Study,
    pub theorem2_along_weight: Theorem2Study,
}

#[derive(Serialize)]
struct CurvatureEntry<'a> {
    beta: f64,
    start: [f64; 2],
    bound_constant: f64,
    at_start: &'a CurvatureReport,
    curvature_min: f64,
    curvature_max: f64,
}

#[derive(Serialize)]
struct Theorem1Entry<'a> {
    beta: f64,
    start: [f64; 2],
    report: &'a Theorem1Report,
}

fn toy_field(cfg: &GeometryStudyConfig, activation: Activation) -> Result<NetworkField> {
    NetworkField::new(toy_network(cfg.hidden, activation, cfg.seed)?, 0)
}

fn theorem2_study(cfg: &GeometryStudyConfig, noise: NoiseModel) -> Result<Theorem2Study> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x7468_6d32);
    let mut triples = Vec::with_capacity(cfg.theorem2_triples);
    let mut first = None;
    for i in 0..cfg.theorem2_triples {
        let w: Vec<f64> = (0..cfg.theorem2_dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let beta = rng.random_range(0.5..5.0);
        // Place x so the smoothed slope σ(β·wᵀx/‖w‖) lies in [0.12, 0.88];
        // far out in the tails the relative error measures only sampling
        // noise on a vanishing slope.
        let logit = rng.random_range(-2.0..2.0);
        let w_sq = dot(&w, &w);
        let mut x: Vec<f64> = (0..cfg.theorem2_dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let shift = (logit * w_sq.sqrt() / beta - dot(&w, &x)) / w_sq;
        x.iter_mut().zip(&w).for_each(|(xi, wi)| *xi += shift * wi);
        first.get_or_insert((w.clone(), beta, x.clone()));
        triples.push(verify_theorem2_with(&w, beta, &x, cfg.theorem2_samples, cfg.seed + i as u64, noise)?);
    }
    let (w, beta, x) = first.ok_or_else(|| Error::Config("need at least one theorem-2 triple".into()))?;
    let decay = theorem2_error_decay(&w, beta, &x, &cfg.decay_counts, cfg.decay_repeats, cfg.seed, noise)?;
    let max_relative_error = triples.iter().map(|t| t.relative_error).fold(0.0, f64::max);
    Ok(Theorem2Study { all_below_1e_2: max_relative_error < 1e-2, max_relative_error, triples, decay })
}

/// Grey raster of `f` over the bounds with dark bands on evenly spaced
/// levels. Row 0 is the top edge.
fn contour_raster(f: &dyn ScalarField, bounds: [f64; 4], side: usize) -> Result<Vec<f64>> {
    let [x0, x1, y0, y1] = bounds;
    let at = |i: usize, lo: f64, hi: f64| lo + (hi - lo) * i as f64 / (side - 1) as f64;
    let mut values = Vec::with_capacity(side * side);
    for r in 0..side {
        for c in 0..side {
            values.push(f.value(&[at(c, x0, x1), at(side - 1 - r, y0, y1)])?);
        }
    }
    let (lo, hi) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let span = if hi > lo { hi - lo } else { 1.0 };
    const LEVELS: f64 = 12.0;
    Ok(values
        .iter()
        .map(|v| {
            let t = (v - lo) / span;
            let band = (t * LEVELS).fract();
            if band < 0.06 {
                0.0
            } else {
                0.25 + 0.75 * t
            }
        })
        .collect())
}

fn contour_csv(trace_points: &[[f64; 2]], values: &[f64], curvatures: &[f64]) -> String {
    let mut s = String::from("x,y,f,lambda\n");
    for ((p, v), k) in trace_points.iter().zip(values).zip(curvatures) {
        s.push_str(&format!("{:e},{:e},{:e},{:e}\n", p[0], p[1], v, k));
    }
    s
}

/// Traces the toy field's contours for every β and start point, checks the
/// normal-change bound on each, runs the one-layer noise checks and writes
/// contour CSVs, `curvature.json`, `theorem1.json`, `theorem2.json`,
/// `geometry_summary.json` and two rasters under `out`.
pub fn run_geometry_study(cfg: &GeometryStudyConfig, out: &Path) -> Result<GeometrySummary> {
    cfg.validate()?;
    info!("geometry study, seed {}", cfg.seed);
    let mut contours = Vec::new();
    let mut curvature_json = Vec::new();
    let mut theorem1_reports = Vec::new();
    let mut reports_at_start = Vec::new();
    for &beta in &cfg.betas {
        let field = toy_field(cfg, Activation::softplus(beta)?)?;
        for (si, &start) in cfg.start_points.iter().enumerate() {
            let mut opts = TraceOptions::new(cfg.arc_budget, cfg.step);
            opts.bounds = Some(cfg.bounds);
            opts.stop_when_closed = true;
            let trace = trace_level_set_2d_with(&field, start, &opts)?;
            let report = verify_theorem1(&field, &trace)?;
            write_atomic(
                &out.join("contours").join(format!("contour_beta{beta}_start{si}.csv")),
                contour_csv(&trace.points, &trace.values, &report.curvatures).as_bytes(),
            )?;
            reports_at_start.push(curvature_report(&field, &start)?);
            contours.push(ContourSummary {
                beta,
                start,
                vertices: trace.points.len(),
                length: trace.length(),
                closed: trace.closed,
                max_residual: trace.max_residual(),
                trace_error: trace.error.clone(),
                lambda_max: report.lambda_max,
                worst_slack: report.worst_slack,
                holds: report.holds,
                chained_holds: report.chained.as_ref().map(|c| c.holds),
            });
            theorem1_reports.push((beta, start, report));
        }
    }
    for ((beta, start, report), at_start) in theorem1_reports.iter().zip(&reports_at_start) {
        let (lo, hi) =
            report.curvatures.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        curvature_json.push(CurvatureEntry {
            beta: *beta,
            start: *start,
            bound_constant: curvature_bound_constant(toy_field(cfg, Activation::Relu)?.network()),
            at_start,
            curvature_min: lo,
            curvature_max: hi,
        });
    }
    write_json(&out.join("curvature.json"), &curvature_json)?;
    let theorem1_json: Vec<Theorem1Entry> = theorem1_reports
        .iter()
        .map(|(beta, start, report)| Theorem1Entry { beta: *beta, start: *start, report })
        .collect();
    write_json(&out.join("theorem1.json"), &theorem1_json)?;

    let monotonicity: Vec<Monotonicity> = cfg
        .start_points
        .iter()
        .map(|&start| {
            let lambda_max: Vec<f64> = contours.iter().filter(|c| c.start == start).map(|c| c.lambda_max).collect();
            Monotonicity {
                start,
                betas: cfg.betas.clone(),
                non_decreasing: lambda_max.windows(2).all(|w| w[1] >= w[0]),
                lambda_max,
            }
        })
        .collect();

    let theorem2_iid = theorem2_study(cfg, NoiseModel::Iid)?;
    let theorem2_along_weight = theorem2_study(cfg, NoiseModel::AlongWeight)?;
    #[derive(Serialize)]
    struct Theorem2Json<'a> {
        iid: &'a Theorem2Study,
        along_weight: &'a Theorem2Study,
    }
    write_json(&out.join("theorem2.json"), &Theorem2Json { iid: &theorem2_iid, along_weight: &theorem2_along_weight })?;

    let side = cfg.raster;
    let smooth = contour_raster(&toy_field(cfg, Activation::softplus(1.0)?)?, cfg.bounds, side)?;
    write_pgm(&out.join("toy_beta1.pgm"), &smooth, side, side)?;
    let relu = contour_raster(&toy_field(cfg, Activation::Relu)?, cfg.bounds, side)?;
    write_pgm(&out.join("toy_relu.pgm"), &relu, side, side)?;

    let summary = GeometrySummary {
        seed: cfg.seed,
        min_slack: contours.iter().map(|c| c.worst_slack).fold(f64::INFINITY, f64::min),
        theorem1_holds: contours.iter().all(|c| c.holds),
        chained_holds: contours.iter().all(|c| c.chained_holds != Some(false)),
        contours,
        monotonicity,
        theorem2_iid,
        theorem2_along_weight,
    };
    write_json(&out.join("geometry_summary.json"), &summary)?;
    Ok(summary)
}
