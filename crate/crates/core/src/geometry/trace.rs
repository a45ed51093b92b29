use rayon::prelude::*;
use serde::Serialize;

use super::{check_dim, curvature_report, normal_from_gradient, ScalarField};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceOptions {
    /// Stop once the polyline is this long.
    pub arc_budget: f64,
    /// Predictor step length.
    pub step: f64,
    pub newton_max_iter: usize,
    /// Corrector stops when `|f − c|` drops below this.
    pub newton_tol: f64,
    /// `[x_min, x_max, y_min, y_max]`; tracing stops on leaving the box.
    pub bounds: Option<[f64; 4]>,
    /// Stop after coming back within one step of the start.
    pub stop_when_closed: bool,
}

impl TraceOptions {
    pub fn new(arc_budget: f64, step: f64) -> Self {
        Self { arc_budget, step, newton_max_iter: 20, newton_tol: 1e-10, bounds: None, stop_when_closed: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelSetTrace {
    pub points: Vec<[f64; 2]>,
    /// Field value at each vertex.
    pub values: Vec<f64>,
    /// Cumulative polyline length at each vertex.
    pub arc_lengths: Vec<f64>,
    /// The level `c = f(p₀)`.
    pub level: f64,
    pub closed: bool,
    /// Set when tracing stopped early; the points up to that failure are kept.
    pub error: Option<String>,
}

impl LevelSetTrace {
    /// Arc length of the traced curve, which on a plane curve is also the
    /// geodesic distance between its ends.
    pub fn length(&self) -> f64 {
        self.arc_lengths.last().copied().unwrap_or(0.0)
    }

    pub fn max_residual(&self) -> f64 {
        self.values.iter().map(|v| (v - self.level).abs()).fold(0.0, f64::max)
    }
}

pub fn trace_level_set_2d(f: &dyn ScalarField, p0: [f64; 2], arc_budget: f64, step: f64) -> Result<LevelSetTrace> {
    trace_level_set_2d_with(f, p0, &TraceOptions::new(arc_budget, step))
}

fn correct(f: &dyn ScalarField, mut p: [f64; 2], level: f64, opts: &TraceOptions) -> Result<([f64; 2], f64)> {
    for _ in 0..=opts.newton_max_iter {
        let v = f.value(&p)?;
        if (v - level).abs() < opts.newton_tol {
            return Ok((p, v));
        }
        let g = f.gradient(&p)?;
        let gg = g[0] * g[0] + g[1] * g[1];
        if !(gg.sqrt() > super::GRAD_EPS) {
            return Err(Error::VanishingGradient { norm: gg.sqrt() });
        }
        let t = (v - level) / gg;
        p = [p[0] - t * g[0], p[1] - t * g[1]];
    }
    Err(Error::NonFinite(format!(
        "corrector did not reach |f − c| < {:e} in {} iterations",
        opts.newton_tol, opts.newton_max_iter
    )))
}

/// Predictor–corrector contour following: step along the tangent, then
/// Newton along the gradient back onto `f = f(p₀)`.
pub fn trace_level_set_2d_with(f: &dyn ScalarField, p0: [f64; 2], opts: &TraceOptions) -> Result<LevelSetTrace> {
    check_dim(f, &p0)?;
    if f.dim() != 2 {
        return Err(Error::Shape("contour tracing needs a two-dimensional field".into()));
    }
    if !(opts.step > 0.0 && opts.arc_budget >= 0.0) {
        return Err(Error::Config("step must be positive and the arc budget non-negative".into()));
    }
    let level = f.value(&p0)?;
    normal_from_gradient(&f.gradient(&p0)?)?;
    let mut tr = LevelSetTrace {
        points: vec![p0],
        values: vec![level],
        arc_lengths: vec![0.0],
        level,
        closed: false,
        error: None,
    };
    let mut heading: Option<[f64; 2]> = None;
    let mut p = p0;
    let mut length = 0.0;
    while length < opts.arc_budget {
        let n = match f.gradient(&p).and_then(|g| normal_from_gradient(&g)) {
            Ok((n, _)) => n,
            Err(e) => {
                tr.error = Some(e.to_string());
                break;
            }
        };
        let mut t = [-n[1], n[0]];
        if let Some(h) = heading {
            if t[0] * h[0] + t[1] * h[1] < 0.0 {
                t = [-t[0], -t[1]];
            }
        }
        heading = Some(t);
        let h = opts.step.min(opts.arc_budget - length);
        let (q, v) = match correct(f, [p[0] + h * t[0], p[1] + h * t[1]], level, opts) {
            Ok(r) => r,
            Err(e) => {
                tr.error = Some(e.to_string());
                break;
            }
        };
        length += ((q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2)).sqrt();
        p = q;
        if let Some([x0, x1, y0, y1]) = opts.bounds {
            if !(x0..=x1).contains(&p[0]) || !(y0..=y1).contains(&p[1]) {
                break;
            }
        }
        tr.points.push(p);
        tr.values.push(v);
        tr.arc_lengths.push(length);
        if opts.stop_when_closed && length > 2.0 * opts.step {
            let back = ((p[0] - p0[0]).powi(2) + (p[1] - p0[1]).powi(2)).sqrt();
            if back < opts.step {
                tr.closed = true;
                break;
            }
        }
    }
    Ok(tr)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairSlack {
    pub index: usize,
    /// Arc length from the first vertex.
    pub geodesic: f64,
    /// `‖n(p) − n(p₀)‖`.
    pub normal_change: f64,
    /// `|λ_max|·d_g`.
    pub bound: f64,
    pub slack: f64,
}

/// The curvature bound `β·C̃/c` checked against sampled curvatures.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainedBound {
    pub beta: f64,
    pub bound_constant: f64,
    /// Smallest gradient norm over the vertices.
    pub c_min: f64,
    /// `β·C̃/c_min`.
    pub bound: f64,
    /// `min_i (β·C̃/c_i − |λ_i|)`.
    pub worst_pointwise_slack: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Theorem1Report {
    pub vertices: usize,
    /// Signed principal curvature at every vertex.
    pub curvatures: Vec<f64>,
    pub lambda_max: f64,
    /// Pairs `(p₀, p_i)` with `p₀` the first vertex.
    pub pairs: Vec<PairSlack>,
    /// Minimum of `|λ_max|·d_g − ‖n(p_j) − n(p_i)‖` over all vertex pairs.
    pub worst_slack: f64,
    pub tolerance: f64,
    pub holds: bool,
    pub chained: Option<ChainedBound>,
}

/// Checks `‖n(p) − n(q)‖ ≤ |λ_max|·d_g(p, q)` over every vertex pair of a
/// traced contour, with `d_g` the arc length between them.
pub fn verify_theorem1(f: &dyn ScalarField, trace: &LevelSetTrace) -> Result<Theorem1Report> {
    const TOL: f64 = 1e-6;
    let reports = trace.points.par_iter().map(|p| curvature_report(f, p)).collect::<Result<Vec<_>>>()?;
    let curvatures: Vec<f64> = reports.iter().map(|r| r.principal_curvatures[0]).collect();
    let lambda_max = reports.iter().map(|r| r.lambda_max).fold(0.0, f64::max);
    let normals: Vec<[f64; 2]> = reports.iter().map(|r| [r.normal[0], r.normal[1]]).collect();
    let s = &trace.arc_lengths;
    let gap = |i: usize, j: usize| {
        let (a, b) = (normals[i], normals[j]);
        ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
    };
    let pairs: Vec<PairSlack> = (0..normals.len())
        .map(|i| {
            let geodesic = s[i] - s[0];
            let normal_change = gap(0, i);
            let bound = lambda_max * geodesic;
            PairSlack { index: i, geodesic, normal_change, bound, slack: bound - normal_change }
        })
        .collect();
    let worst_slack = (0..normals.len())
        .into_par_iter()
        .map(|i| (i + 1..normals.len()).map(|j| lambda_max * (s[j] - s[i]) - gap(i, j)).fold(f64::INFINITY, f64::min))
        .collect::<Vec<_>>()
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    let chained = f.curvature_bound().map(|(beta, c_tilde)| {
        let c_min = reports.iter().map(|r| r.gradient_norm).fold(f64::INFINITY, f64::min);
        let worst =
            reports.iter().map(|r| beta * c_tilde / r.gradient_norm - r.lambda_max).fold(f64::INFINITY, f64::min);
        let bound = beta * c_tilde / c_min;
        ChainedBound {
            beta,
            bound_constant: c_tilde,
            c_min,
            bound,
            worst_pointwise_slack: worst,
            holds: worst >= 0.0 && lambda_max <= bound,
        }
    });
    let worst_slack = if worst_slack.is_finite() { worst_slack } else { 0.0 };
    Ok(Theorem1Report {
        vertices: normals.len(),
        curvatures,
        lambda_max,
        pairs,
        worst_slack,
        tolerance: TOL,
        holds: worst_slack >= -TOL,
        chained,
    })
}
