use std::path::Path;

use log::{info, warn};
use rayon::prelude::*;
use serde::Serialize;

use super::{check_percentiles, metrics_csv, sample_pairs, MetricSummary};
use crate::artifact::{square_side, write_atomic, write_json, write_pgm};
use crate::attack::{manipulate, AttackConfig, AttackResult};
use crate::defaults::defaults;
use crate::error::Result;
use crate::explain::{normalize, pixel_relevance, smooth_explain, ExplanationMap, Method, MethodSpec};
use crate::net::{Dataset, Network};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CampaignConfig {
    pub runs: usize,
    pub seed: u64,
    pub percentiles: Vec<f64>,
    /// Use the source image as its own target.
    pub self_target: bool,
    /// Per-run PGM heatmaps next to the run JSON.
    pub write_images: bool,
}

impl CampaignConfig {
    pub fn new(runs: usize, seed: u64) -> Self {
        Self { runs, seed, percentiles: defaults().percentiles.clone(), self_target: false, write_images: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub run: usize,
    pub source: usize,
    pub target: usize,
    /// Predicted class of the source image. Both the attacked map and the
    /// target map explain this class.
    pub class: Option<usize>,
    pub error: Option<String>,
    pub result: Option<AttackResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CampaignSummary {
    pub method: Method,
    pub seed: u64,
    pub runs: usize,
    pub completed: usize,
    pub failed: Vec<RunFailure>,
    pub class_preserved: usize,
    pub metrics: Vec<MetricSummary>,
    pub attack: AttackConfig,
    pub defaults_version: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunFailure {
    pub run: usize,
    pub error: String,
}

impl CampaignSummary {
    pub fn metric(&self, name: &str) -> Option<&MetricSummary> {
        self.metrics.iter().find(|m| m.name == name)
    }

    pub fn median(&self, name: &str) -> Option<f64> {
        self.metric(name).and_then(|m| m.median)
    }
}

/// Normalised map of `class` at `x` under the smoothing in `cfg`, the same
/// transform the attack compares against.
pub(crate) fn comparison_map(
    net: &Network,
    x: &[f64],
    class: usize,
    spec: &MethodSpec,
    cfg: &AttackConfig,
) -> Result<ExplanationMap> {
    let raw = smooth_explain(net, x, class, spec, &cfg.smoothing)?;
    normalize(&pixel_relevance(&raw, cfg.channels)?)
}

struct Outcome {
    record: RunRecord,
    maps: Option<[ExplanationMap; 2]>,
}

fn run_one(
    net: &Network,
    data: &Dataset,
    spec: &MethodSpec,
    cfg: &AttackConfig,
    run: usize,
    (source, target): (usize, usize),
) -> Outcome {
    let mut record = RunRecord { run, source, target, class: None, error: None, result: None };
    let attempt = || -> Result<(usize, AttackResult, [ExplanationMap; 2])> {
        let x = data.input(source);
        let class = net.predict(x)?;
        let target_map = comparison_map(net, data.input(target), class, spec, cfg)?;
        let original_map = comparison_map(net, x, class, spec, cfg)?;
        let result = manipulate(net, x, &target_map, class, spec, cfg)?;
        Ok((class, result, [original_map, target_map]))
    };
    match attempt() {
        Ok((class, result, maps)) => {
            record.class = Some(class);
            record.result = Some(result);
            Outcome { record, maps: Some(maps) }
        }
        Err(e) => {
            warn!("run {run} ({source} -> {target}) failed: {e}");
            record.error = Some(e.to_string());
            Outcome { record, maps: None }
        }
    }
}

pub(crate) fn summarize_results(results: &[&AttackResult], ps: &[f64]) -> Vec<MetricSummary> {
    let col = |f: &dyn Fn(&AttackResult) -> f64| results.iter().map(|r| f(r)).collect::<Vec<_>>();
    let columns: [(&str, Vec<f64>); 10] = [
        ("map_pcc", col(&|r| r.final_map_similarity.pcc)),
        ("map_ssim", col(&|r| r.final_map_similarity.ssim)),
        ("map_mse", col(&|r| r.final_map_similarity.mse)),
        ("initial_map_pcc", col(&|r| r.initial_map_similarity.pcc)),
        ("image_pcc", col(&|r| r.image_similarity.pcc)),
        ("image_ssim", col(&|r| r.image_similarity.ssim)),
        ("image_mse", col(&|r| r.image_similarity.mse)),
        ("output_delta_logits", col(&|r| r.output_delta_logits)),
        ("output_delta_softmax", col(&|r| r.output_delta_softmax)),
        ("final_loss", col(&|r| r.loss_trace.last().copied().unwrap_or(f64::NAN))),
    ];
    columns.iter().map(|(name, values)| MetricSummary::new(name, values, ps)).collect()
}

fn write_run_images(
    dir: &Path,
    run: usize,
    x: &[f64],
    result: &AttackResult,
    maps: &[ExplanationMap; 2],
    manipulated: &ExplanationMap,
) -> Result<()> {
    let Some(side) = square_side(x.len()) else {
        return Ok(());
    };
    let delta: Vec<f64> = result.x_adv.iter().zip(x).map(|(a, b)| a - b).collect();
    write_pgm(&dir.join(format!("run_{run:04}_original_map.pgm")), maps[0].values(), side, side)?;
    write_pgm(&dir.join(format!("run_{run:04}_target_map.pgm")), maps[1].values(), side, side)?;
    write_pgm(&dir.join(format!("run_{run:04}_manipulated_map.pgm")), manipulated.values(), side, side)?;
    write_pgm(&dir.join(format!("run_{run:04}_delta.pgm")), &delta, side, side)
}

/// Runs `cfg.runs` manipulations on disjoint test-image pairs and writes
/// `runs/run_NNNN.json`, heatmaps, `summary.json` and `aggregate.csv` under
/// `out`. Failed runs are recorded, not fatal.
pub fn run_attack_campaign(
    net: &Network,
    data: &Dataset,
    spec: &MethodSpec,
    attack: &AttackConfig,
    cfg: &CampaignConfig,
    out: &Path,
) -> Result<(CampaignSummary, Vec<RunRecord>)> {
    attack.validate()?;
    check_percentiles(&cfg.percentiles)?;
    let pairs: Vec<(usize, usize)> = if cfg.self_target {
        sample_pairs(data.len(), cfg.runs, cfg.seed)?.into_iter().map(|(s, _)| (s, s)).collect()
    } else {
        sample_pairs(data.len(), cfg.runs, cfg.seed)?
    };
    info!("{} campaign: {} runs, seed {}", spec.kind, cfg.runs, cfg.seed);
    let outcomes: Vec<Outcome> =
        pairs.par_iter().enumerate().map(|(run, &pair)| run_one(net, data, spec, attack, run, pair)).collect();

    let runs_dir = out.join("runs");
    for o in &outcomes {
        let r = &o.record;
        write_json(&runs_dir.join(format!("run_{:04}.json", r.run)), r)?;
        if let (true, Some(result), Some(maps)) = (cfg.write_images, &r.result, &o.maps) {
            let manipulated = comparison_map(net, &result.x_adv, result.class, spec, attack)?;
            write_run_images(&runs_dir, r.run, data.input(r.source), result, maps, &manipulated)?;
        }
    }

    let done: Vec<&AttackResult> = outcomes.iter().filter_map(|o| o.record.result.as_ref()).collect();
    let summary = CampaignSummary {
        method: spec.kind,
        seed: cfg.seed,
        runs: cfg.runs,
        completed: done.len(),
        failed: outcomes
            .iter()
            .filter_map(|o| o.record.error.as_ref().map(|e| RunFailure { run: o.record.run, error: e.clone() }))
            .collect(),
        class_preserved: done.iter().filter(|r| r.class_preserved).count(),
        metrics: summarize_results(&done, &cfg.percentiles),
        attack: attack.clone(),
        defaults_version: defaults().version,
    };
    write_json(&out.join("summary.json"), &summary)?;
    write_atomic(&out.join("aggregate.csv"), metrics_csv(&summary.metrics, &cfg.percentiles).as_bytes())?;
    Ok((summary, outcomes.into_iter().map(|o| o.record).collect()))
}
