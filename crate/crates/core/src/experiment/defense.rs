use std::path::Path;

use log::{info, warn};
use rayon::prelude::*;
use serde::Serialize;

use super::campaign::{comparison_map, summarize_results};
use super::{check_percentiles, median, sample_pairs, MetricSummary};
use crate::artifact::{write_atomic, write_json};
use crate::attack::{manipulate, Arm, AttackConfig, AttackResult};
use crate::defaults::defaults;
use crate::error::{Error, Result};
use crate::explain::{Method, MethodSpec, Smoothing};
use crate::metrics::pcc;
use crate::net::{Dataset, Network};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DefenseConfig {
    pub runs: usize,
    pub seed: u64,
    pub percentiles: Vec<f64>,
    /// Attack settings per arm, each attacking its own explanation.
    pub arms: Vec<(Arm, AttackConfig)>,
    /// β sweep for the recovery curves, largest first.
    pub recovery_betas: Vec<f64>,
}

impl DefenseConfig {
    /// Plain, β-smoothed and SmoothGrad arms with the tabulated defaults.
    pub fn for_method(method: Method, runs: usize, seed: u64) -> Self {
        let d = defaults();
        Self {
            runs,
            seed,
            percentiles: d.percentiles.clone(),
            arms: [Arm::Plain, Arm::BetaSmoothing, Arm::SmoothGrad]
                .into_iter()
                .map(|arm| {
                    let mut cfg = AttackConfig::for_arm(method, arm);
                    cfg.seed = seed;
                    if let Smoothing::SmoothGrad { seed: s, .. } = &mut cfg.smoothing {
                        *s = seed;
                    }
                    (arm, cfg)
                })
                .collect(),
            recovery_betas: d.defense.recovery_betas.clone(),
        }
    }

    /// Applies `f` to every arm's attack settings.
    pub fn map_attacks(mut self, f: impl Fn(&mut AttackConfig)) -> Self {
        self.arms.iter_mut().for_each(|(_, c)| f(c));
        self
    }

    fn validate(&self) -> Result<()> {
        check_percentiles(&self.percentiles)?;
        if !self.arms.iter().any(|(a, _)| *a == Arm::Plain) {
            return Err(Error::Config("defense evaluation needs a plain arm".into()));
        }
        for (_, c) in &self.arms {
            c.validate()?;
        }
        for &b in &self.recovery_betas {
            Smoothing::Beta { beta: b }.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArmOutcome {
    pub arm: Arm,
    pub error: Option<String>,
    pub result: Option<AttackResult>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RecoveryPoint {
    pub beta: f64,
    /// β-smoothed map of the manipulated image against the relu map of the
    /// original image.
    pub pcc_to_original: f64,
    pub pcc_to_target: f64,
    /// β-smoothed maps of the manipulated and original images at the same β.
    pub pcc_to_original_same_beta: f64,
    /// β-smoothed map of the original image against its relu map.
    pub unmanipulated_pcc_to_original: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DefenseRun {
    pub run: usize,
    pub source: usize,
    pub target: usize,
    pub class: Option<usize>,
    pub arms: Vec<ArmOutcome>,
    pub recovery: Vec<RecoveryPoint>,
    pub recovery_error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArmSummary {
    pub arm: Arm,
    pub completed: usize,
    pub median_target_pcc: Option<f64>,
    pub metrics: Vec<MetricSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DefenseSummary {
    pub method: Method,
    pub seed: u64,
    pub runs: usize,
    pub failed_runs: Vec<usize>,
    pub arms: Vec<ArmSummary>,
    /// Smoothed arm median target PCC strictly below the plain one.
    pub below_plain: Vec<(Arm, bool)>,
    pub recovery_betas: Vec<f64>,
    /// Per-β medians over runs of `pcc_to_original`.
    pub median_recovery: Vec<Option<f64>>,
    pub median_unmanipulated: Vec<Option<f64>>,
    pub median_same_beta: Vec<Option<f64>>,
    /// The median recovery curve rises as β falls, with at most one
    /// inversion.
    pub median_curve_monotone: bool,
    /// Runs whose own curve rises with at most one inversion.
    pub monotone_runs: usize,
    pub recovery_runs: usize,
    pub defaults_version: u32,
}

impl DefenseSummary {
    pub fn arm(&self, arm: Arm) -> Option<&ArmSummary> {
        self.arms.iter().find(|a| a.arm == arm)
    }
}

/// Number of steps along `curve` that go down.
pub fn inversions(curve: &[f64]) -> usize {
    curve.windows(2).filter(|w| w[1] < w[0]).count()
}

#[allow(clippy::too_many_arguments)]
fn recovery_curve(
    net: &Network,
    x: &[f64],
    x_adv: &[f64],
    class: usize,
    target_map: &[f64],
    spec: &MethodSpec,
    plain: &AttackConfig,
    betas: &[f64],
) -> Result<Vec<RecoveryPoint>> {
    let original = comparison_map(net, x, class, spec, plain)?;
    betas
        .iter()
        .map(|&beta| {
            let smoothed = AttackConfig { smoothing: Smoothing::Beta { beta }, ..plain.clone() };
            let adv = comparison_map(net, x_adv, class, spec, &smoothed)?;
            let clean = comparison_map(net, x, class, spec, &smoothed)?;
            Ok(RecoveryPoint {
                beta,
                pcc_to_original: pcc(adv.values(), original.values())?,
                pcc_to_target: pcc(adv.values(), target_map)?,
                pcc_to_original_same_beta: pcc(adv.values(), clean.values())?,
                unmanipulated_pcc_to_original: pcc(clean.values(), original.values())?,
            })
        })
        .collect()
}

fn run_one(
    net: &Network,
    data: &Dataset,
    spec: &MethodSpec,
    cfg: &DefenseConfig,
    run: usize,
    (source, target): (usize, usize),
) -> DefenseRun {
    let x = data.input(source);
    let mut out =
        DefenseRun { run, source, target, class: None, arms: Vec::new(), recovery: Vec::new(), recovery_error: None };
    let class = match net.predict(x) {
        Ok(c) => c,
        Err(e) => {
            out.recovery_error = Some(e.to_string());
            return out;
        }
    };
    out.class = Some(class);
    let plain = cfg.arms.iter().find(|(a, _)| *a == Arm::Plain).map(|(_, c)| c).expect("validated");
    // Every arm chases the same unsmoothed target map.
    let target_map = match comparison_map(net, data.input(target), class, spec, plain) {
        Ok(t) => t,
        Err(e) => {
            out.recovery_error = Some(e.to_string());
            return out;
        }
    };
    for (arm, attack) in &cfg.arms {
        let outcome = manipulate(net, x, &target_map, class, spec, attack);
        if let Err(e) = &outcome {
            warn!("run {run} arm {arm:?} failed: {e}");
        }
        out.arms.push(ArmOutcome {
            arm: *arm,
            error: outcome.as_ref().err().map(|e| e.to_string()),
            result: outcome.ok(),
        });
    }
    let plain_result = out.arms.iter().find(|a| a.arm == Arm::Plain).and_then(|a| a.result.as_ref());
    if let Some(r) = plain_result {
        match recovery_curve(net, x, &r.x_adv, class, target_map.values(), spec, plain, &cfg.recovery_betas) {
            Ok(c) => out.recovery = c,
            Err(e) => out.recovery_error = Some(e.to_string()),
        }
    }
    out
}

fn scatter_csv(runs: &[DefenseRun], arms: &[Arm]) -> String {
    let mut s = String::from("run,source,target");
    for a in arms {
        s.push_str(&format!(",{}_target_pcc", arm_name(*a)));
    }
    s.push('\n');
    for r in runs {
        s.push_str(&format!("{},{},{}", r.run, r.source, r.target));
        for a in arms {
            let v = r
                .arms
                .iter()
                .find(|o| o.arm == *a)
                .and_then(|o| o.result.as_ref())
                .map(|res| format!("{:e}", res.final_map_similarity.pcc));
            s.push(',');
            s.push_str(v.as_deref().unwrap_or(""));
        }
        s.push('\n');
    }
    s
}

fn recovery_csv(runs: &[DefenseRun]) -> String {
    let mut s = String::from(
        "run,beta,pcc_to_original,pcc_to_target,pcc_to_original_same_beta,unmanipulated_pcc_to_original\n",
    );
    for r in runs {
        for p in &r.recovery {
            s.push_str(&format!(
                "{},{},{:e},{:e},{:e},{:e}\n",
                r.run,
                p.beta,
                p.pcc_to_original,
                p.pcc_to_target,
                p.pcc_to_original_same_beta,
                p.unmanipulated_pcc_to_original
            ));
        }
    }
    s
}

pub fn arm_name(arm: Arm) -> &'static str {
    match arm {
        Arm::Plain => "plain",
        Arm::BetaSmoothing => "beta_smoothing",
        Arm::SmoothGrad => "smoothgrad",
    }
}

/// Attacks each test-image pair once per arm, then sweeps β on the plain
/// arm's manipulated image. Writes `defense_runs.json`, `scatter.csv`,
/// `recovery.csv` and `defense_summary.json` under `out`.
pub fn run_defense_eval(
    net: &Network,
    data: &Dataset,
    spec: &MethodSpec,
    cfg: &DefenseConfig,
    out: &Path,
) -> Result<(DefenseSummary, Vec<DefenseRun>)> {
    cfg.validate()?;
    let pairs = sample_pairs(data.len(), cfg.runs, cfg.seed)?;
    info!("{} defense evaluation: {} runs, seed {}", spec.kind, cfg.runs, cfg.seed);
    let runs: Vec<DefenseRun> =
        pairs.par_iter().enumerate().map(|(run, &pair)| run_one(net, data, spec, cfg, run, pair)).collect();

    let arm_list: Vec<Arm> = cfg.arms.iter().map(|(a, _)| *a).collect();
    let arms: Vec<ArmSummary> = arm_list
        .iter()
        .map(|&arm| {
            let done: Vec<&AttackResult> = runs
                .iter()
                .filter_map(|r| r.arms.iter().find(|o| o.arm == arm).and_then(|o| o.result.as_ref()))
                .collect();
            let pccs: Vec<f64> = done.iter().map(|r| r.final_map_similarity.pcc).collect();
            ArmSummary {
                arm,
                completed: done.len(),
                median_target_pcc: median(&pccs),
                metrics: summarize_results(&done, &cfg.percentiles),
            }
        })
        .collect();
    let plain_median = arms.iter().find(|a| a.arm == Arm::Plain).and_then(|a| a.median_target_pcc);
    let below_plain = arms
        .iter()
        .filter(|a| a.arm != Arm::Plain)
        .map(|a| {
            let below = matches!((a.median_target_pcc, plain_median), (Some(s), Some(p)) if s < p);
            (a.arm, below)
        })
        .collect();

    let curves: Vec<&DefenseRun> = runs.iter().filter(|r| r.recovery.len() == cfg.recovery_betas.len()).collect();
    let column =
        |i: usize, f: fn(&RecoveryPoint) -> f64| median(&curves.iter().map(|r| f(&r.recovery[i])).collect::<Vec<_>>());
    let median_recovery: Vec<Option<f64>> =
        (0..cfg.recovery_betas.len()).map(|i| column(i, |p| p.pcc_to_original)).collect();
    let median_unmanipulated =
        (0..cfg.recovery_betas.len()).map(|i| column(i, |p| p.unmanipulated_pcc_to_original)).collect();
    let median_same_beta = (0..cfg.recovery_betas.len()).map(|i| column(i, |p| p.pcc_to_original_same_beta)).collect();
    let median_curve_monotone = !curves.is_empty() && {
        let m: Vec<f64> = median_recovery.iter().map(|v| v.unwrap_or(f64::NAN)).collect();
        m.iter().all(|v| v.is_finite()) && inversions(&m) <= 1
    };
    let monotone_runs = curves
        .iter()
        .filter(|r| inversions(&r.recovery.iter().map(|p| p.pcc_to_original).collect::<Vec<_>>()) <= 1)
        .count();

    let failed_runs = runs
        .iter()
        .filter(|r| r.class.is_none() || r.arms.iter().any(|a| a.error.is_some()) || r.recovery_error.is_some())
        .map(|r| r.run)
        .collect();
    let summary = DefenseSummary {
        method: spec.kind,
        seed: cfg.seed,
        runs: cfg.runs,
        failed_runs,
        arms,
        below_plain,
        recovery_betas: cfg.recovery_betas.clone(),
        median_recovery,
        median_unmanipulated,
        median_same_beta,
        median_curve_monotone,
        monotone_runs,
        recovery_runs: curves.len(),
        defaults_version: defaults().version,
    };
    write_json(&out.join("defense_runs.json"), &runs)?;
    write_atomic(&out.join("scatter.csv"), scatter_csv(&runs, &arm_list).as_bytes())?;
    write_atomic(&out.join("recovery.csv"), recovery_csv(&runs).as_bytes())?;
    write_json(&out.join("defense_summary.json"), &summary)?;
    Ok((summary, runs))
}
