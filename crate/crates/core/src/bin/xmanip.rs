//! Command-line front end for the experiment runners.
//!
//! Exit codes: 0 success, 1 configuration error, 2 runtime failure. A
//! campaign with failed runs still writes its artifacts, marks
//! `status.json` as partial and exits with 2.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use log::error;
use serde::Serialize;

use xmanip::artifact::{square_side, write_atomic, write_json};
use xmanip::attack::{AttackConfig, Optimizer};
use xmanip::error::Error;
use xmanip::experiment::{
    run_attack_campaign, run_defense_eval, run_geometry_study, CampaignConfig, DataConfig, DefenseConfig,
    ExperimentConfig, GeometryStudyConfig, Prepared,
};
use xmanip::explain::{normalize, pixel_relevance, smooth_explain, Method, Smoothing};
use xmanip::metrics::{report_with, Kind, SsimConfig};
use xmanip::net::{accuracy, save_weights, train, Network};
use xmanip::Activation;

#[derive(Parser)]
#[command(name = "xmanip", version, about = "Explanation manipulation, geometry and smoothing experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the relu classifier and write its weights.
    Train(TrainArgs),
    /// Explain one test image.
    Explain(ExplainArgs),
    /// Run a targeted manipulation campaign.
    Attack(AttackArgs),
    /// Compare attacks on plain, β-smoothed and SmoothGrad explanations.
    Defend(DefendArgs),
    /// Curvature and smoothing checks on the two-input toy network.
    Geometry(GeometryArgs),
    /// Summarise result directories or compare two maps.
    Report(ReportArgs),
}

/// Flags mirroring the experiment configuration. Flags override values read
/// from `--config`.
#[derive(Args, Clone)]
struct Common {
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory holding the four IDX files.
    #[arg(long)]
    data_dir: Option<PathBuf>,
    /// Weights manifest; the network is trained when absent.
    #[arg(long)]
    weights: Option<PathBuf>,
    /// Comma-separated layer sizes, e.g. 784,128,64,10. The last one sets
    /// the number of classes.
    #[arg(long, value_delimiter = ',')]
    layers: Option<Vec<usize>>,
    #[arg(long)]
    method: Option<Method>,
    #[arg(long)]
    ig_steps: Option<usize>,
    #[arg(long)]
    pattern_samples: Option<usize>,
    /// `none`, `beta:<β>` or `smoothgrad:<samples>:<noise level>`.
    #[arg(long)]
    smoothing: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    train_lr: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    train_seed: Option<u64>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct ExplainArgs {
    #[command(flatten)]
    common: Common,
    /// Test-set index of the image.
    #[arg(long, default_value_t = 0)]
    index: usize,
    /// Class to explain; the predicted class by default.
    #[arg(long)]
    class: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct AttackOverrides {
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    weight_h: Option<f64>,
    #[arg(long)]
    weight_g: Option<f64>,
    #[arg(long)]
    weight_x: Option<f64>,
    /// `gd`, `momentum` or `adam`.
    #[arg(long)]
    optimizer: Option<String>,
}

#[derive(Args)]
struct AttackArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    overrides: AttackOverrides,
    #[arg(long)]
    seed: u64,
    /// Use each source image as its own target.
    #[arg(long)]
    self_target: bool,
    /// Skip the per-run heatmaps.
    #[arg(long)]
    no_images: bool,
}

#[derive(Args)]
struct DefendArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    overrides: AttackOverrides,
    #[arg(long)]
    seed: u64,
}

#[derive(Args)]
struct GeometryArgs {
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value = "out/geometry")]
    out: PathBuf,
    /// Monte-Carlo samples per noise check.
    #[arg(long)]
    samples: Option<usize>,
    /// Repeats per sample count in the error-decay fit.
    #[arg(long)]
    repeats: Option<usize>,
    /// Contour predictor step.
    #[arg(long)]
    step: Option<f64>,
    #[arg(long)]
    raster: Option<usize>,
}

#[derive(Args)]
struct ReportArgs {
    /// Result directories to summarise.
    dirs: Vec<PathBuf>,
    /// Two one-row map CSV files to compare.
    #[arg(long, num_args = 2, value_names = ["A", "B"])]
    compare: Option<Vec<PathBuf>>,
    #[arg(long, default_value = "map")]
    kind: String,
}

enum Failure {
    Config(Error),
    Runtime(Error),
}

type Outcome<T> = std::result::Result<T, Failure>;

trait Phase<T> {
    fn config(self) -> Outcome<T>;
    fn runtime(self) -> Outcome<T>;
}

impl<T> Phase<T> for xmanip::error::Result<T> {
    fn config(self) -> Outcome<T> {
        self.map_err(Failure::Config)
    }
    fn runtime(self) -> Outcome<T> {
        self.map_err(Failure::Runtime)
    }
}

fn bad(msg: impl Into<String>) -> Failure {
    Failure::Config(Error::Config(msg.into()))
}

fn parse_smoothing(s: &str, seed: u64) -> Outcome<Smoothing> {
    let parts: Vec<&str> = s.split(':').collect();
    let num = |p: &str| p.parse::<f64>().map_err(|_| bad(format!("bad number {p:?} in --smoothing")));
    let smoothing = match parts.as_slice() {
        ["none"] => Smoothing::None,
        ["beta", b] => Smoothing::Beta { beta: num(b)? },
        ["smoothgrad", n, level] => Smoothing::smoothgrad(num(n)? as usize, num(level)?, seed),
        _ => return Err(bad(format!("unknown smoothing {s:?}"))),
    };
    smoothing.validate().config()?;
    Ok(smoothing)
}

fn parse_optimizer(s: &str) -> Outcome<Optimizer> {
    let default = xmanip::defaults::defaults().optimizer;
    match s {
        "gd" => Ok(Optimizer::Gd),
        "momentum" => Ok(Optimizer::Momentum { momentum: 0.9 }),
        "adam" => Ok(match default {
            a @ Optimizer::Adam { .. } => a,
            _ => Optimizer::Adam { beta1: 0.9, beta2: 0.999, eps: 1e-8 },
        }),
        other => Err(bad(format!("unknown optimizer {other:?}"))),
    }
}

fn build_config(c: &Common, seed: u64) -> Outcome<ExperimentConfig> {
    let mut cfg = match &c.config {
        Some(p) => ExperimentConfig::load(p).config()?,
        None => ExperimentConfig::default(),
    };
    if let Some(d) = &c.data_dir {
        cfg.data = DataConfig { dir: d.clone(), ..cfg.data };
    }
    if let Some(w) = &c.weights {
        cfg.weights = Some(w.clone());
    }
    if let Some(l) = &c.layers {
        cfg.layer_sizes = l.clone();
        if let Some(&k) = l.last() {
            cfg.data.num_classes = k;
        }
    }
    if let Some(m) = c.method {
        cfg.method = m;
    }
    if let Some(n) = c.ig_steps {
        cfg.ig_steps = n;
    }
    if let Some(n) = c.pattern_samples {
        cfg.pattern_samples = n;
    }
    if let Some(s) = &c.smoothing {
        cfg.smoothing = parse_smoothing(s, seed)?;
    }
    if let Some(o) = &c.out {
        cfg.output_dir = o.clone();
    }
    if let Some(e) = c.epochs {
        cfg.training.epochs = e;
    }
    if let Some(lr) = c.train_lr {
        cfg.training.lr = lr;
    }
    if let Some(b) = c.batch_size {
        cfg.training.batch_size = b;
    }
    if let Some(s) = c.train_seed {
        cfg.training.seed = s;
    }
    cfg.seed = seed;
    Ok(cfg)
}

fn apply_overrides(a: &mut AttackConfig, o: &AttackOverrides) -> Outcome<()> {
    if let Some(v) = o.iterations {
        a.iterations = v;
    }
    if let Some(v) = o.lr {
        a.lr = v;
    }
    if let Some(v) = o.weight_h {
        a.weight_h = v;
    }
    if let Some(v) = o.weight_g {
        a.weight_g = v;
    }
    if let Some(v) = o.weight_x {
        a.weight_x = v;
    }
    if let Some(s) = &o.optimizer {
        a.optimizer = parse_optimizer(s)?;
    }
    a.validate().config()
}

#[derive(Serialize)]
struct Status {
    status: &'static str,
    failed_runs: Vec<usize>,
}

/// Writes `status.json` and the timestamped sidecar log; partial runs are
/// reported as runtime failures.
fn finish(out: &Path, command: &str, started: u64, failed_runs: Vec<usize>) -> Outcome<()> {
    let partial = !failed_runs.is_empty();
    let status = Status { status: if partial { "partial" } else { "complete" }, failed_runs: failed_runs.clone() };
    write_json(&out.join("status.json"), &status).runtime()?;
    let ended = unix_now();
    let log = format!("command: {command}\nstarted: {started}\nfinished: {ended}\nstatus: {}\n", status.status);
    write_atomic(&out.join("run.log"), log.as_bytes()).runtime()?;
    if partial {
        return Err(Failure::Runtime(Error::Partial(format!(
            "{} runs failed: {failed_runs:?}; artifacts in {} are partial",
            failed_runs.len(),
            out.display()
        ))));
    }
    Ok(())
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

fn cmd_train(a: TrainArgs) -> Outcome<()> {
    let started = unix_now();
    let cfg = build_config(&a.common, 0)?;
    cfg.validate().config()?;
    let tr = cfg.data.load_train().config()?;
    let te = cfg.data.load_test().config()?;
    let init = Network::random(&cfg.layer_sizes, Activation::Relu, cfg.training.seed).config()?;
    let report = train(&init, &tr, Some(&te), &cfg.training).runtime()?;
    let out = &cfg.output_dir;
    save_weights(&report.network, &out.join("weights.json")).runtime()?;
    #[derive(Serialize)]
    struct TrainSummary<'a> {
        layer_sizes: &'a [usize],
        training: &'a xmanip::net::TrainConfig,
        train_accuracy: f64,
        test_accuracy: f64,
        final_loss: f64,
    }
    let test_accuracy = accuracy(&report.network, &te).runtime()?;
    write_json(
        &out.join("train_report.json"),
        &TrainSummary {
            layer_sizes: &cfg.layer_sizes,
            training: &cfg.training,
            train_accuracy: report.train_accuracy,
            test_accuracy,
            final_loss: report.final_loss,
        },
    )
    .runtime()?;
    println!(
        "train accuracy {:.4}, test accuracy {:.4}; weights in {}",
        report.train_accuracy,
        test_accuracy,
        out.join("weights.json").display()
    );
    finish(out, "train", started, Vec::new())
}

fn cmd_explain(a: ExplainArgs) -> Outcome<()> {
    let started = unix_now();
    let cfg = build_config(&a.common, a.seed)?;
    let p = Prepared::open(cfg).config()?;
    if a.index >= p.test.len() {
        return Err(bad(format!("index {} outside the {} test images", a.index, p.test.len())));
    }
    let x = p.test.input(a.index);
    let class = match a.class {
        Some(c) => c,
        None => p.network.predict(x).runtime()?,
    };
    let spec = p.spec(p.config.method).runtime()?;
    let map = smooth_explain(&p.network, x, class, &spec, &p.config.smoothing).runtime()?;
    let shown = normalize(&pixel_relevance(&map, 1).runtime()?).runtime()?;
    let out = &p.config.output_dir;
    let stem = format!("explain_{}_{:05}", p.config.method, a.index);
    write_json(&out.join(format!("{stem}.json")), &map).runtime()?;
    map.write_csv(&out.join(format!("{stem}.csv"))).runtime()?;
    if let Some(side) = square_side(shown.len()) {
        shown.write_pgm(&out.join(format!("{stem}.pgm")), side, side).runtime()?;
    }
    println!("{} map of class {class} for test image {} in {}", p.config.method, a.index, out.display());
    finish(out, "explain", started, Vec::new())
}

fn cmd_attack(a: AttackArgs) -> Outcome<()> {
    let started = unix_now();
    let mut cfg = build_config(&a.common, a.seed)?;
    if let Some(r) = a.overrides.runs {
        cfg.runs = r;
    }
    let mut attack = cfg.attack_config();
    apply_overrides(&mut attack, &a.overrides)?;
    let p = Prepared::open(cfg).config()?;
    let spec = p.spec(p.config.method).runtime()?;
    let campaign = CampaignConfig {
        self_target: a.self_target,
        write_images: !a.no_images,
        percentiles: p.config.percentiles.clone(),
        ..CampaignConfig::new(p.config.runs, p.config.seed)
    };
    let out = &p.config.output_dir;
    write_json(&out.join("config.json"), &p.config).runtime()?;
    let (summary, _) = run_attack_campaign(&p.network, &p.test, &spec, &attack, &campaign, out).runtime()?;
    println!(
        "{}: {}/{} runs, median map PCC {:?}, class preserved {}",
        summary.method,
        summary.completed,
        summary.runs,
        summary.median("map_pcc"),
        summary.class_preserved
    );
    finish(out, "attack", started, summary.failed.iter().map(|f| f.run).collect())
}

fn cmd_defend(a: DefendArgs) -> Outcome<()> {
    let started = unix_now();
    let mut cfg = build_config(&a.common, a.seed)?;
    if let Some(r) = a.overrides.runs {
        cfg.runs = r;
    }
    let mut defense = DefenseConfig::for_method(cfg.method, cfg.runs, cfg.seed);
    defense.percentiles = cfg.percentiles.clone();
    for (_, attack) in &mut defense.arms {
        apply_overrides(attack, &a.overrides)?;
    }
    let p = Prepared::open(cfg).config()?;
    let spec = p.spec(p.config.method).runtime()?;
    let out = &p.config.output_dir;
    write_json(&out.join("config.json"), &p.config).runtime()?;
    let (summary, _) = run_defense_eval(&p.network, &p.test, &spec, &defense, out).runtime()?;
    for arm in &summary.arms {
        println!("{:?}: median target PCC {:?}", arm.arm, arm.median_target_pcc);
    }
    println!("median recovery curve monotone: {}", summary.median_curve_monotone);
    finish(out, "defend", started, summary.failed_runs.clone())
}

fn cmd_geometry(a: GeometryArgs) -> Outcome<()> {
    let started = unix_now();
    let mut cfg = GeometryStudyConfig::new(a.seed);
    if let Some(v) = a.samples {
        cfg.theorem2_samples = v;
    }
    if let Some(v) = a.repeats {
        cfg.decay_repeats = v;
    }
    if let Some(v) = a.step {
        cfg.step = v;
    }
    if let Some(v) = a.raster {
        cfg.raster = v;
    }
    let summary = run_geometry_study(&cfg, &a.out).map_err(|e| match e {
        Error::Config(_) => Failure::Config(e),
        other => Failure::Runtime(other),
    })?;
    println!(
        "min slack {:.3e}, bound holds {}, chained bound holds {}, theorem-2 max rel. error {:.3e} (iid) / {:.3e} (along w)",
        summary.min_slack,
        summary.theorem1_holds,
        summary.chained_holds,
        summary.theorem2_iid.max_relative_error,
        summary.theorem2_along_weight.max_relative_error
    );
    finish(&a.out, "geometry", started, Vec::new())
}

fn read_csv_row(path: &Path) -> Outcome<Vec<f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Config(e.into()))?;
    text.trim()
        .split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|_| bad(format!("bad value {v:?} in {}", path.display()))))
        .collect()
}

fn cmd_report(a: ReportArgs) -> Outcome<()> {
    if let Some(files) = &a.compare {
        let (x, y) = (read_csv_row(&files[0])?, read_csv_row(&files[1])?);
        let kind = match a.kind.as_str() {
            "map" => Kind::Map,
            "image" => Kind::Image,
            other => return Err(bad(format!("unknown kind {other:?}"))),
        };
        let width = square_side(x.len()).unwrap_or(x.len());
        let r = report_with(&x, &y, kind, width, &SsimConfig::default()).runtime()?;
        println!("{}", serde_json::to_string_pretty(&r).map_err(|e| Failure::Runtime(e.into()))?);
    }
    for dir in &a.dirs {
        let mut found = false;
        for name in
            ["train_report.json", "summary.json", "defense_summary.json", "geometry_summary.json", "status.json"]
        {
            let path = dir.join(name);
            if path.is_file() {
                found = true;
                let v: serde_json::Value =
                    serde_json::from_str(&std::fs::read_to_string(&path).map_err(|e| Failure::Config(e.into()))?)
                        .map_err(|e| Failure::Config(e.into()))?;
                println!("== {}", path.display());
                print_digest(&v);
            }
        }
        if !found {
            return Err(bad(format!("no result files in {}", dir.display())));
        }
    }
    Ok(())
}

/// Top-level scalars, and the median of every metric summary.
fn print_digest(v: &serde_json::Value) {
    let Some(obj) = v.as_object() else { return };
    for (k, val) in obj {
        match val {
            serde_json::Value::Array(items) if items.iter().all(|i| i.get("median").is_some()) && !items.is_empty() => {
                for i in items {
                    let name = i
                        .get("name")
                        .or_else(|| i.get("arm"))
                        .map(|n| n.as_str().map_or_else(|| n.to_string(), String::from))
                        .unwrap_or_default();
                    println!("  {k}.{name}: median {}", i["median"]);
                }
            }
            serde_json::Value::Array(_) | serde_json::Value::Object(_) => {}
            other => println!("  {k}: {other}"),
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    // Usage errors are configuration errors (exit 1), not clap's default 2.
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Explain(a) => cmd_explain(a),
        Command::Attack(a) => cmd_attack(a),
        Command::Defend(a) => cmd_defend(a),
        Command::Geometry(a) => cmd_geometry(a),
        Command::Report(a) => cmd_report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            error!("configuration error: {e}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            error!("{e}");
            ExitCode::from(2)
        }
    }
}
