//! The `chansr` command line: `generate`, `train`, `evaluate` and `ablate`,
//! each driven by an optional JSON [`RunConfig`] plus flag overrides.
//!
//! Exit codes: 0 success, 1 usage error, 2 runtime error, 3 a configured
//! threshold was violated.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::dataset::{
    load_dataset, manifest_for, save_dataset, synthesize_maps, Channel, ChannelMap, Dataset, SplitTag, SynthesisSpec,
};
use crate::error::{Error, Result};
use crate::eval::{
    bilinear_baseline_set, emit_report, format_ablation, format_table, run_ablation, write_curves, AblationTable,
    AblationVariant, MetricsReport,
};
use crate::model::{load_checkpoint, load_checkpoint_for, save_checkpoint, Task};
use crate::scene::{los_census, MIN_GRID};
use crate::train::{
    evaluate_prepared, finetune_stage, prepare, pretrain_stage, StageData, TrainConfig, TrainLog,
};

pub const EXIT_OK: u8 = 0;
pub const EXIT_USAGE: u8 = 1;
pub const EXIT_RUNTIME: u8 = 2;
pub const EXIT_THRESHOLD: u8 = 3;

/// Environment variable capping worker threads.
pub const THREADS_ENV: &str = "CHANSR_THREADS";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub scales: Vec<usize>,
    /// Checkpoint to score at every scale. When unset, each scale uses the
    /// fine-tuned checkpoint that `train` wrote for that scale.
    pub checkpoint: Option<PathBuf>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            scales: vec![2, 4, 8],
            checkpoint: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AblationConfig {
    pub variants: Vec<AblationVariant>,
    pub seeds: Vec<u64>,
}

impl Default for AblationConfig {
    fn default() -> Self {
        Self {
            variants: AblationVariant::ALL.to_vec(),
            seeds: vec![1, 2, 3],
        }
    }
}

/// Acceptance thresholds; unset entries are not checked.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Thresholds {
    /// Upper bound on model PL MAE divided by baseline PL MAE, per scale.
    pub max_pl_mae_ratio: Option<f64>,
    /// Require model LOS/NLOS accuracy at or above the baseline's.
    pub accuracy_at_least_baseline: Option<bool>,
    /// Require STL >= MTL >= MTL+RES on median PL MAE, each comparison
    /// allowed to miss by this relative tolerance.
    pub ablation_order_tolerance: Option<f64>,
}

/// Every knob of every subcommand. Unknown keys are rejected.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub dataset_dir: PathBuf,
    pub output_dir: PathBuf,
    pub synthesis: SynthesisSpec,
    pub train: TrainConfig,
    pub eval: EvalConfig,
    pub ablation: AblationConfig,
    pub thresholds: Thresholds,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dataset_dir: PathBuf::from("data"),
            output_dir: PathBuf::from("runs"),
            synthesis: SynthesisSpec::default(),
            train: TrainConfig::default(),
            eval: EvalConfig::default(),
            ablation: AblationConfig::default(),
            thresholds: Thresholds::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        serde_json::from_str(&std::fs::read_to_string(path)?).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
    }

    pub fn write_resolved(&self, dir: &Path) -> Result<PathBuf> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join("resolved_config.json");
        std::fs::write(&path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(path)
    }

    /// `key = default` lines for every leaf of the default config.
    pub fn documented_keys() -> String {
        let mut lines = Vec::new();
        flatten_json("", &serde_json::to_value(Self::default()).expect("serializes"), &mut lines);
        lines.join("\n")
    }
}

fn flatten_json(prefix: &str, v: &serde_json::Value, out: &mut Vec<String>) {
    match v {
        serde_json::Value::Object(map) if !map.is_empty() => {
            for (k, child) in map {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten_json(&key, child, out);
            }
        }
        other => out.push(format!("  {prefix} = {other}")),
    }
}

#[derive(Debug, Parser)]
#[command(name = "chansr", version, about = "Super-resolution of wireless channel-characteristic maps")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthesize scenes and write a dataset.
    Generate(GenerateArgs),
    /// Pre-train then fine-tune on a dataset.
    Train(TrainArgs),
    /// Score checkpoints and the bilinear baseline.
    Evaluate(EvaluateArgs),
    /// Train and score the ablation variants.
    Ablate(AblateArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// JSON run configuration; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Dataset directory.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub scenes: Option<usize>,
    /// Grid size, `N` or `HxW`.
    #[arg(long)]
    pub grid: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub split_ratio: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum StageArg {
    Both,
    Pretrain,
    Finetune,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub scale: Option<usize>,
    /// Epochs per stage, `PRETRAIN,FINETUNE`.
    #[arg(long)]
    pub epochs: Option<String>,
    #[arg(long)]
    pub lr: Option<f64>,
    /// Sets both the initialization and the shuffle seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Train on the six-fold augmented training split.
    #[arg(long)]
    pub augment: bool,
    /// Comma-separated tasks, e.g. `PL` or `PL,Rp,DS,phi,theta,LOS`.
    #[arg(long)]
    pub tasks: Option<String>,
    #[arg(long, value_enum, default_value = "both")]
    pub stage: StageArg,
    /// Pre-trained checkpoint to fine-tune from (with `--stage finetune`).
    #[arg(long)]
    pub from: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Comma-separated scale factors.
    #[arg(long)]
    pub scale: Option<String>,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Comma-separated variants among STL, MTL, MTL+RES, MTL+RES+DA.
    #[arg(long)]
    pub variants: Option<String>,
    #[arg(long)]
    pub seeds: Option<String>,
    #[arg(long)]
    pub epochs: Option<String>,
    #[arg(long)]
    pub scale: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
}

/// Failure classes mapped onto exit codes.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(Error),
    Threshold(Vec<String>),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Runtime(e)
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Runtime(_) => EXIT_RUNTIME,
            CliError::Threshold(_) => EXIT_THRESHOLD,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Runtime(e) => write!(f, "error: {e}"),
            CliError::Threshold(v) => write!(f, "threshold violated: {}", v.join("; ")),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> CliResult<Vec<T>> {
    s.split(',')
        .map(|p| p.trim().parse().map_err(|_| usage(format!("bad {what} {p:?}"))))
        .collect()
}

fn parse_epochs(s: &str) -> CliResult<(usize, usize)> {
    match parse_list::<usize>(s, "epoch count")?.as_slice() {
        [a] => Ok((*a, *a)),
        [a, b] => Ok((*a, *b)),
        _ => Err(usage("--epochs takes PRETRAIN,FINETUNE")),
    }
}

fn parse_grid(s: &str) -> CliResult<(usize, usize)> {
    let parts: Vec<&str> = s.split(['x', 'X']).collect();
    let nums: Vec<usize> = parts
        .iter()
        .map(|p| p.trim().parse().map_err(|_| usage(format!("bad grid {s:?}"))))
        .collect::<CliResult<_>>()?;
    match nums.as_slice() {
        [n] => Ok((*n, *n)),
        [h, w] => Ok((*h, *w)),
        _ => Err(usage(format!("bad grid {s:?}"))),
    }
}

fn base_config(common: &CommonArgs) -> CliResult<RunConfig> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p).map_err(|e| match e {
            Error::Parse(m) => usage(m),
            other => CliError::Runtime(other),
        })?,
        None => RunConfig::default(),
    };
    if let Some(d) = &common.data {
        cfg.dataset_dir = d.clone();
    }
    if let Some(o) = &common.out {
        cfg.output_dir = o.clone();
    }
    Ok(cfg)
}

/// Builds the global thread pool from `CHANSR_THREADS`, if set.
pub fn init_threads() -> CliResult<()> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| usage(format!("{THREADS_ENV} must be a positive integer, got {v:?}")))?;
        // A pool may already exist when the CLI runs in-process more than once.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

fn command() -> clap::Command {
    let keys = format!("Config keys and defaults:\n{}", RunConfig::documented_keys());
    let mut cmd = Cli::command();
    for name in ["generate", "train", "evaluate", "ablate"] {
        let k = keys.clone();
        cmd = cmd.mut_subcommand(name, move |s| s.after_help(k));
    }
    cmd
}

/// Parses `args` (including the program name) and runs the subcommand.
/// Returns the process exit code.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let matches = match command().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return EXIT_USAGE;
        }
    };
    match init_threads().and_then(|_| dispatch(cli.command)) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}

fn dispatch(cmd: Command) -> CliResult<()> {
    match cmd {
        Command::Generate(a) => cmd_generate(&resolve_generate(&a)?).map(|_| ()),
        Command::Train(a) => {
            let cfg = resolve_train(&a)?;
            cmd_train(&cfg, a.stage, a.from.as_deref()).map(|_| ())
        }
        Command::Evaluate(a) => {
            let cfg = resolve_evaluate(&a)?;
            let reports = cmd_evaluate(&cfg)?;
            check_eval_thresholds(&cfg.thresholds, &reports)
        }
        Command::Ablate(a) => {
            let cfg = resolve_ablate(&a)?;
            let table = cmd_ablate(&cfg)?;
            check_ablation_thresholds(&cfg.thresholds, &table)
        }
    }
}

pub fn resolve_generate(a: &GenerateArgs) -> CliResult<RunConfig> {
    let mut cfg = base_config(&a.common)?;
    let s = &mut cfg.synthesis;
    if let Some(n) = a.scenes {
        s.scenes = n;
    }
    if let Some(g) = &a.grid {
        (s.grid_h, s.grid_w) = parse_grid(g)?;
    }
    if let Some(seed) = a.seed {
        s.seed = seed;
        s.split_seed = seed;
    }
    if let Some(r) = a.split_ratio {
        s.split_ratio = r;
    }
    if s.scenes < 2 {
        return Err(usage("--scenes must be at least 2 so both splits are non-empty"));
    }
    if s.grid_h < MIN_GRID || s.grid_w < MIN_GRID {
        return Err(usage(format!("grid dimensions must be at least {MIN_GRID}")));
    }
    if !(s.split_ratio > 0.0 && s.split_ratio < 1.0) {
        return Err(usage("split ratio must lie strictly between 0 and 1"));
    }
    Ok(cfg)
}

fn apply_train_overrides(
    t: &mut TrainConfig,
    scale: Option<usize>,
    epochs: Option<&str>,
    lr: Option<f64>,
) -> CliResult<()> {
    if let Some(s) = scale {
        t.scale = s;
    }
    if let Some(e) = epochs {
        (t.pretrain_epochs, t.finetune_epochs) = parse_epochs(e)?;
    }
    if let Some(lr) = lr {
        t.learning_rate = lr;
    }
    t.validate().map_err(|e| usage(e.to_string()))
}

pub fn resolve_train(a: &TrainArgs) -> CliResult<RunConfig> {
    let mut cfg = base_config(&a.common)?;
    let t = &mut cfg.train;
    if let Some(seed) = a.seed {
        t.init_seed = seed;
        t.shuffle_seed = seed;
    }
    if a.augment {
        t.augment = true;
    }
    if let Some(list) = &a.tasks {
        t.tasks = list
            .split(',')
            .map(|s| Task::parse(s.trim()).map_err(|e| usage(e.to_string())))
            .collect::<CliResult<_>>()?;
    }
    apply_train_overrides(t, a.scale, a.epochs.as_deref(), a.lr)?;
    if a.stage == StageArg::Finetune && a.from.is_none() {
        return Err(usage("--stage finetune needs --from <checkpoint>"));
    }
    Ok(cfg)
}

pub fn resolve_evaluate(a: &EvaluateArgs) -> CliResult<RunConfig> {
    let mut cfg = base_config(&a.common)?;
    if let Some(s) = &a.scale {
        cfg.eval.scales = parse_list(s, "scale")?;
    }
    if cfg.eval.scales.is_empty() || cfg.eval.scales.contains(&0) {
        return Err(usage("scales must be positive"));
    }
    if let Some(c) = &a.checkpoint {
        cfg.eval.checkpoint = Some(c.clone());
    }
    Ok(cfg)
}

pub fn resolve_ablate(a: &AblateArgs) -> CliResult<RunConfig> {
    let mut cfg = base_config(&a.common)?;
    if let Some(v) = &a.variants {
        cfg.ablation.variants = v
            .split(',')
            .map(|s| AblationVariant::parse(s).map_err(|e| usage(e.to_string())))
            .collect::<CliResult<_>>()?;
    }
    if let Some(s) = &a.seeds {
        cfg.ablation.seeds = parse_list(s, "seed")?;
    }
    if cfg.ablation.variants.is_empty() || cfg.ablation.seeds.is_empty() {
        return Err(usage("ablation needs at least one variant and one seed"));
    }
    apply_train_overrides(&mut cfg.train, a.scale, a.epochs.as_deref(), a.lr)?;
    Ok(cfg)
}

/// Summary printed by `generate`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerateSummary {
    pub samples: usize,
    pub train: usize,
    pub test: usize,
    pub mean_building_fraction: f64,
    pub los_fraction: f64,
    pub nlos_fraction: f64,
}

pub fn cmd_generate(cfg: &RunConfig) -> CliResult<GenerateSummary> {
    let maps = synthesize_maps(&cfg.synthesis)?;
    let manifest = manifest_for(&cfg.synthesis, &maps)?;
    save_dataset(&cfg.dataset_dir, &manifest, &maps)?;
    cfg.write_resolved(&cfg.dataset_dir)?;
    let mut census = [0usize; 3];
    for m in &maps {
        for (c, n) in census.iter_mut().zip(los_census(m)) {
            *c += n;
        }
    }
    let cells = census.iter().sum::<usize>().max(1) as f64;
    let summary = GenerateSummary {
        samples: maps.len(),
        train: manifest.with_split(SplitTag::Train).count(),
        test: manifest.with_split(SplitTag::Test).count(),
        mean_building_fraction: census[2] as f64 / cells,
        los_fraction: census[0] as f64 / cells,
        nlos_fraction: census[1] as f64 / cells,
    };
    println!(
        "wrote {} samples ({} train, {} test) to {}",
        summary.samples,
        summary.train,
        summary.test,
        cfg.dataset_dir.display()
    );
    println!(
        "cells: {:.1}% building, {:.1}% LOS, {:.1}% NLOS",
        100.0 * summary.mean_building_fraction,
        100.0 * summary.los_fraction,
        100.0 * summary.nlos_fraction
    );
    Ok(summary)
}

fn load_splits(cfg: &RunConfig) -> CliResult<(Dataset, Vec<ChannelMap>, Vec<ChannelMap>)> {
    let ds = load_dataset(&cfg.dataset_dir)?;
    let train = ds.load_split(SplitTag::Train)?;
    let test = ds.load_split(SplitTag::Test)?;
    if train.is_empty() {
        return Err(CliError::Runtime(Error::invalid("dataset has no training samples")));
    }
    Ok((ds, train, test))
}

/// Directory that `train` writes for a given scale.
pub fn train_dir(cfg: &RunConfig, scale: usize) -> PathBuf {
    cfg.output_dir.join(format!("train_s{scale}"))
}

pub fn cmd_train(cfg: &RunConfig, stage: StageArg, from: Option<&Path>) -> CliResult<TrainLog> {
    let (ds, train, test) = load_splits(cfg)?;
    let norm = &ds.manifest.normalization;
    let t = &cfg.train;
    let train_p = prepare(&train, t.scale, t.augment, norm)?;
    let test_p = prepare(&test, t.scale, false, norm)?;
    let data = StageData {
        train: &train_p,
        test: &test_p,
        norm,
    };
    let dir = train_dir(cfg, t.scale);
    std::fs::create_dir_all(&dir).map_err(Error::from)?;
    cfg.write_resolved(&dir)?;
    let mut log = TrainLog::default();
    let progress = |r: &crate::train::EpochRecord| {
        let pl = r.test.as_ref().and_then(|s| s.mae_of(Channel::PathLoss.name()));
        eprintln!(
            "{} epoch {:>3}  objective {:+.5}{}",
            r.stage.name(),
            r.epoch + 1,
            r.objective,
            pl.map_or(String::new(), |v| format!("  test PL MAE {v:.2} dB"))
        );
    };

    let pretrained = match stage {
        StageArg::Finetune => load_checkpoint_for(from.expect("checked at resolve"), &t.arch)?,
        StageArg::Both | StageArg::Pretrain => {
            let params = match from {
                Some(p) => load_checkpoint_for(p, &t.arch)?.params,
                None => crate::model::build_model(&t.arch, t.init_seed)?,
            };
            let ck = pretrain_stage(params, &data, t, &mut log, progress)?;
            save_checkpoint(&dir.join("pretrained.ckpt"), &ck)?;
            ck
        }
    };
    if stage != StageArg::Pretrain {
        let ck = finetune_stage(pretrained, &data, t, &mut log, progress)?;
        save_checkpoint(&dir.join("finetuned.ckpt"), &ck)?;
    }
    log.write_jsonl(&dir.join("train_log.jsonl"))?;
    write_curves(&dir.join("curves.csv"), &log)?;
    println!("wrote checkpoints and logs to {}", dir.display());
    Ok(log)
}

/// Model and baseline rows, alternating per scale.
pub fn cmd_evaluate(cfg: &RunConfig) -> CliResult<Vec<MetricsReport>> {
    let (ds, _, test) = load_splits(cfg)?;
    if test.is_empty() {
        return Err(CliError::Runtime(Error::invalid("dataset has no test samples")));
    }
    let norm = &ds.manifest.normalization;
    let mut reports = Vec::new();
    for &s in &cfg.eval.scales {
        let path = match &cfg.eval.checkpoint {
            Some(p) => p.clone(),
            None => train_dir(cfg, s).join("finetuned.ckpt"),
        };
        let ck = load_checkpoint(&path)?;
        let test_p = prepare(&test, s, false, norm)?;
        reports.push(evaluate_prepared(&ck.params, &test_p, norm, "model")?);
        reports.push(bilinear_baseline_set(&test, s)?);
    }
    let dir = cfg.output_dir.join("evaluate");
    cfg.write_resolved(&dir)?;
    let scales: Vec<String> = cfg.eval.scales.iter().map(|s| s.to_string()).collect();
    emit_report(&dir, &format!("metrics_s{}", scales.join("-")), &reports)?;
    print!("{}", format_table(&reports));
    Ok(reports)
}

pub fn check_eval_thresholds(th: &Thresholds, reports: &[MetricsReport]) -> CliResult<()> {
    let mut failures = Vec::new();
    for pair in reports.chunks(2) {
        let [model, base] = pair else { continue };
        if let Some(max) = th.max_pl_mae_ratio {
            let ratio = model.mae(Channel::PathLoss) / base.mae(Channel::PathLoss);
            if !(ratio <= max) {
                failures.push(format!("scale {}: PL MAE ratio {ratio:.3} > {max}", model.scale));
            }
        }
        if th.accuracy_at_least_baseline == Some(true) && !(model.accuracy >= base.accuracy) {
            failures.push(format!(
                "scale {}: accuracy {:.4} below baseline {:.4}",
                model.scale, model.accuracy, base.accuracy
            ));
        }
    }
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Threshold(failures))
    }
}

pub fn cmd_ablate(cfg: &RunConfig) -> CliResult<AblationTable> {
    let (ds, train, test) = load_splits(cfg)?;
    let norm = &ds.manifest.normalization;
    let table = run_ablation(&train, &test, &cfg.ablation.variants, &cfg.ablation.seeds, &cfg.train, norm)?;
    let dir = cfg.output_dir.join("ablate");
    cfg.write_resolved(&dir)?;
    let runs: Vec<MetricsReport> = table.runs.iter().map(|r| r.report.clone()).collect();
    emit_report(&dir, &format!("runs_s{}", cfg.train.scale), &runs)?;
    std::fs::write(dir.join("ablation.json"), serde_json::to_string_pretty(&table).map_err(Error::from)?)
        .map_err(Error::from)?;
    let text = format_ablation(&table);
    std::fs::write(dir.join("ablation.txt"), &text).map_err(Error::from)?;
    print!("{text}");
    Ok(table)
}

pub fn check_ablation_thresholds(th: &Thresholds, table: &AblationTable) -> CliResult<()> {
    let Some(tol) = th.ablation_order_tolerance else {
        return Ok(());
    };
    let order = [AblationVariant::Stl, AblationVariant::Mtl, AblationVariant::MtlRes];
    let medians: Vec<Option<f64>> = order.iter().map(|v| table.row(*v).map(|r| r.median_mae)).collect();
    let mut failures = Vec::new();
    for k in 0..2 {
        if let (Some(hi), Some(lo)) = (medians[k], medians[k + 1]) {
            if !(hi >= lo * (1.0 - tol)) {
                failures.push(format!(
                    "{} median {hi:.3} below {} median {lo:.3}",
                    order[k].label(),
                    order[k + 1].label()
                ));
            }
        }
    }
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Threshold(failures))
    }
}
