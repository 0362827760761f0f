//! Command-line front end.
//!
//! Exit codes: 0 success, 2 input validation, 3 numerical failure, 4 I/O.
//! `RANKALIGN_THREADS` caps the worker pool used by the bootstrap.

mod manifest;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

pub use manifest::{sha256_file, RunManifest};

use crate::boot::paired_bootstrap;
use crate::dataset::{build_all_pairs, load_rankings, split_sets, write_pairs, write_rankings, PairScheme, RankedSet, SplitPlan};
use crate::distx::{read_archive, write_archive};
use crate::error::{Error, Result};
use crate::model::{LayerSchema, LayerSpec, WeightHead};
use crate::stats::{evaluate, Aggregate, EvalOptions, MetricScores};
use crate::synth::{generate, SynthConfig};
use crate::train::{fit, TrainConfig};

pub const THREADS_ENV: &str = "RANKALIGN_THREADS";

#[derive(Debug, Parser)]
#[command(name = "rankalign", version, about = "Rank-aligned perceptual distance tuning and agreement statistics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Convert rankings into pairwise training tuples.
    BuildPairs(BuildPairsArgs),
    /// Partition sets into training and validation sets.
    Split(SplitArgs),
    /// Fine-tune layer-combination weights with the margin ranking loss.
    Train(TrainArgs),
    /// Measure metric/human agreement (Spearman, ICC(2,k)).
    Eval(EvalArgs),
    /// Paired bootstrap of the ICC difference between two weight files.
    Bootstrap(BootstrapArgs),
    /// Generate planted-model synthetic data.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeArg {
    #[value(name = "all_pairs", alias = "all-pairs")]
    AllPairs,
    Adjacent,
}

impl From<SchemeArg> for PairScheme {
    fn from(s: SchemeArg) -> Self {
        match s {
            SchemeArg::AllPairs => PairScheme::AllPairs,
            SchemeArg::Adjacent => PairScheme::Adjacent,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AggregateArg {
    Merged,
    #[value(name = "per-set", alias = "per_set")]
    PerSet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Partition {
    All,
    Train,
    Val,
}

#[derive(Debug, Args, Serialize)]
pub struct BuildPairsArgs {
    #[arg(long)]
    pub rankings: PathBuf,
    #[arg(long, value_enum, default_value = "all_pairs")]
    pub scheme: SchemeArg,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct SplitArgs {
    #[arg(long)]
    pub rankings: PathBuf,
    #[arg(long, default_value_t = 0.7)]
    pub train_fraction: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    #[arg(long)]
    pub distances: PathBuf,
    #[arg(long)]
    pub rankings: PathBuf,
    /// Split file; when omitted a split is drawn with --train-fraction and --seed.
    #[arg(long)]
    pub split: Option<PathBuf>,
    #[arg(long, default_value_t = 0.7)]
    pub train_fraction: f64,
    /// Initial weights (e.g. the baseline metric's); all-ones when omitted.
    #[arg(long)]
    pub init: Option<PathBuf>,
    #[arg(long, default_value_t = 4e-4)]
    pub lr: f64,
    #[arg(long, default_value_t = 256)]
    pub batch: usize,
    #[arg(long, default_value_t = 0.03)]
    pub margin: f64,
    #[arg(long, default_value_t = 200)]
    pub epochs: usize,
    #[arg(long, default_value_t = 10)]
    pub patience: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "all_pairs")]
    pub scheme: SchemeArg,
    /// Train one shared weight per layer instead of one per channel.
    #[arg(long)]
    pub per_layer: bool,
    #[arg(long, default_value_t = 0.9)]
    pub adam_beta1: f64,
    #[arg(long, default_value_t = 0.999)]
    pub adam_beta2: f64,
    #[arg(long, default_value_t = 1e-8)]
    pub adam_epsilon: f64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct EvalArgs {
    #[arg(long)]
    pub distances: PathBuf,
    #[arg(long)]
    pub rankings: PathBuf,
    #[arg(long)]
    pub weights: PathBuf,
    #[arg(long, value_enum, default_value = "merged")]
    pub aggregate: AggregateArg,
    /// Correlate human ranks with raw pooled distances instead of within-set ranks.
    #[arg(long)]
    pub raw_scores: bool,
    #[arg(long, default_value_t = 0.95)]
    pub confidence: f64,
    #[arg(long)]
    pub split: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "all")]
    pub partition: Partition,
    /// JSON report path; the CSV is written beside it with a `.csv` extension.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct BootstrapArgs {
    #[arg(long)]
    pub distances: PathBuf,
    #[arg(long)]
    pub rankings: PathBuf,
    #[arg(long)]
    pub weights_a: PathBuf,
    #[arg(long)]
    pub weights_b: PathBuf,
    #[arg(long, default_value_t = 10_000)]
    pub resamples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.95)]
    pub confidence: f64,
    #[arg(long)]
    pub split: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "all")]
    pub partition: Partition,
    #[arg(long)]
    pub out: PathBuf,
    /// Optional CSV of every resample's ICC difference.
    #[arg(long)]
    pub deltas_csv: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct SynthArgs {
    #[arg(long)]
    pub sets: usize,
    #[arg(long, default_value_t = 10)]
    pub images_per_set: usize,
    /// Comma-separated channel counts, optionally named: `8,16,32` or `conv1:64,conv2:192`.
    #[arg(long, default_value = "8,16,32")]
    pub layers: String,
    #[arg(long, default_value_t = 0)]
    pub noise_swaps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.1)]
    pub value_scale: f64,
    /// Writes `<prefix>.fdx`, `<prefix>.rankings.jsonl` and `<prefix>.hidden.json`.
    #[arg(long)]
    pub out_prefix: PathBuf,
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code. Errors are printed to standard error.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    configure_threads();
    match execute(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn configure_threads() {
    if let Some(n) = std::env::var(THREADS_ENV).ok().and_then(|v| v.parse::<usize>().ok()) {
        if n > 0 {
            // Fails harmlessly if a pool was already installed in this process.
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

pub fn execute(command: &Command) -> Result<()> {
    let started = SystemTime::now();
    let clock = Instant::now();
    let (name, config, inputs, outputs) = match command {
        Command::BuildPairs(a) => ("build-pairs", snapshot(a), cmd_build_pairs(a)?, vec![a.out.clone()]),
        Command::Split(a) => ("split", snapshot(a), cmd_split(a)?, vec![a.out.clone()]),
        Command::Train(a) => {
            let (inputs, outputs) = cmd_train(a)?;
            ("train", snapshot(a), inputs, outputs)
        }
        Command::Eval(a) => {
            let (inputs, outputs) = cmd_eval(a)?;
            ("eval", snapshot(a), inputs, outputs)
        }
        Command::Bootstrap(a) => {
            let (inputs, outputs) = cmd_bootstrap(a)?;
            ("bootstrap", snapshot(a), inputs, outputs)
        }
        Command::Synth(a) => {
            let outputs = cmd_synth(a)?;
            ("synth", snapshot(a), Vec::new(), outputs)
        }
    };
    let input_refs: Vec<&Path> = inputs.iter().map(PathBuf::as_path).collect();
    let output_refs: Vec<&Path> = outputs.iter().map(PathBuf::as_path).collect();
    let manifest = RunManifest::new(name, config, &input_refs, &output_refs, started, clock.elapsed())?;
    manifest.write_beside(&outputs[0])?;
    Ok(())
}

fn snapshot<T: Serialize>(args: &T) -> serde_json::Value {
    serde_json::to_value(args).expect("arguments serialize")
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn cmd_build_pairs(a: &BuildPairsArgs) -> Result<Vec<PathBuf>> {
    let sets = load_rankings(&a.rankings)?;
    let pairs = build_all_pairs(&sets, a.scheme.into());
    write_pairs(&pairs, &a.out)?;
    println!("{} pairs from {} sets ({}) -> {}", pairs.len(), sets.len(), PairScheme::from(a.scheme), a.out.display());
    Ok(vec![a.rankings.clone()])
}

fn cmd_split(a: &SplitArgs) -> Result<Vec<PathBuf>> {
    let sets = load_rankings(&a.rankings)?;
    let plan = split_sets(&sets, a.train_fraction, a.seed)?;
    plan.save(&a.out)?;
    println!(
        "{} train / {} validation sets -> {}",
        plan.train_set_ids.len(),
        plan.val_set_ids.len(),
        a.out.display()
    );
    Ok(vec![a.rankings.clone()])
}

fn split_path_for(out: &Path) -> PathBuf {
    let mut name = out.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".split.json");
    out.with_file_name(name)
}

fn cmd_train(a: &TrainArgs) -> Result<(Vec<PathBuf>, Vec<PathBuf>)> {
    let archive = read_archive(&a.distances)?;
    let sets = load_rankings(&a.rankings)?;
    let mut inputs = vec![a.distances.clone(), a.rankings.clone()];
    let mut outputs = vec![a.out.clone()];
    let split = match &a.split {
        Some(p) => {
            inputs.push(p.clone());
            SplitPlan::load(p)?
        }
        None => {
            let plan = split_sets(&sets, a.train_fraction, a.seed)?;
            let p = split_path_for(&a.out);
            plan.save(&p)?;
            outputs.push(p);
            plan
        }
    };
    let init = match &a.init {
        Some(p) => {
            inputs.push(p.clone());
            WeightHead::load(p)?
        }
        None => WeightHead::ones(archive.schema().clone()),
    };
    let config = TrainConfig {
        margin: a.margin,
        learning_rate: a.lr,
        batch_size: a.batch,
        max_epochs: a.epochs,
        patience: a.patience,
        seed: a.seed,
        adam_beta1: a.adam_beta1,
        adam_beta2: a.adam_beta2,
        adam_epsilon: a.adam_epsilon,
        scheme: a.scheme.into(),
        per_layer: a.per_layer,
    };
    let trace = fit(&archive, &sets, &split, &config, &init)?;
    trace.head().save(&a.out)?;
    if let Some(t) = &a.trace {
        trace.save(t)?;
        outputs.push(t.clone());
    }
    let fmt = |v: Option<f64>| v.map_or_else(|| "undefined".to_owned(), |x| format!("{x:.4}"));
    let best = trace.best_epoch.and_then(|e| trace.epochs.get(e - 1));
    println!(
        "trained {} epochs on {} pairs; validation rho {} -> {} (best epoch {}) -> {}",
        trace.epochs.len(),
        trace.train_pairs,
        fmt(trace.initial_val_rho),
        fmt(best.and_then(|r| r.val_rho)),
        trace.best_epoch.map_or_else(|| "-".to_owned(), |e| e.to_string()),
        a.out.display()
    );
    Ok((inputs, outputs))
}

fn select_partition(sets: Vec<RankedSet>, split: Option<&PathBuf>, partition: Partition, inputs: &mut Vec<PathBuf>) -> Result<Vec<RankedSet>> {
    let Some(path) = split else {
        if partition != Partition::All {
            return Err(Error::InvalidArgument("--partition train/val requires --split".into()));
        }
        return Ok(sets);
    };
    inputs.push(path.clone());
    let plan = SplitPlan::load(path)?;
    let ids = match partition {
        Partition::All => return Ok(sets),
        Partition::Train => &plan.train_set_ids,
        Partition::Val => &plan.val_set_ids,
    };
    Ok(plan.select(&sets, ids)?.into_iter().cloned().collect())
}

fn cmd_eval(a: &EvalArgs) -> Result<(Vec<PathBuf>, Vec<PathBuf>)> {
    let archive = read_archive(&a.distances)?;
    let mut inputs = vec![a.distances.clone(), a.rankings.clone(), a.weights.clone()];
    let sets = select_partition(load_rankings(&a.rankings)?, a.split.as_ref(), a.partition, &mut inputs)?;
    let head = WeightHead::load(&a.weights)?;
    let options = EvalOptions {
        aggregate: match a.aggregate {
            AggregateArg::Merged => Aggregate::Merged,
            AggregateArg::PerSet => Aggregate::PerSetMean,
        },
        scores: if a.raw_scores { MetricScores::Raw } else { MetricScores::WithinSetRanks },
        confidence: a.confidence,
    };
    let report = evaluate(&head, &archive, &sets, &options)?;
    let csv = a.out.with_extension("csv");
    report.save(&a.out, &csv)?;
    println!(
        "rho = {:.4} (p = {}), ICC(2,k) = {:.4} [{}, {:.4}] (p = {:.3e}); Koo-Li: {}, Cicchetti: {}",
        report.spearman_rho,
        report.spearman_p.map_or_else(|| "n/a".to_owned(), |p| format!("{p:.3e}")),
        report.icc2k,
        report.icc_ci_low.map_or_else(|| "-inf".to_owned(), |v| format!("{v:.4}")),
        report.icc_ci_high,
        report.icc_p,
        report.koo_li_band,
        report.cicchetti_band
    );
    Ok((inputs, vec![a.out.clone(), csv]))
}

fn cmd_bootstrap(a: &BootstrapArgs) -> Result<(Vec<PathBuf>, Vec<PathBuf>)> {
    let archive = read_archive(&a.distances)?;
    let mut inputs = vec![a.distances.clone(), a.rankings.clone(), a.weights_a.clone(), a.weights_b.clone()];
    let sets = select_partition(load_rankings(&a.rankings)?, a.split.as_ref(), a.partition, &mut inputs)?;
    let head_a = WeightHead::load(&a.weights_a)?;
    let head_b = WeightHead::load(&a.weights_b)?;
    let result = paired_bootstrap(&archive, &sets, &head_a, &head_b, a.resamples, a.seed, a.confidence)?;
    result.save(&a.out)?;
    let mut outputs = vec![a.out.clone()];
    if let Some(p) = &a.deltas_csv {
        write_text(p, &result.deltas_csv())?;
        outputs.push(p.clone());
    }
    println!(
        "delta ICC = {:.4} (mean over {} resamples {:.4}), {:.0}% CI [{:.4}, {:.4}], p = {:.3e}",
        result.observed_delta_icc,
        result.resamples,
        result.delta_icc_mean,
        result.confidence * 100.0,
        result.ci_low,
        result.ci_high,
        result.p_value
    );
    Ok((inputs, outputs))
}

/// Parses `8,16,32` or `conv1:64,conv2:192`.
pub fn parse_layers(spec: &str) -> Result<LayerSchema> {
    let layers = spec
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .enumerate()
        .map(|(i, item)| {
            let (name, count) = match item.split_once(':') {
                Some((n, c)) => (n.trim().to_owned(), c.trim()),
                None => (format!("layer{i}"), item),
            };
            let channel_count = count
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("bad channel count `{count}` in --layers")))?;
            Ok(LayerSpec { name, channel_count })
        })
        .collect::<Result<Vec<_>>>()?;
    LayerSchema::new(layers)
}

pub fn synth_paths(prefix: &Path) -> (PathBuf, PathBuf, PathBuf) {
    let with = |suffix: &str| {
        let mut name = prefix.file_name().map(|n| n.to_os_string()).unwrap_or_default();
        name.push(suffix);
        prefix.with_file_name(name)
    };
    (with(".fdx"), with(".rankings.jsonl"), with(".hidden.json"))
}

fn cmd_synth(a: &SynthArgs) -> Result<Vec<PathBuf>> {
    let config = SynthConfig {
        set_count: a.sets,
        images_per_set: a.images_per_set,
        schema: parse_layers(&a.layers)?,
        noise_swaps: a.noise_swaps,
        seed: a.seed,
        value_scale: a.value_scale,
    };
    let data = generate(&config)?;
    let (fdx, rankings, hidden) = synth_paths(&a.out_prefix);
    write_archive(&data.archive, &fdx)?;
    write_rankings(&data.sets, &rankings)?;
    data.hidden.save(&hidden)?;
    println!(
        "{} sets x {} images, {} parameters -> {}, {}, {}",
        a.sets,
        a.images_per_set,
        config.schema.parameter_count(),
        fdx.display(),
        rankings.display(),
        hidden.display()
    );
    Ok(vec![fdx, rankings, hidden])
}
