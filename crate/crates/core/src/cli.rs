//! The `ghost` command line.
//!
//! Every flag can also be given in a TOML file passed with `--config`, using
//! the flag's long name as key (`k-nn = 10`, `seed = 7`). Flags win over the
//! file. Exit codes: 0 success, 2 usage error, 3 data error, 4 statistical
//! degeneracy.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::featurepack::{self, FeaturePack, PackError};
use crate::gaussbank::{self, BankError, GaussianBank};
use crate::io::write_atomic;
use crate::metrics::{self, EvalSummary, KnownScores, Metric, MetricsError};
use crate::scoring::{self, Method, ReferenceBank, ScoredSet, Scorer, ScoringError};
use crate::stats::{self, MethodEval, ResampleConfig, SignificanceReport, StatsError};
use crate::synth::{self, SynthError, SynthSpec, UnknownMode};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Degenerate(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 3,
            CliError::Degenerate(_) => 4,
        }
    }
}

impl From<PackError> for CliError {
    fn from(e: PackError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<BankError> for CliError {
    fn from(e: BankError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<ScoringError> for CliError {
    fn from(e: ScoringError) -> Self {
        match e {
            ScoringError::UnknownMethod(_) | ScoringError::Config(_) => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<StatsError> for CliError {
    fn from(e: StatsError) -> Self {
        match e {
            StatsError::ZeroVariance | StatsError::ZeroVarianceDifferences | StatsError::ConstantDifferences(_) => {
                CliError::Degenerate(e.to_string())
            }
            StatsError::Parameter(_) => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        match e {
            SynthError::Invalid(_) => CliError::Usage(e.to_string()),
            SynthError::Pack(p) => p.into(),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "ghost", version, about = "Gaussian open-set scoring and evaluation")]
pub struct Cli {
    /// TOML file with defaults for any flag (keys are long flag names).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit per-class Gaussians on a training pack.
    Fit(FitArgs),
    /// Score a pack with one method and write `row,predicted,score` CSV.
    Score(ScoreArgs),
    /// OSCR/ROC curves, fairness profile and summary from scored CSVs.
    Eval(EvalArgs),
    /// Shapiro-Wilk + Holm normality audit of a training pack.
    Audit(AuditArgs),
    /// Paired t-test of two methods over seeded resamples.
    Compare(CompareArgs),
    /// Generate seeded synthetic train / known-test / unknown-test packs.
    Synth(SynthArgs),
    /// Convert a `label,e0..,z0..` CSV into a feature pack.
    ImportCsv(ImportCsvArgs),
}

#[derive(Debug, Args, Default)]
pub struct FitArgs {
    #[arg(long)]
    pub train: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Artifacts shared by the commands that score packs.
#[derive(Debug, Args, Default, Clone)]
pub struct ModelArgs {
    /// Bank file from `fit` (needed by ghost).
    #[arg(long)]
    pub bank: Option<PathBuf>,
    /// Training pack for the NNGuide reference set (needed by nnguide).
    #[arg(long)]
    pub reference: Option<PathBuf>,
    #[arg(long)]
    pub nn_fraction: Option<f64>,
    #[arg(long)]
    pub k_nn: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args, Default)]
pub struct ScoreArgs {
    #[arg(long)]
    pub method: Option<String>,
    #[arg(long)]
    pub pack: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Args, Default)]
pub struct EvalArgs {
    /// Known-samples pack (supplies labels).
    #[arg(long)]
    pub known_pack: Option<PathBuf>,
    #[arg(long)]
    pub known_scores: Option<PathBuf>,
    #[arg(long)]
    pub unknown_scores: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Comma-separated FPR values for the fairness profile.
    #[arg(long, value_delimiter = ',')]
    pub fpr_grid: Option<Vec<f64>>,
}

#[derive(Debug, Args, Default)]
pub struct AuditArgs {
    #[arg(long)]
    pub train: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub alpha: Option<f64>,
}

#[derive(Debug, Args, Default)]
pub struct CompareArgs {
    #[arg(long)]
    pub method_a: Option<String>,
    #[arg(long)]
    pub method_b: Option<String>,
    #[arg(long)]
    pub known: Option<PathBuf>,
    #[arg(long)]
    pub unknown: Option<PathBuf>,
    #[arg(long)]
    pub metric: Option<String>,
    #[arg(long)]
    pub resamples: Option<usize>,
    #[arg(long)]
    pub n_known: Option<usize>,
    #[arg(long)]
    pub n_unknown: Option<usize>,
    #[arg(long)]
    pub bonferroni_m: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Args, Default)]
pub struct SynthArgs {
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long)]
    pub classes: Option<usize>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub train_per_class: Option<usize>,
    #[arg(long)]
    pub test_per_class: Option<usize>,
    #[arg(long)]
    pub unknowns: Option<usize>,
    /// shifted-mean, heavy-tail or uniform.
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub shift: Option<f64>,
    #[arg(long)]
    pub mean_spread: Option<f64>,
    #[arg(long)]
    pub min_separation: Option<f64>,
    #[arg(long)]
    pub sigma_min: Option<f64>,
    #[arg(long)]
    pub sigma_max: Option<f64>,
    #[arg(long)]
    pub logit_scale: Option<f64>,
    #[arg(long)]
    pub logit_offset: Option<f64>,
    #[arg(long)]
    pub logit_noise: Option<f64>,
    #[arg(long)]
    pub noisy_classes: Option<usize>,
    #[arg(long)]
    pub noisy_factor: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args, Default)]
pub struct ImportCsvArgs {
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Flat run configuration as read from `--config`; every key is optional.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct RunConfig {
    pub train: Option<PathBuf>,
    pub pack: Option<PathBuf>,
    pub known: Option<PathBuf>,
    pub unknown: Option<PathBuf>,
    pub known_pack: Option<PathBuf>,
    pub known_scores: Option<PathBuf>,
    pub unknown_scores: Option<PathBuf>,
    pub csv: Option<PathBuf>,
    pub bank: Option<PathBuf>,
    pub reference: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub method: Option<String>,
    pub method_a: Option<String>,
    pub method_b: Option<String>,
    pub metric: Option<String>,
    pub seed: Option<u64>,
    pub nn_fraction: Option<f64>,
    pub k_nn: Option<usize>,
    pub fpr_grid: Option<Vec<f64>>,
    pub alpha: Option<f64>,
    pub resamples: Option<usize>,
    pub n_known: Option<usize>,
    pub n_unknown: Option<usize>,
    pub bonferroni_m: Option<usize>,
    pub classes: Option<usize>,
    pub dim: Option<usize>,
    pub train_per_class: Option<usize>,
    pub test_per_class: Option<usize>,
    pub unknowns: Option<usize>,
    pub mode: Option<String>,
    pub shift: Option<f64>,
    pub mean_spread: Option<f64>,
    pub min_separation: Option<f64>,
    pub sigma_min: Option<f64>,
    pub sigma_max: Option<f64>,
    pub logit_scale: Option<f64>,
    pub logit_offset: Option<f64>,
    pub logit_noise: Option<f64>,
    pub noisy_classes: Option<usize>,
    pub noisy_factor: Option<f64>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Usage(format!("bad config {}: {e}", path.display())))
    }
}

/// Flag value, else config value.
macro_rules! pick {
    ($args:expr, $cfg:expr, $field:ident) => {
        $args.$field.clone().or_else(|| $cfg.$field.clone())
    };
}

fn required<T>(value: Option<T>, flag: &str) -> Result<T, CliError> {
    value.ok_or_else(|| CliError::Usage(format!("missing required --{flag}")))
}

fn require_seed(seed: Option<u64>, what: &str) -> Result<u64, CliError> {
    seed.ok_or_else(|| CliError::Usage(format!("{what} is randomized; pass --seed explicitly")))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    write_atomic(path, text.as_bytes()).map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    write_text(path, &text)
}

fn parse_method(name: &str) -> Result<Method, CliError> {
    name.parse::<Method>().map_err(CliError::from)
}

/// Entry point for the binary: parses `args`, runs, returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: Cli) -> Result<(), CliError> {
    let cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    match cli.command {
        Command::Fit(a) => cmd_fit(&a, &cfg),
        Command::Score(a) => cmd_score(&a, &cfg),
        Command::Eval(a) => cmd_eval(&a, &cfg),
        Command::Audit(a) => cmd_audit(&a, &cfg),
        Command::Compare(a) => cmd_compare(&a, &cfg),
        Command::Synth(a) => cmd_synth(&a, &cfg),
        Command::ImportCsv(a) => cmd_import_csv(&a, &cfg),
    }
}

pub fn cmd_fit(args: &FitArgs, cfg: &RunConfig) -> Result<(), CliError> {
    let train = required(pick!(args, cfg, train), "train")?;
    let out = required(pick!(args, cfg, out), "out")?;
    let pack = featurepack::read_pack(&train)?;
    let bank = gaussbank::fit(&pack)?;
    gaussbank::save_bank(&bank, &out)?;
    println!(
        "fitted {} classes x {} dims from {} correct samples -> {}",
        bank.n_classes(),
        bank.dim(),
        bank.counts().iter().map(|&c| c as u64).sum::<u64>(),
        out.display()
    );
    Ok(())
}

/// Loaded artifacts that a [`Scorer`] borrows from.
struct Artifacts {
    bank: Option<GaussianBank>,
    reference: Option<ReferenceBank>,
}

impl Artifacts {
    fn load(methods: &[Method], model: &ModelArgs, cfg: &RunConfig) -> Result<Self, CliError> {
        let mut out = Artifacts {
            bank: None,
            reference: None,
        };
        if methods.contains(&Method::Ghost) {
            let path = pick!(model, cfg, bank)
                .ok_or_else(|| CliError::Usage("method ghost needs --bank (see `ghost fit`)".into()))?;
            out.bank = Some(gaussbank::load_bank(path)?);
        }
        if methods.contains(&Method::NnGuide) {
            let path = pick!(model, cfg, reference).ok_or_else(|| {
                CliError::Usage("method nnguide needs a reference bank path: --reference <train pack>".into())
            })?;
            let seed = require_seed(pick!(model, cfg, seed), "the nnguide reference subsample")?;
            let fraction = pick!(model, cfg, nn_fraction).unwrap_or(scoring::DEFAULT_NN_FRACTION);
            let k_nn = pick!(model, cfg, k_nn).unwrap_or(scoring::DEFAULT_K_NN);
            let train = featurepack::read_pack(path)?;
            out.reference = Some(scoring::build_reference(&train, fraction, k_nn, seed)?);
        }
        Ok(out)
    }

    fn scorer(&self, method: Method) -> Scorer<'_> {
        match method {
            Method::Ghost => Scorer::Ghost(self.bank.as_ref().expect("loaded")),
            Method::Msp => Scorer::Msp,
            Method::MaxLogit => Scorer::MaxLogit,
            Method::Energy => Scorer::Energy,
            Method::NnGuide => Scorer::NnGuide(self.reference.as_ref().expect("loaded")),
        }
    }
}

pub fn cmd_score(args: &ScoreArgs, cfg: &RunConfig) -> Result<(), CliError> {
    let method = parse_method(&required(pick!(args, cfg, method), "method")?)?;
    let pack_path = required(pick!(args, cfg, pack), "pack")?;
    let out = required(pick!(args, cfg, out), "out")?;
    let artifacts = Artifacts::load(&[method], &args.model, cfg)?;
    let pack = featurepack::read_pack(&pack_path)?;
    let scored = artifacts.scorer(method).score_pack(&pack)?;
    scored.write_csv(&out)?;
    println!("scored {} rows with {method} -> {}", scored.len(), out.display());
    Ok(())
}

fn read_scores(path: &Path, source: u64) -> Result<ScoredSet, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    // the method tag is not stored in the CSV and plays no role in evaluation
    Ok(ScoredSet::parse_csv(&text, Method::Ghost, source)?)
}

/// Everything `eval` writes, computed from one code path.
#[derive(Debug, Clone, Serialize)]
pub struct EvalOutputs {
    pub summary: EvalSummary,
    pub oscr: metrics::EvalCurve,
    pub roc: metrics::EvalCurve,
    pub oscr_log: metrics::EvalCurve,
    pub fairness: metrics::FairnessProfile,
    pub top_classes: Vec<usize>,
    pub bottom_classes: Vec<usize>,
    pub oscr_top: metrics::EvalCurve,
    pub oscr_bottom: metrics::EvalCurve,
}

pub fn evaluate(known: &KnownScores, unknown: &[f64], grid: &[f64]) -> Result<EvalOutputs, CliError> {
    let oscr = metrics::oscr_curve(known, unknown)?;
    let roc = metrics::roc_curve(known.scores(), unknown)?;
    let summary = EvalSummary::from_curves(&oscr, &roc, known.accuracy());
    let oscr_log = metrics::oscr_at_fprs(known, unknown, &metrics::log_fpr_grid(-3, 10))?;
    let fairness = metrics::fairness_at_fprs(known, unknown, grid)?;
    let (top_classes, bottom_classes) = metrics::top_bottom_split(known, 0.10);
    let oscr_top = metrics::subset_oscr(known, unknown, &top_classes)?;
    let oscr_bottom = metrics::subset_oscr(known, unknown, &bottom_classes)?;
    Ok(EvalOutputs {
        summary,
        oscr,
        roc,
        oscr_log,
        fairness,
        top_classes,
        bottom_classes,
        oscr_top,
        oscr_bottom,
    })
}

pub fn cmd_eval(args: &EvalArgs, cfg: &RunConfig) -> Result<(), CliError> {
    let known_pack = featurepack::read_pack(required(pick!(args, cfg, known_pack), "known-pack")?)?;
    let source = known_pack.fingerprint();
    let known_scores = read_scores(&required(pick!(args, cfg, known_scores), "known-scores")?, source)?;
    let unknown = read_scores(&required(pick!(args, cfg, unknown_scores), "unknown-scores")?, 0)?;
    let out_dir = required(pick!(args, cfg, out_dir), "out-dir")?;
    let grid = pick!(args, cfg, fpr_grid).unwrap_or_else(metrics::default_fpr_grid);
    if grid.iter().any(|f| !(0.0..=1.0).contains(f)) {
        return Err(CliError::Usage("--fpr-grid values must lie in [0, 1]".into()));
    }
    let known = KnownScores::new(&known_scores, &known_pack)?;
    let out = evaluate(&known, &unknown.scores, &grid)?;

    fs::create_dir_all(&out_dir).map_err(|e| CliError::Data(format!("cannot create {}: {e}", out_dir.display())))?;
    write_text(&out_dir.join("oscr.csv"), &out.oscr.to_csv())?;
    write_text(&out_dir.join("roc.csv"), &out.roc.to_csv())?;
    write_text(&out_dir.join("oscr_log.csv"), &out.oscr_log.to_csv())?;
    write_text(&out_dir.join("oscr_top10.csv"), &out.oscr_top.to_csv())?;
    write_text(&out_dir.join("oscr_bottom10.csv"), &out.oscr_bottom.to_csv())?;
    write_text(&out_dir.join("fairness.csv"), &out.fairness.to_csv())?;
    write_json(&out_dir.join("fairness.json"), &out.fairness)?;
    write_json(&out_dir.join("summary.json"), &out.summary)?;
    for w in &out.fairness.warnings {
        eprintln!("warning: {w}");
    }
    let s = out.summary;
    println!(
        "auoscr={:.4} auroc={:.4} fpr95={:.4} f@c95={:.4} accuracy={:.4} -> {}",
        s.auoscr,
        s.auroc,
        s.fpr95,
        s.f_at_c95,
        s.accuracy,
        out_dir.display()
    );
    Ok(())
}

pub fn cmd_audit(args: &AuditArgs, cfg: &RunConfig) -> Result<(), CliError> {
    let train = featurepack::read_pack(required(pick!(args, cfg, train), "train")?)?;
    let out = required(pick!(args, cfg, out), "out")?;
    let alpha = pick!(args, cfg, alpha).unwrap_or(0.05);
    let audit = stats::normality_audit(&train, alpha)?;
    write_text(&out, &audit.to_csv())?;
    println!(
        "rejection fraction {:.6} ({} of {} tests rejected at alpha={alpha}, {} degenerate) -> {}",
        audit.rejection_fraction(),
        audit.rejections,
        audit.tests_performed,
        audit.degenerate_count(),
        out.display()
    );
    Ok(())
}

/// JSON written by `compare`.
#[derive(Debug, Clone, Serialize)]
pub struct CompareOutput {
    pub verdict: &'static str,
    #[serde(flatten)]
    pub report: Option<SignificanceReport>,
}

pub fn cmd_compare(args: &CompareArgs, cfg: &RunConfig) -> Result<(), CliError> {
    let method_a = parse_method(&required(pick!(args, cfg, method_a), "method-a")?)?;
    let method_b = parse_method(&required(pick!(args, cfg, method_b), "method-b")?)?;
    let seed = require_seed(pick!(args.model, cfg, seed), "resampling")?;
    let known_pack = featurepack::read_pack(required(pick!(args, cfg, known), "known")?)?;
    let unknown_pack = featurepack::read_pack(required(pick!(args, cfg, unknown), "unknown")?)?;
    let out = required(pick!(args, cfg, out), "out")?;
    let metric: Metric = pick!(args, cfg, metric)
        .unwrap_or_else(|| "auroc".into())
        .parse()
        .map_err(CliError::Usage)?;
    let defaults = ResampleConfig::new(seed);
    let resample = ResampleConfig {
        resamples: pick!(args, cfg, resamples).unwrap_or(defaults.resamples),
        n_known: pick!(args, cfg, n_known).unwrap_or(defaults.n_known),
        n_unknown: pick!(args, cfg, n_unknown).unwrap_or(defaults.n_unknown),
        seed,
        bonferroni_m: pick!(args, cfg, bonferroni_m).unwrap_or(defaults.bonferroni_m),
    };

    let artifacts = Artifacts::load(&[method_a, method_b], &args.model, cfg)?;
    let eval_for = |m: Method| -> Result<MethodEval, CliError> {
        let scorer = artifacts.scorer(m);
        let known = KnownScores::new(&scorer.score_pack(&known_pack)?, &known_pack)?;
        let unknown = scorer.score_pack(&unknown_pack)?.scores;
        Ok(MethodEval {
            name: m.name().to_string(),
            known,
            unknown,
        })
    };
    let (a, b) = (eval_for(method_a)?, eval_for(method_b)?);
    let output = match stats::bootstrap_compare(&a, &b, metric, resample) {
        Ok(report) => CompareOutput {
            verdict: if report.corrected_p < 0.05 {
                "significant"
            } else {
                "not significant"
            },
            report: Some(report),
        },
        Err(StatsError::ZeroVarianceDifferences) => CompareOutput {
            verdict: "indistinguishable",
            report: None,
        },
        Err(e) => return Err(e.into()),
    };
    write_json(&out, &output)?;
    match &output.report {
        Some(r) => println!(
            "{}: {} {:.4}±{:.4} vs {} {:.4}±{:.4}, t={:.4}, p={:.3e}, corrected p={:.3e} ({})",
            metric.name(),
            r.method_a.name,
            r.method_a.mean,
            r.method_a.std,
            r.method_b.name,
            r.method_b.mean,
            r.method_b.std,
            r.t,
            r.p_value,
            r.corrected_p,
            output.verdict
        ),
        None => println!(
            "{method_a} vs {method_b}: indistinguishable (identical {} on every resample)",
            metric.name()
        ),
    }
    Ok(())
}

pub fn synth_spec(args: &SynthArgs, cfg: &RunConfig) -> Result<SynthSpec, CliError> {
    let seed = require_seed(pick!(args, cfg, seed), "synth")?;
    let k = pick!(args, cfg, classes).unwrap_or(10);
    let d = pick!(args, cfg, dim).unwrap_or(16);
    let mut spec = SynthSpec::new(k, d, seed);
    spec.train_per_class = pick!(args, cfg, train_per_class).unwrap_or(spec.train_per_class);
    spec.test_per_class = pick!(args, cfg, test_per_class).unwrap_or(spec.test_per_class);
    spec.n_unknown = pick!(args, cfg, unknowns).unwrap_or(spec.n_unknown);
    if let Some(mode) = pick!(args, cfg, mode) {
        spec.unknown_mode = mode.parse::<UnknownMode>().map_err(CliError::Usage)?;
    }
    spec.unknown_shift = pick!(args, cfg, shift).unwrap_or(spec.unknown_shift);
    spec.mean_spread = pick!(args, cfg, mean_spread).unwrap_or(spec.mean_spread);
    spec.min_separation = pick!(args, cfg, min_separation).unwrap_or(spec.min_separation);
    spec.sigma_range = (
        pick!(args, cfg, sigma_min).unwrap_or(spec.sigma_range.0),
        pick!(args, cfg, sigma_max).unwrap_or(spec.sigma_range.1),
    );
    spec.logit_scale = pick!(args, cfg, logit_scale).unwrap_or(spec.logit_scale);
    spec.logit_offset = pick!(args, cfg, logit_offset).unwrap_or(spec.logit_offset);
    spec.logit_noise = pick!(args, cfg, logit_noise).unwrap_or(spec.logit_noise);
    spec.noisy_classes = pick!(args, cfg, noisy_classes).unwrap_or(spec.noisy_classes);
    spec.noisy_factor = pick!(args, cfg, noisy_factor).unwrap_or(spec.noisy_factor);
    Ok(spec)
}

pub fn cmd_synth(args: &SynthArgs, cfg: &RunConfig) -> Result<(), CliError> {
    let spec = synth_spec(args, cfg)?;
    let out_dir = required(pick!(args, cfg, out_dir), "out-dir")?;
    let packs = synth::generate(&spec)?;
    fs::create_dir_all(&out_dir).map_err(|e| CliError::Data(format!("cannot create {}: {e}", out_dir.display())))?;
    featurepack::write_pack(&packs.train, out_dir.join("train.ghpk"))?;
    featurepack::write_pack(&packs.known_test, out_dir.join("known.ghpk"))?;
    featurepack::write_pack(&packs.unknown_test, out_dir.join("unknown.ghpk"))?;
    write_json(&out_dir.join("synth.json"), &spec)?;
    println!(
        "wrote {} train, {} known, {} unknown samples (K={}, D={}) -> {}",
        packs.train.n_samples(),
        packs.known_test.n_samples(),
        packs.unknown_test.n_samples(),
        spec.n_classes,
        spec.dim,
        out_dir.display()
    );
    Ok(())
}

pub fn cmd_import_csv(args: &ImportCsvArgs, cfg: &RunConfig) -> Result<(), CliError> {
    let csv = required(pick!(args, cfg, csv), "csv")?;
    let out = required(pick!(args, cfg, out), "out")?;
    let pack = featurepack::read_csv(&csv)?;
    featurepack::write_pack(&pack, &out)?;
    println!(
        "imported {} samples (K={}, D={}) -> {}",
        pack.n_samples(),
        pack.n_classes(),
        pack.dim(),
        out.display()
    );
    Ok(())
}

/// Convenience for callers holding a pack in memory.
pub fn load_pack(path: &Path) -> Result<FeaturePack, CliError> {
    Ok(featurepack::read_pack(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_win_over_config() {
        let cfg: RunConfig = toml::from_str("seed = 3\nclasses = 4\ndim = 5\nmode = \"uniform\"").unwrap();
        let args = SynthArgs {
            classes: Some(7),
            ..Default::default()
        };
        let spec = synth_spec(&args, &cfg).unwrap();
        assert_eq!((spec.n_classes, spec.dim, spec.seed), (7, 5, 3));
        assert_eq!(spec.unknown_mode, UnknownMode::Uniform);
    }

    #[test]
    fn randomized_commands_need_a_seed() {
        let err = synth_spec(&SynthArgs::default(), &RunConfig::default()).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn unknown_config_keys_are_rejected() {
        assert!(toml::from_str::<RunConfig>("sede = 3").is_err());
    }

    #[test]
    fn usage_errors_exit_2() {
        assert_eq!(run(["ghost", "frobnicate"]), 2);
        assert_eq!(
            run(["ghost", "score", "--method", "openmax", "--pack", "x", "--out", "y"]),
            2
        );
    }
}
