//! Command-line front end. Every stage reads and writes files, so each one
//! can be run and tested on its own.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime};

use clap::{Args, Parser, Subcommand};
use openpatch_core::bank::meta;
use openpatch_core::fewshot::{fewshot_protocol, FewShotConfig};
use openpatch_core::metrics::evaluate_scores;
use openpatch_core::pipeline::{build_bank, evaluate_all, score_samples};
use openpatch_core::{
    BankIndex, CoresetConfig, OodMode, PipelineConfig, SampleEmbeddingSet, ScoringConfig, SynthConfig,
};

use crate::classes::{self, ClassMap};
use crate::error::FormatError;
use crate::manifest::{self, RunManifest};
use crate::opbk;
use crate::report::{self, ScoreTable, Support, SweepRow};

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
        }
    }
}

impl From<openpatch_core::Error> for CliError {
    fn from(e: openpatch_core::Error) -> Self {
        use openpatch_core::Error as E;
        match e {
            E::InvalidKeepRatio(_) | E::UnknownScoringFunction(_) | E::NoScoringFunction | E::InvalidConfig(_) => {
                CliError::Usage(e.to_string())
            }
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<FormatError> for CliError {
    fn from(e: FormatError) -> Self {
        match e {
            FormatError::Core(inner) => inner.into(),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

const FUNCTIONS_HELP: &str = "Comma separated scoring functions: h (entropy), hw (weighted entropy), \
max, mean, nn (global 1NN). Output columns follow this order after sample_id and label.";

#[derive(Debug, Parser)]
#[command(name = "openpatch", version, about = "Training-free semantic novelty detection over patch embeddings")]
pub struct Cli {
    /// Where to write the run manifest (default: `<output>.manifest`, or stderr).
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate synthetic support/test embedding files.
    Synth(SynthArgs),
    /// Build a coreset-reduced unified bank from a support file.
    Build(BuildArgs),
    /// Score test samples against a bank; writes a TSV score table.
    Score(ScoreArgs),
    /// Compute AUROC and FPR95 from a score table or from a bank and test file.
    Eval(EvalArgs),
    /// K-shot protocol: resample K support samples per class, repeat, aggregate.
    Fewshot(FewshotArgs),
    /// Evaluate a list of coreset keep ratios.
    Sweep(SweepArgs),
    /// Export per-patch anchor coordinates with class assignment and distance.
    ExportColors(ExportArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 5)]
    pub classes: usize,
    #[arg(long, default_value_t = 16)]
    pub dim: usize,
    #[arg(long, default_value_t = 20)]
    pub patches: usize,
    #[arg(long, default_value_t = 50)]
    pub samples_per_class: usize,
    #[arg(long, default_value_t = 20)]
    pub test_per_class: usize,
    #[arg(long, default_value_t = 100)]
    pub unknown: usize,
    #[arg(long, default_value_t = 20.0)]
    pub sigma_between: f64,
    #[arg(long, default_value_t = 1.0)]
    pub sigma_within: f64,
    /// mixture, shifted or concentrated_far
    #[arg(long, default_value = "mixture")]
    pub ood_mode: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub no_anchors: bool,
    #[arg(long)]
    pub no_globals: bool,
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    #[arg(long)]
    pub support: PathBuf,
    /// Fraction of each class bank kept by the coreset, in (0, 1]. Stored verbatim in the bank metadata.
    #[arg(long, default_value = "0.2")]
    pub keep_ratio: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Select the coreset on a random projection of this width.
    #[arg(long)]
    pub projection_dim: Option<u32>,
    /// Extraction layer tag recorded in the bank metadata.
    #[arg(long)]
    pub layer: Option<String>,
    /// Backbone tag recorded in the bank metadata.
    #[arg(long)]
    pub backbone: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[arg(long)]
    pub bank: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    #[arg(long, default_value = "h,hw,max,mean", help = FUNCTIONS_HELP)]
    pub functions: String,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write every per-patch match to this TSV.
    #[arg(long)]
    pub matches: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Score table written by `score`.
    #[arg(long, conflicts_with_all = ["bank", "test"])]
    pub scores: Option<PathBuf>,
    #[arg(long, requires = "test")]
    pub bank: Option<PathBuf>,
    #[arg(long, requires = "bank")]
    pub test: Option<PathBuf>,
    /// Scoring function(s) to evaluate, comma separated.
    #[arg(long, default_value = "hw")]
    pub function: String,
    /// Write the key=value report here (it is always printed).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write a TSV table here.
    #[arg(long)]
    pub table: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FewshotArgs {
    #[arg(long)]
    pub support: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    /// Comma separated shot counts.
    #[arg(long, default_value = "5,10,20,50")]
    pub k: String,
    #[arg(long, default_value_t = 10)]
    pub repeats: usize,
    /// Master seed for the draws; also seeds the coreset.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "0.2")]
    pub keep_ratio: String,
    #[arg(long, default_value = "h,hw,max,mean", help = FUNCTIONS_HELP)]
    pub functions: String,
    /// TSV output; drawn indices go to `<out>.draws`. Printed when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub support: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    #[arg(long, default_value = "1.0,0.5,0.2,0.1,0.05")]
    pub keep_ratios: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "h,hw,max,mean", help = FUNCTIONS_HELP)]
    pub functions: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long)]
    pub bank: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    #[arg(long)]
    pub sample: u64,
    #[arg(long)]
    pub out: PathBuf,
}

/// What a finished command reports for its manifest.
#[derive(Debug, Default)]
struct Outcome {
    inputs: Vec<PathBuf>,
    seed: Option<u64>,
    output: Option<PathBuf>,
}

fn parse_ratio(raw: &str) -> Result<f64, CliError> {
    let r: f64 = raw.trim().parse().map_err(|_| CliError::Usage(format!("keep ratio `{raw}` is not a number")))?;
    CoresetConfig::new(r, 0)?;
    Ok(r)
}

fn parse_list<T: std::str::FromStr>(raw: &str, what: &str) -> Result<Vec<T>, CliError> {
    let items = raw
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<T>().map_err(|_| CliError::Usage(format!("bad {what} `{s}`"))))
        .collect::<Result<Vec<T>, _>>()?;
    if items.is_empty() {
        return Err(CliError::Usage(format!("empty {what} list")));
    }
    Ok(items)
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn synth(args: &SynthArgs) -> Result<Outcome, CliError> {
    let cfg = SynthConfig {
        class_count: args.classes,
        dim: args.dim,
        patches_per_sample: args.patches,
        samples_per_class: args.samples_per_class,
        test_per_class: args.test_per_class,
        unknown_count: args.unknown,
        sigma_between: args.sigma_between,
        sigma_within: args.sigma_within,
        ood_mode: args.ood_mode.parse::<OodMode>()?,
        seed: args.seed,
        anchors: !args.no_anchors,
        globals: !args.no_globals,
    };
    let data = openpatch_core::generate(&cfg)?;
    fs::create_dir_all(&args.out_dir)?;
    opbk::write_embedding_sets(&data.support, args.out_dir.join("support.opbk"))?;
    opbk::write_embedding_sets(&data.test, args.out_dir.join("test.opbk"))?;
    ClassMap::from_names(data.class_names).write(args.out_dir.join(classes::FILE_NAME))?;
    println!("support\t{} samples", data.support.len());
    println!("test\t{} samples", data.test.len());
    Ok(Outcome { seed: Some(args.seed), output: Some(args.out_dir.join("synth")), ..Outcome::default() })
}

fn build(args: &BuildArgs) -> Result<Outcome, CliError> {
    let ratio = parse_ratio(&args.keep_ratio)?;
    let cfg = CoresetConfig { keep_ratio: ratio, seed: args.seed, projection_dim: args.projection_dim };
    cfg.validate()?;
    let support = opbk::read_embedding_sets(&args.support)?;
    let mut bank = build_bank(&support, &cfg)?.with_metadata(meta::KEEP_RATIO, args.keep_ratio.trim());
    if let Some(layer) = &args.layer {
        bank = bank.with_metadata(meta::LAYER, layer.as_str());
    }
    if let Some(backbone) = &args.backbone {
        bank = bank.with_metadata(meta::BACKBONE, backbone.as_str());
    }
    opbk::write_bank(&bank, &args.out)?;

    let mut before: BTreeMap<u32, usize> = BTreeMap::new();
    for s in &support {
        if let Some(c) = s.label().known() {
            *before.entry(c.0).or_default() += s.len();
        }
    }
    println!("class\tbefore\tafter");
    for b in bank.banks() {
        println!("{}\t{}\t{}", b.class_id(), before[&b.class_id().0], b.len());
    }
    Ok(Outcome { inputs: vec![args.support.clone()], seed: Some(args.seed), output: Some(args.out.clone()) })
}

fn load_index(bank: &Path) -> Result<BankIndex, CliError> {
    let bank = opbk::read_bank(bank)?;
    Ok(BankIndex::build(&bank)?)
}

fn score(args: &ScoreArgs) -> Result<Outcome, CliError> {
    let scoring = ScoringConfig::parse(&args.functions)?;
    let index = load_index(&args.bank)?;
    let test = opbk::read_embedding_sets(&args.test)?;
    let reports = score_samples(&index, &test, &scoring)?;
    ScoreTable::from_reports(scoring.functions(), &reports).write(&args.out)?;
    if let Some(path) = &args.matches {
        write_text(path, &report::matches_table(&reports))?;
    }
    Ok(Outcome { inputs: vec![args.bank.clone(), args.test.clone()], output: Some(args.out.clone()), ..Outcome::default() })
}

fn eval(args: &EvalArgs) -> Result<Outcome, CliError> {
    let scoring = ScoringConfig::parse(&args.function)?;
    let (evals, inputs) = match (&args.scores, &args.bank, &args.test) {
        (Some(scores), None, None) => {
            let table = ScoreTable::read(scores)?;
            let evals = scoring
                .functions()
                .iter()
                .map(|&f| {
                    let (known, unknown) = table.populations(f)?;
                    Ok(evaluate_scores(f, &known, &unknown)?)
                })
                .collect::<Result<Vec<_>, CliError>>()?;
            (evals, vec![scores.clone()])
        }
        (None, Some(bank), Some(test)) => {
            let index = load_index(bank)?;
            let test_sets = opbk::read_embedding_sets(test)?;
            let reports = score_samples(&index, &test_sets, &scoring)?;
            (evaluate_all(&reports, &scoring)?, vec![bank.clone(), test.clone()])
        }
        _ => return Err(CliError::Usage("eval needs --scores, or both --bank and --test".into())),
    };
    let text = report::eval_report_text(&evals, 1, Support::Full);
    print!("{text}");
    if let Some(out) = &args.out {
        write_text(out, &text)?;
    }
    if let Some(table) = &args.table {
        write_text(table, &report::eval_table(&evals, 1, Support::Full))?;
    }
    Ok(Outcome { inputs, output: args.out.clone().or_else(|| args.table.clone()), ..Outcome::default() })
}

fn fewshot(args: &FewshotArgs) -> Result<Outcome, CliError> {
    let ks: Vec<usize> = parse_list(&args.k, "k")?;
    if ks.contains(&0) {
        return Err(CliError::Usage("k must be at least 1".into()));
    }
    if args.repeats == 0 {
        return Err(CliError::Usage("repeats must be at least 1".into()));
    }
    let pipeline = PipelineConfig {
        coreset: CoresetConfig::new(parse_ratio(&args.keep_ratio)?, args.seed)?,
        scoring: ScoringConfig::parse(&args.functions)?,
    };
    let support = opbk::read_embedding_sets(&args.support)?;
    let test = opbk::read_embedding_sets(&args.test)?;
    let reports = ks
        .iter()
        .map(|&k| {
            let cfg = FewShotConfig { k, repeats: args.repeats, seed: args.seed };
            fewshot_protocol(&support, &test, &cfg, &pipeline)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let table = report::fewshot_table(&reports);
    match &args.out {
        Some(out) => {
            write_text(out, &table)?;
            let mut draws = out.as_os_str().to_os_string();
            draws.push(".draws");
            write_text(Path::new(&draws), &report::fewshot_draws(&reports))?;
        }
        None => print!("{table}"),
    }
    Ok(Outcome {
        inputs: vec![args.support.clone(), args.test.clone()],
        seed: Some(args.seed),
        output: args.out.clone(),
    })
}

fn sweep(args: &SweepArgs) -> Result<Outcome, CliError> {
    let raw: Vec<String> = parse_list(&args.keep_ratios, "keep ratio")?;
    let mut ratios: Vec<(String, f64)> = Vec::with_capacity(raw.len());
    for r in raw {
        let value = parse_ratio(&r)?;
        if ratios.iter().any(|(_, v)| *v == value) {
            return Err(CliError::Usage(format!("keep ratio {r} listed twice")));
        }
        ratios.push((r, value));
    }
    let scoring = ScoringConfig::parse(&args.functions)?;
    let support = opbk::read_embedding_sets(&args.support)?;
    let test = opbk::read_embedding_sets(&args.test)?;
    let rows = ratios
        .into_iter()
        .map(|(raw, ratio)| sweep_row(&support, &test, raw, CoresetConfig::new(ratio, args.seed)?, &scoring))
        .collect::<Result<Vec<_>, CliError>>()?;
    let table = report::sweep_table(&rows);
    match &args.out {
        Some(out) => write_text(out, &table)?,
        None => print!("{table}"),
    }
    Ok(Outcome {
        inputs: vec![args.support.clone(), args.test.clone()],
        seed: Some(args.seed),
        output: args.out.clone(),
    })
}

fn sweep_row(
    support: &[SampleEmbeddingSet],
    test: &[SampleEmbeddingSet],
    keep_ratio: String,
    coreset: CoresetConfig,
    scoring: &ScoringConfig,
) -> Result<SweepRow, CliError> {
    let started = Instant::now();
    let bank = build_bank(support, &coreset)?;
    let index = BankIndex::build(&bank)?;
    let reports = score_samples(&index, test, scoring)?;
    let seconds = started.elapsed().as_secs_f64();
    Ok(SweepRow { keep_ratio, bank_patches: bank.total_patches(), seconds, evals: evaluate_all(&reports, scoring)? })
}

fn export_colors(args: &ExportArgs) -> Result<Outcome, CliError> {
    let index = load_index(&args.bank)?;
    let test = opbk::read_embedding_sets(&args.test)?;
    let sample = test
        .iter()
        .find(|s| s.sample_id() == args.sample)
        .ok_or_else(|| CliError::Data(format!("sample {} not found in {}", args.sample, args.test.display())))?;
    let matches = index.match_patches(sample)?;
    write_text(&args.out, &report::color_export(sample, &matches)?)?;
    Ok(Outcome { inputs: vec![args.bank.clone(), args.test.clone()], output: Some(args.out.clone()), ..Outcome::default() })
}

fn command_name(cmd: &Command) -> &'static str {
    match cmd {
        Command::Synth(_) => "synth",
        Command::Build(_) => "build",
        Command::Score(_) => "score",
        Command::Eval(_) => "eval",
        Command::Fewshot(_) => "fewshot",
        Command::Sweep(_) => "sweep",
        Command::ExportColors(_) => "export-colors",
    }
}

/// Runs one parsed command and writes its manifest. `raw_args` is recorded
/// verbatim.
pub fn run(cli: &Cli, raw_args: Vec<String>) -> Result<(), CliError> {
    let started = SystemTime::now();
    let clock = Instant::now();
    let outcome = match &cli.command {
        Command::Synth(a) => synth(a),
        Command::Build(a) => build(a),
        Command::Score(a) => score(a),
        Command::Eval(a) => eval(a),
        Command::Fewshot(a) => fewshot(a),
        Command::Sweep(a) => sweep(a),
        Command::ExportColors(a) => export_colors(a),
    }?;
    let manifest = RunManifest {
        command: command_name(&cli.command).into(),
        args: raw_args,
        inputs: outcome.inputs,
        seed: outcome.seed,
        tool_version: env!("CARGO_PKG_VERSION").into(),
        started,
        duration: clock.elapsed(),
    };
    match cli.manifest.clone().or_else(|| outcome.output.as_deref().map(manifest::default_path)) {
        Some(path) => write_text(&path, &manifest.to_text())?,
        None => eprint!("{}", manifest.to_text()),
    }
    Ok(())
}

/// Caps the worker pool from `OPENPATCH_THREADS` (unset or 0 = automatic).
pub fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("OPENPATCH_THREADS") else { return Ok(()) };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| CliError::Usage(format!("OPENPATCH_THREADS=`{raw}` is not a number")))?;
    if n > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Data(e.to_string()))?;
    }
    Ok(())
}
