//! Batch frontend: validate tuple files, elicit forecasts, score them, score
//! against ground truth, run null-hypothesis calibration, and correlate
//! consistency with accuracy across forecasters.
//!
//! Every subcommand is deterministic given its inputs and seed; the
//! elicitation and scoring steps are separate so forecasts can be cached on
//! disk and re-scored offline.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use forecheck::arbitrage_forecaster::{load_chains, ArbitrageForecaster, TupleSampler, DEFAULT_BUDGET};
use forecheck::evaluation::{
    build_report, correlate, render_table, score_tuple, simulate_calibration, AggregateReport, AggregationMode,
    BrierSummary, ForecasterResult, MetricSelection, ScoringConfig, Thresholds,
};
use forecheck::forecasters::{Forecaster, ForecasterSpec};
use forecheck::io::{self, ForecastRecord, ForecastStatus, ResultEntry};
use forecheck::{CheckKind, Error, ErrorCategory};

/// Seed used when `--seed` is not given.
pub const DEFAULT_SEED: u64 = 20_240_601;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Error,
    },
    #[error(transparent)]
    Core(#[from] Error),
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    /// 0 success, 1 data or usage, 2 solver, 3 network or budget.
    pub fn exit_code(&self) -> i32 {
        let category = match self {
            CliError::Context { source, .. } | CliError::Core(source) => source.category(),
            CliError::Usage(_) => return 1,
        };
        match category {
            ErrorCategory::Data => 1,
            ErrorCategory::Solver => 2,
            ErrorCategory::Network | ErrorCategory::Budget => 3,
        }
    }
}

fn context(ctx: impl Into<String>) -> impl FnOnce(Error) -> CliError {
    let ctx = ctx.into();
    move |source| CliError::Context { context: ctx, source }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "forecheck", version, about = "Logical-consistency scoring for probabilistic forecasts")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a tuple (or question) file and report every bad line.
    Validate(ValidateArgs),
    /// Ask a forecaster about every question of every tuple.
    Forecast(ForecastArgs),
    /// Score tuple forecasts for consistency.
    Score(ScoreArgs),
    /// Forecast resolved questions and compute Brier scores.
    GroundTruth(GroundTruthArgs),
    /// Flag rates of a noisy but consistent simulated forecaster.
    Simulate(SimulateArgs),
    /// Correlate violations with Brier scores across forecasters.
    Correlate(CorrelateArgs),
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Treat the input as a question file instead of a tuple file.
    #[arg(long)]
    pub questions: bool,
}

#[derive(Debug, Args)]
pub struct ForecastArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Forecaster spec JSON.
    #[arg(long)]
    pub forecaster: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Worker threads; defaults to the number of CPUs.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Wrap the forecaster in this many levels of arbitrage.
    #[arg(long, default_value_t = 0)]
    pub depth: usize,
    /// Comma-separated checks: which tuples to forecast, and with `--depth`
    /// the checks the wrapper arbitrages against, in order.
    #[arg(long, value_delimiter = ',', value_parser = parse_kind)]
    pub checks: Option<Vec<CheckKind>>,
    /// Question chains (JSONL) the wrapper samples related questions from.
    #[arg(long)]
    pub chains: Option<PathBuf>,
    /// Cap on uncached base-forecaster calls per question when wrapping.
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    pub budget: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MetricArg {
    Arbitrage,
    Frequentist,
    Both,
}

impl From<MetricArg> for MetricSelection {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::Arbitrage => MetricSelection::Arbitrage,
            MetricArg::Frequentist => MetricSelection::Frequentist,
            MetricArg::Both => MetricSelection::Both,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AggregationArg {
    PerCheckMean,
    Pooled,
}

impl From<AggregationArg> for AggregationMode {
    fn from(a: AggregationArg) -> Self {
        match a {
            AggregationArg::PerCheckMean => AggregationMode::PerCheckMean,
            AggregationArg::Pooled => AggregationMode::Pooled,
        }
    }
}

#[derive(Debug, Args)]
pub struct ThresholdArgs {
    #[arg(long, default_value_t = forecheck::arbitrage::DEFAULT_THRESHOLD)]
    pub threshold_arbitrage: f64,
    #[arg(long, default_value_t = forecheck::frequentist::FrequentistConfig::default().threshold())]
    pub threshold_frequentist: f64,
}

impl ThresholdArgs {
    fn thresholds(&self) -> CliResult<Thresholds> {
        for (name, v) in [("arbitrage", self.threshold_arbitrage), ("frequentist", self.threshold_frequentist)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(CliError::Usage(format!("--threshold-{name} must be a non-negative number, got {v}")));
            }
        }
        Ok(Thresholds { arbitrage: self.threshold_arbitrage, frequentist: self.threshold_frequentist })
    }
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    /// Tuple forecasts (JSONL) as written by `forecast`.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = MetricArg::Both)]
    pub metric: MetricArg,
    /// Per-tuple scores (JSONL).
    #[arg(long)]
    pub output: PathBuf,
    /// Summary report (JSON).
    #[arg(long)]
    pub summary: PathBuf,
    /// Also write the plain-text table here; it always goes to stdout.
    #[arg(long)]
    pub table: Option<PathBuf>,
    /// Ground-truth results (JSONL) whose Brier score goes into the summary.
    #[arg(long)]
    pub results: Option<PathBuf>,
    /// Only score these checks.
    #[arg(long, value_delimiter = ',', value_parser = parse_kind)]
    pub checks: Option<Vec<CheckKind>>,
    #[arg(long, value_enum, default_value_t = AggregationArg::PerCheckMean)]
    pub aggregation: AggregationArg,
    #[command(flatten)]
    pub thresholds: ThresholdArgs,
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct GroundTruthArgs {
    /// Questions (JSONL); unresolved ones are skipped.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub forecaster: PathBuf,
    /// Per-question results (JSONL).
    #[arg(long)]
    pub output: PathBuf,
    /// Brier summary (JSON).
    #[arg(long)]
    pub summary: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_parser = parse_kind)]
    pub kind: CheckKind,
    #[arg(long, default_value_t = 10_000)]
    pub n: usize,
    #[arg(long, default_value_t = 0.05)]
    pub sigma: f64,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = MetricArg::Both)]
    pub metric: MetricArg,
    #[command(flatten)]
    pub thresholds: ThresholdArgs,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct CorrelateArgs {
    /// Summary reports, one per forecaster.
    #[arg(long = "summary", required = true)]
    pub summaries: Vec<PathBuf>,
    /// Brier summaries paired with `--summary` by position; without them
    /// each summary must carry its own Brier score.
    #[arg(long = "brier")]
    pub briers: Vec<PathBuf>,
    #[arg(long)]
    pub output: PathBuf,
}

fn parse_kind(s: &str) -> Result<CheckKind, String> {
    s.trim().parse::<CheckKind>().map_err(|e| e.to_string())
}

/// Record of what a run read, wrote and finished, written next to its
/// primary output. Contains nothing run-specific beyond the arguments, so it
/// is as reproducible as the outputs themselves.
#[derive(Debug, Serialize)]
struct Manifest {
    command: &'static str,
    status: &'static str,
    seed: Option<u64>,
    inputs: Vec<String>,
    outputs: Vec<String>,
    total: usize,
    completed: usize,
    failed: usize,
    skipped: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

fn manifest_path(output: &Path) -> PathBuf {
    let mut name = output.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    output.with_file_name(name)
}

fn display(paths: &[&Path]) -> Vec<String> {
    paths.iter().map(|p| p.display().to_string()).collect()
}

fn require_file(path: &Path) -> CliResult<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::Core(Error::Io {
            path: path.to_path_buf(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "input file not found"),
        }))
    }
}

fn require_parent(path: &Path) -> CliResult<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() && !dir.is_dir() => Err(CliError::Core(Error::Io {
            path: dir.to_path_buf(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "output directory does not exist"),
        })),
        _ => Ok(()),
    }
}

fn pool(jobs: Option<usize>) -> CliResult<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start worker pool: {e}")))
}

fn load_forecaster(path: &Path) -> CliResult<ForecasterSpec> {
    ForecasterSpec::load(path).map_err(context(format!("forecaster spec {}", path.display())))
}

/// Parses arguments and runs, returning the process exit code. Diagnostics
/// go to stderr, human-readable results to stdout.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Validate(a) => cmd_validate(&a),
        Command::Forecast(a) => cmd_forecast(&a),
        Command::Score(a) => cmd_score(&a).map(|_| ()),
        Command::GroundTruth(a) => cmd_ground_truth(&a),
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Correlate(a) => cmd_correlate(&a),
    }
}

pub fn cmd_validate(a: &ValidateArgs) -> CliResult<()> {
    require_file(&a.input)?;
    if a.questions {
        let qs = io::load_questions(&a.input)?;
        println!("{}: {} valid questions", a.input.display(), qs.entries.len());
        return Ok(());
    }
    let (ok, errors) = io::validate_tuple_file(&a.input)?;
    for e in &errors {
        eprintln!("{e}");
    }
    println!("{}: {ok} valid, {} invalid", a.input.display(), errors.len());
    match errors.into_iter().next() {
        None => Ok(()),
        Some(first) => Err(CliError::Context { context: "validation failed".into(), source: first }),
    }
}

fn build_forecaster(a: &ForecastArgs) -> CliResult<Arc<dyn Forecaster>> {
    let spec = load_forecaster(&a.forecaster)?;
    let base: Arc<dyn Forecaster> = Arc::from(spec.build().map_err(context(format!("forecaster `{}`", spec.id)))?);
    if a.depth == 0 {
        return Ok(base);
    }
    let chains_path = a
        .chains
        .as_ref()
        .ok_or_else(|| CliError::Usage("--depth needs --chains".into()))?;
    let checks = a
        .checks
        .as_ref()
        .filter(|c| !c.is_empty())
        .ok_or_else(|| CliError::Usage("--depth needs --checks".into()))?;
    let chains = load_chains(chains_path)?;
    let samplers = checks
        .iter()
        .map(|&k| TupleSampler::from_chains(k, &chains))
        .collect::<forecheck::Result<Vec<_>>>()
        .map_err(context(format!("chains {}", chains_path.display())))?;
    let wrapper = ArbitrageForecaster::new(base, samplers, a.depth)?.with_budget(a.budget);
    Ok(Arc::new(wrapper))
}

pub fn cmd_forecast(a: &ForecastArgs) -> CliResult<()> {
    require_file(&a.input)?;
    require_file(&a.forecaster)?;
    if let Some(c) = &a.chains {
        require_file(c)?;
    }
    require_parent(&a.output)?;
    let forecaster = build_forecaster(a)?;
    let tuples = io::load_tuples(&a.input)?.entries;
    let wanted: Option<BTreeSet<CheckKind>> = a.checks.as_ref().map(|c| c.iter().copied().collect());
    let selected: Vec<_> = tuples
        .iter()
        .filter(|t| wanted.as_ref().is_none_or(|w| w.contains(&t.kind)))
        .collect();
    let skipped = tuples.len() - selected.len();

    let outcomes: Vec<forecheck::Result<ForecastRecord>> = pool(a.jobs)?.install(|| {
        selected
            .par_iter()
            .map(|t| match forecaster.forecast_tuple(t, a.seed) {
                Ok(assignment) => ForecastRecord::ok(t, &assignment),
                Err(e) if e.category() == ErrorCategory::Network => {
                    log::warn!("tuple `{}`: elicitation failed: {e}", t.tuple_id);
                    Ok(ForecastRecord::failed(t, forecaster.id(), &e))
                }
                Err(e) => Err(e),
            })
            .collect()
    });

    let mut records = Vec::with_capacity(outcomes.len());
    let mut fatal = None;
    for (t, o) in selected.iter().zip(outcomes) {
        match o {
            Ok(r) => records.push(r),
            Err(e) if fatal.is_none() => fatal = Some(CliError::Context { context: format!("tuple `{}`", t.tuple_id), source: e }),
            Err(_) => {}
        }
    }
    io::write_forecasts(&a.output, &records)?;
    let failed = records.iter().filter(|r| r.status == ForecastStatus::ElicitationFailed).count();
    let mut inputs = vec![a.input.as_path(), a.forecaster.as_path()];
    if let Some(c) = &a.chains {
        inputs.push(c);
    }
    let manifest = Manifest {
        command: "forecast",
        status: if fatal.is_some() { "aborted" } else { "complete" },
        seed: Some(a.seed),
        inputs: display(&inputs),
        outputs: display(&[&a.output]),
        total: selected.len(),
        completed: records.len() - failed,
        failed,
        skipped,
        error: fatal.as_ref().map(ToString::to_string),
    };
    io::write_json(&manifest_path(&a.output), &manifest)?;
    println!(
        "{}: {} tuples forecast by `{}`, {failed} failed",
        a.output.display(),
        records.len() - failed,
        forecaster.id()
    );
    fatal.map_or(Ok(()), Err)
}

/// Scores every forecast record and returns the summary report.
pub fn cmd_score(a: &ScoreArgs) -> CliResult<AggregateReport> {
    require_file(&a.input)?;
    if let Some(r) = &a.results {
        require_file(r)?;
    }
    for out in [Some(&a.output), Some(&a.summary), a.table.as_ref()].into_iter().flatten() {
        require_parent(out)?;
    }
    let cfg = ScoringConfig {
        metrics: a.metric.into(),
        thresholds: a.thresholds.thresholds()?,
        ..ScoringConfig::default()
    };
    let records = io::load_forecasts(&a.input)?;
    let wanted: Option<BTreeSet<CheckKind>> = a.checks.as_ref().map(|c| c.iter().copied().collect());
    let usable: Vec<&ForecastRecord> = records
        .iter()
        .filter(|r| r.status == ForecastStatus::Ok)
        .filter(|r| wanted.as_ref().is_none_or(|w| w.contains(&r.kind)))
        .collect();
    let failed = records.iter().filter(|r| r.status != ForecastStatus::Ok).count();
    if failed > 0 {
        log::warn!("{}: skipping {failed} records whose elicitation failed", a.input.display());
    }
    let ids: BTreeSet<&str> = usable.iter().map(|r| r.forecaster_id.as_str()).collect();
    if ids.len() > 1 {
        return Err(CliError::Usage(format!(
            "{} mixes forecasters {ids:?}; score one forecaster per file",
            a.input.display()
        )));
    }
    let forecaster_id = ids.into_iter().next().unwrap_or("unknown").to_string();

    let scored: Vec<forecheck::Result<_>> = pool(a.jobs)?.install(|| {
        usable
            .par_iter()
            .map(|r| score_tuple(&r.tuple_id, r.kind, &r.probs(), &cfg))
            .collect()
    });
    let mut scores = Vec::with_capacity(scored.len());
    for (r, s) in usable.iter().zip(scored) {
        scores.push(s.map_err(context(format!("tuple `{}`", r.tuple_id)))?);
    }
    let brier = match &a.results {
        Some(p) => {
            let results = io::load_results(p)?;
            for w in &results.warnings {
                eprintln!("warning: {}: {w}", p.display());
            }
            Some(results.brier_summary()?)
        }
        None => None,
    };
    let report = build_report(&forecaster_id, &scores, &cfg.thresholds, a.aggregation.into(), brier)?;
    io::write_scores(&a.output, &scores)?;
    io::write_summary(&a.summary, &report)?;
    let table = render_table(&report);
    if let Some(t) = &a.table {
        std::fs::write(t, &table).map_err(|e| Error::Io { path: t.clone(), source: e })?;
    }
    print!("{table}");

    let mut inputs = vec![a.input.as_path()];
    if let Some(r) = &a.results {
        inputs.push(r);
    }
    let mut outputs = vec![a.output.as_path(), a.summary.as_path()];
    if let Some(t) = &a.table {
        outputs.push(t);
    }
    let manifest = Manifest {
        command: "score",
        status: "complete",
        seed: None,
        inputs: display(&inputs),
        outputs: display(&outputs),
        total: records.len(),
        completed: scores.len(),
        failed,
        skipped: records.len() - failed - scores.len(),
        error: None,
    };
    io::write_json(&manifest_path(&a.output), &manifest)?;
    Ok(report)
}

pub fn cmd_ground_truth(a: &GroundTruthArgs) -> CliResult<()> {
    require_file(&a.input)?;
    require_file(&a.forecaster)?;
    require_parent(&a.output)?;
    if let Some(s) = &a.summary {
        require_parent(s)?;
    }
    let spec = load_forecaster(&a.forecaster)?;
    let forecaster = spec.build().map_err(context(format!("forecaster `{}`", spec.id)))?;
    let questions = io::load_questions(&a.input)?.entries;
    let resolved: Vec<_> = questions.iter().filter(|q| q.resolution.is_some()).collect();
    let skipped = questions.len() - resolved.len();
    if skipped > 0 {
        log::warn!("{}: skipping {skipped} unresolved questions", a.input.display());
    }
    let outcomes: Vec<forecheck::Result<_>> = pool(a.jobs)?.install(|| {
        resolved
            .par_iter()
            .map(|q| match forecaster.forecast(q, a.seed) {
                Ok(f) => ResultEntry::new((*q).clone(), q.resolution.unwrap_or(false), f.prob, f.reasoning).map(Some),
                Err(e) if e.category() == ErrorCategory::Network => {
                    log::warn!("question `{}`: elicitation failed: {e}", q.id);
                    Ok(None)
                }
                Err(e) => Err(e),
            })
            .collect()
    });
    let mut entries = Vec::new();
    let mut failed = 0;
    let mut fatal = None;
    for (q, o) in resolved.iter().zip(outcomes) {
        match o {
            Ok(Some(e)) => entries.push(e),
            Ok(None) => failed += 1,
            Err(e) if fatal.is_none() => fatal = Some(CliError::Context { context: format!("question `{}`", q.id), source: e }),
            Err(_) => failed += 1,
        }
    }
    io::write_results(&a.output, &entries)?;
    let summary = BrierSummary::from_forecasts(entries.iter().map(|e| (e.question.id.clone(), e.forecast, e.resolution)));
    if let (Some(path), Ok(s)) = (&a.summary, &summary) {
        io::write_json(path, s)?;
    }
    let mut outputs = vec![a.output.as_path()];
    if let Some(s) = &a.summary {
        outputs.push(s);
    }
    let manifest = Manifest {
        command: "ground-truth",
        status: if fatal.is_some() { "aborted" } else { "complete" },
        seed: Some(a.seed),
        inputs: display(&[&a.input, &a.forecaster]),
        outputs: display(&outputs),
        total: questions.len(),
        completed: entries.len(),
        failed,
        skipped,
        error: fatal.as_ref().map(ToString::to_string),
    };
    io::write_json(&manifest_path(&a.output), &manifest)?;
    if let Some(e) = fatal {
        return Err(e);
    }
    let s = summary?;
    println!("Forecaster: {}", forecaster.id());
    println!("Brier score: {:.4} (n = {})", s.avg_brier, s.n);
    Ok(())
}

pub fn cmd_simulate(a: &SimulateArgs) -> CliResult<()> {
    require_parent(&a.output)?;
    if !(a.sigma.is_finite() && a.sigma >= 0.0) {
        return Err(CliError::Usage(format!("--sigma must be non-negative, got {}", a.sigma)));
    }
    let cfg = ScoringConfig {
        metrics: a.metric.into(),
        thresholds: a.thresholds.thresholds()?,
        ..ScoringConfig::default()
    };
    let report = simulate_calibration(a.kind, a.n, a.sigma, a.seed, &cfg)?;
    io::write_json(&a.output, &report)?;
    println!("{} tuples, sigma = {}, seed = {}", report.kind, a.sigma, a.seed);
    for r in &report.rates {
        println!(
            "{:<12} avg {:.6}  flagged {:.2}% (threshold {})",
            r.metric.as_str(),
            r.avg_violation,
            100.0 * r.frac_flagged,
            r.threshold
        );
    }
    Ok(())
}

pub fn cmd_correlate(a: &CorrelateArgs) -> CliResult<()> {
    for p in a.summaries.iter().chain(&a.briers) {
        require_file(p)?;
    }
    require_parent(&a.output)?;
    if !a.briers.is_empty() && a.briers.len() != a.summaries.len() {
        return Err(CliError::Usage(format!(
            "{} --brier files for {} --summary files",
            a.briers.len(),
            a.summaries.len()
        )));
    }
    let mut results = Vec::with_capacity(a.summaries.len());
    for (i, path) in a.summaries.iter().enumerate() {
        let mut report = io::load_summary(path)?;
        if let Some(b) = a.briers.get(i) {
            report.brier = Some(io::read_json::<BrierSummary>(b)?);
        }
        results.push(ForecasterResult::from_report(report).map_err(context(path.display().to_string()))?);
    }
    let matrix = correlate(&results);
    io::write_json(&a.output, &matrix)?;
    let fmt = |v: Option<f64>| v.map_or("-".to_string(), |r| format!("{r:.2}"));
    let mut out = String::new();
    let _ = writeln!(out, "{:<12}  {:>9}  {:>11}", "Check", "Arbitrage", "Frequentist");
    for row in &matrix.rows {
        let _ = writeln!(out, "{:<12}  {:>9}  {:>11}", row.check, fmt(row.arbitrage), fmt(row.frequentist));
    }
    if !matrix.excluded.is_empty() {
        let _ = writeln!(out, "excluded (worse than random): {}", matrix.excluded.join(", "));
    }
    print!("{out}");
    Ok(())
}
