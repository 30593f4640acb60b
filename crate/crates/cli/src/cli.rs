//! Argument parsing and subcommand dispatch.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{ArgAction, Args, Parser, Subcommand};
use delayminer_core::bps_model::ScaleVector;
use delayminer_core::calendars::DiscoveryParams;
use delayminer_core::delay_discovery::{DelayConfig, Estimator};
use delayminer_core::log_io::{read_log as parse_csv_log, ColumnMapping};
use delayminer_core::optimizer::TpeConfig;
use delayminer_core::simulator::{SimulationConfig, DEFAULT_EVENT_BUDGET};
use delayminer_core::time::{parse_timestamp, Timestamp};
use delayminer_core::Attribution;
use log::info;

use crate::config::FileConfig;
use crate::error::{CliError, Result, EXIT_OK};
use crate::harness::{rediscovery_harness, HarnessConfig};
use crate::pipeline::{self, CalendarSource, FullOptions, LogSource};

pub const SEED_ENV: &str = "DELAYMINER_SEED";
const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Parser)]
#[command(
    name = "delayminer",
    version,
    about = "Discover extraneous activity delays and model them as simulation timers"
)]
pub struct Cli {
    /// TOML configuration file; command-line flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// More progress output on stderr (repeatable).
    #[arg(short, long, global = true, action = ArgAction::Count)]
    pub verbose: u8,
    /// Only report errors.
    #[arg(short, long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate extraneous delays from an activity instance log.
    Discover(DiscoverArgs),
    /// Add timers carrying a delay report to a simulation model.
    Enhance(EnhanceArgs),
    /// Simulate a model into activity instance logs.
    Simulate(SimulateArgs),
    /// Compare simulated logs against a reference log.
    Evaluate(EvaluateArgs),
    /// Tune delay scale factors against a validation split.
    Optimize(OptimizeArgs),
    /// Discover, enhance (or optimize), simulate and evaluate in one go.
    Full(FullArgs),
    /// Simulate a model with timers and score every estimator on it.
    Rediscover(RediscoverArgs),
}

#[derive(Debug, Args, Default)]
pub struct LogArgs {
    /// Activity instance log (CSV).
    #[arg(long, value_name = "CSV")]
    pub log: Option<PathBuf>,
    /// Column override, e.g. `case_id=CaseID` (repeatable).
    #[arg(long = "column", value_name = "KEY=COLUMN")]
    pub columns: Vec<String>,
    /// Input rows are start/complete lifecycle events.
    #[arg(long)]
    pub events: bool,
}

fn parse_estimator(s: &str) -> std::result::Result<Estimator, String> {
    s.parse()
        .map_err(|e: delayminer_core::delay_discovery::DelayError| e.to_string())
}

fn parse_attribution(s: &str) -> std::result::Result<Attribution, String> {
    s.parse()
        .map_err(|e: delayminer_core::delay_discovery::DelayError| e.to_string())
}

#[derive(Debug, Args, Default)]
pub struct DelayArgs {
    /// naive, eclipse or eclipse-extrapolated.
    #[arg(long, value_parser = parse_estimator)]
    pub estimator: Option<Estimator>,
    /// Minimum idle period, in seconds, counted as availability.
    #[arg(long)]
    pub lambda: Option<i64>,
    /// Activities need a share of positive delays above this.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Overlap threshold of the concurrency oracle.
    #[arg(long)]
    pub zeta: Option<f64>,
    /// ex-ante or ex-post.
    #[arg(long, value_parser = parse_attribution)]
    pub attribution: Option<Attribution>,
}

#[derive(Debug, Args, Default)]
pub struct CalendarArgs {
    /// Resource calendars (JSON list).
    #[arg(long, value_name = "JSON")]
    pub calendars: Option<PathBuf>,
    /// Discover calendars from the log.
    #[arg(long)]
    pub discover_calendars: bool,
    /// Calendar slot length in seconds.
    #[arg(long)]
    pub granularity: Option<i64>,
    #[arg(long)]
    pub support: Option<f64>,
    #[arg(long)]
    pub confidence: Option<f64>,
}

#[derive(Debug, Args, Default)]
pub struct TpeArgs {
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub gamma_max: Option<f64>,
    #[arg(long)]
    pub startup_trials: Option<usize>,
    #[arg(long)]
    pub good_quantile: Option<f64>,
    #[arg(long)]
    pub candidates_per_step: Option<usize>,
    #[arg(long)]
    pub runs_per_eval: Option<usize>,
}

#[derive(Debug, Args, Default)]
pub struct SimArgs {
    /// Traces per simulated log.
    #[arg(long)]
    pub traces: Option<usize>,
    /// Number of simulated logs.
    #[arg(long)]
    pub runs: Option<usize>,
    /// First arrival (RFC 3339).
    #[arg(long)]
    pub start: Option<String>,
    #[arg(long)]
    pub event_budget: Option<u64>,
    /// Seed; falls back to the config file, then DELAYMINER_SEED.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct DiscoverArgs {
    #[command(flatten)]
    pub log: LogArgs,
    #[command(flatten)]
    pub delay: DelayArgs,
    #[command(flatten)]
    pub calendars: CalendarArgs,
    /// Take resource calendars from this model's pools.
    #[arg(long, value_name = "JSON")]
    pub model: Option<PathBuf>,
    /// Delay report output.
    #[arg(long, value_name = "JSON")]
    pub out: Option<PathBuf>,
    /// Leave raw delay multisets out of the report.
    #[arg(long)]
    pub compact: bool,
    /// Dump the concurrency relation and causal pairs.
    #[arg(long, value_name = "JSON")]
    pub pairs_out: Option<PathBuf>,
    /// Write the calendars used.
    #[arg(long, value_name = "JSON")]
    pub calendars_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EnhanceArgs {
    #[arg(long, value_name = "JSON")]
    pub model: Option<PathBuf>,
    #[arg(long, value_name = "JSON")]
    pub report: Option<PathBuf>,
    /// Scale factors per activity (JSON object).
    #[arg(long, value_name = "JSON")]
    pub gamma: Option<PathBuf>,
    #[arg(long, value_name = "JSON")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_name = "JSON")]
    pub model: Option<PathBuf>,
    #[command(flatten)]
    pub sim: SimArgs,
    #[arg(long, value_name = "DIR")]
    pub out_dir: Option<PathBuf>,
    /// Also write each run's sampled timer delays to `run_XX.timers.csv`.
    #[arg(long)]
    pub trace_timers: bool,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub log: LogArgs,
    /// Simulated logs.
    #[arg(long = "sim", value_name = "CSV")]
    pub sims: Vec<PathBuf>,
    /// Directory of simulated logs (`run_*.csv`).
    #[arg(long, value_name = "DIR")]
    pub sim_dir: Option<PathBuf>,
    #[arg(long, value_name = "JSON")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    #[arg(long, value_name = "JSON")]
    pub model: Option<PathBuf>,
    #[command(flatten)]
    pub log: LogArgs,
    #[command(flatten)]
    pub delay: DelayArgs,
    #[command(flatten)]
    pub tpe: TpeArgs,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Optimized model output.
    #[arg(long, value_name = "JSON")]
    pub out: Option<PathBuf>,
    /// Trial history output.
    #[arg(long, value_name = "JSON")]
    pub history: Option<PathBuf>,
    /// Scaled delay report output.
    #[arg(long, value_name = "JSON")]
    pub report_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FullArgs {
    #[arg(long, value_name = "JSON")]
    pub model: Option<PathBuf>,
    #[command(flatten)]
    pub log: LogArgs,
    #[command(flatten)]
    pub delay: DelayArgs,
    #[command(flatten)]
    pub calendars: CalendarArgs,
    #[command(flatten)]
    pub tpe: TpeArgs,
    #[command(flatten)]
    pub sim: SimArgs,
    /// Tune scale factors instead of injecting the raw estimate.
    #[arg(long)]
    pub optimize: bool,
    #[arg(long, value_name = "DIR")]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RediscoverArgs {
    /// Model with timers.
    #[arg(long, value_name = "JSON")]
    pub model: Option<PathBuf>,
    #[command(flatten)]
    pub sim: SimArgs,
    #[command(flatten)]
    pub delay: DelayArgs,
    /// Estimators to score (repeatable; default all).
    #[arg(long = "score", value_name = "ESTIMATOR", value_parser = parse_estimator)]
    pub estimators: Vec<Estimator>,
    /// Score report output.
    #[arg(long, value_name = "JSON")]
    pub out: Option<PathBuf>,
    /// Ground-truth log output.
    #[arg(long, value_name = "CSV")]
    pub log_out: Option<PathBuf>,
    /// Sampled timer delays output.
    #[arg(long, value_name = "CSV")]
    pub timers_out: Option<PathBuf>,
}

fn required(cli: &Option<PathBuf>, file: &Option<PathBuf>, flag: &str) -> Result<PathBuf> {
    cli.clone()
        .or_else(|| file.clone())
        .ok_or_else(|| CliError::Usage(format!("missing --{flag}")))
}

fn existing(path: PathBuf, flag: &str) -> Result<PathBuf> {
    if path.exists() {
        Ok(path)
    } else {
        Err(CliError::validation(
            "arguments",
            format!("--{flag}: {} does not exist", path.display()),
        ))
    }
}

fn resolve_seed(cli: Option<u64>, file: &FileConfig) -> Result<u64> {
    if let Some(seed) = cli.or(file.seed) {
        return Ok(seed);
    }
    match std::env::var(SEED_ENV) {
        Ok(raw) => raw.trim().parse().map_err(|_| {
            CliError::Usage(format!(
                "{SEED_ENV} must be an unsigned integer, got '{raw}'"
            ))
        }),
        Err(_) => Ok(DEFAULT_SEED),
    }
}

fn log_source(args: &LogArgs, file: &FileConfig) -> Result<LogSource> {
    let path = existing(required(&args.log, &file.paths.log, "log")?, "log")?;
    let mut pairs: Vec<String> = file
        .log
        .columns
        .iter()
        .map(|(k, v)| format!("{k}={v}"))
        .collect();
    pairs.extend(args.columns.iter().cloned());
    let mapping = ColumnMapping::default()
        .with_overrides(&pairs)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(LogSource {
        path,
        mapping,
        events: args.events || file.log.events.unwrap_or(false),
    })
}

fn delay_config(args: &DelayArgs, file: &FileConfig) -> Result<DelayConfig> {
    let d = DelayConfig::default();
    let f = &file.delay;
    let estimator = match (args.estimator, &f.estimator) {
        (Some(e), _) => e,
        (None, Some(s)) => s
            .parse()
            .map_err(|e| CliError::validation("read config", e))?,
        (None, None) => d.estimator,
    };
    let attribution = match (args.attribution, &f.attribution) {
        (Some(a), _) => a,
        (None, Some(s)) => s
            .parse()
            .map_err(|e| CliError::validation("read config", e))?,
        (None, None) => d.attribution,
    };
    let cfg = DelayConfig {
        estimator,
        attribution,
        lambda: args.lambda.or(f.lambda).unwrap_or(d.lambda),
        delta: args.delta.or(f.delta).unwrap_or(d.delta),
        zeta: args.zeta.or(f.zeta).unwrap_or(d.zeta),
    };
    cfg.validate()
        .map_err(|e| CliError::validation("arguments", e))?;
    Ok(cfg)
}

fn discovery_params(args: &CalendarArgs, file: &FileConfig) -> Result<DiscoveryParams> {
    let d = DiscoveryParams::default();
    let f = &file.calendars;
    let params = DiscoveryParams {
        granularity: args.granularity.or(f.granularity).unwrap_or(d.granularity),
        support: args.support.or(f.support).unwrap_or(d.support),
        confidence: args.confidence.or(f.confidence).unwrap_or(d.confidence),
    };
    params
        .validate()
        .map_err(|e| CliError::validation("arguments", e))?;
    Ok(params)
}

/// Explicit calendar file, else discovery when requested, else `fallback`.
fn calendar_source(
    args: &CalendarArgs,
    file: &FileConfig,
    fallback: Option<CalendarSource>,
) -> Result<Option<CalendarSource>> {
    if let Some(path) = args
        .calendars
        .clone()
        .or_else(|| file.paths.calendars.clone())
    {
        return Ok(Some(CalendarSource::File(existing(path, "calendars")?)));
    }
    let params = discovery_params(args, file)?;
    if args.discover_calendars || file.calendars.discover.unwrap_or(false) {
        return Ok(Some(CalendarSource::Discover(params)));
    }
    Ok(fallback)
}

fn tpe_config(args: &TpeArgs, file: &FileConfig, seed: u64) -> Result<TpeConfig> {
    let d = TpeConfig::default();
    let f = &file.tpe;
    let iterations = args.iterations.or(f.iterations).unwrap_or(d.iterations);
    let cfg = TpeConfig {
        iterations,
        gamma_max: args.gamma_max.or(f.gamma_max).unwrap_or(d.gamma_max),
        startup_trials: args
            .startup_trials
            .or(f.startup_trials)
            .unwrap_or(d.startup_trials.min(iterations.max(1))),
        good_quantile: args
            .good_quantile
            .or(f.good_quantile)
            .unwrap_or(d.good_quantile),
        candidates_per_step: args
            .candidates_per_step
            .or(f.candidates_per_step)
            .unwrap_or(d.candidates_per_step),
        seed,
        runs_per_eval: args
            .runs_per_eval
            .or(f.runs_per_eval)
            .unwrap_or(d.runs_per_eval),
    };
    cfg.validate()
        .map_err(|e| CliError::validation("arguments", e))?;
    Ok(cfg)
}

fn start_instant(args: &SimArgs, file: &FileConfig) -> Result<Option<Timestamp>> {
    match args.start.as_ref().or(file.simulation.start.as_ref()) {
        Some(raw) => parse_timestamp(raw)
            .map(Some)
            .ok_or_else(|| CliError::Usage(format!("--start: cannot parse '{raw}'"))),
        None => Ok(None),
    }
}

fn runs(args: &SimArgs, file: &FileConfig) -> Result<usize> {
    let runs = args.runs.or(file.simulation.runs).unwrap_or(1);
    if runs == 0 {
        return Err(CliError::validation(
            "arguments",
            "--runs must be at least 1",
        ));
    }
    Ok(runs)
}

fn sim_config(args: &SimArgs, file: &FileConfig) -> Result<SimulationConfig> {
    let d = SimulationConfig::default();
    let cfg = SimulationConfig {
        num_traces: args
            .traces
            .or(file.simulation.traces)
            .unwrap_or(d.num_traces),
        seed: resolve_seed(args.seed, file)?,
        start_instant: start_instant(args, file)?.unwrap_or(d.start_instant),
        event_budget: args
            .event_budget
            .or(file.simulation.event_budget)
            .unwrap_or(DEFAULT_EVENT_BUDGET),
    };
    cfg.validate()
        .map_err(|e| CliError::validation("arguments", e))?;
    Ok(cfg)
}

fn sim_dir_logs(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir)
        .map_err(|e| CliError::validation("evaluate", format!("{}: {e}", dir.display())))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            let name = p.file_name().and_then(|n| n.to_str()).unwrap_or("");
            name.starts_with("run_") && name.ends_with(".csv") && !name.ends_with(".timers.csv")
        })
        .collect();
    paths.sort();
    Ok(paths)
}

fn run_command(cli: Cli) -> Result<()> {
    let file = match &cli.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    match cli.command {
        Command::Discover(args) => {
            let src = log_source(&args.log, &file)?;
            let out = required(&args.out, &file.paths.report, "out")?;
            let delay = delay_config(&args.delay, &file)?;
            let model = args.model.clone().or_else(|| file.paths.model.clone());
            let fallback = match model {
                Some(m) => CalendarSource::Model(existing(m, "model")?),
                None => CalendarSource::Discover(discovery_params(&args.calendars, &file)?),
            };
            let source =
                calendar_source(&args.calendars, &file, Some(fallback))?.expect("fallback given");
            let log = pipeline::load_log(&src)?;
            let calendars = pipeline::resolve_calendars(&source, &log)?;
            let found = pipeline::discover(&log, &calendars, &delay)?;
            let report = if args.compact {
                found.report.without_raw()
            } else {
                found.report.clone()
            };
            pipeline::write_json(&out, &report)?;
            if let Some(p) = &args.pairs_out {
                pipeline::write_json(p, &pipeline::pairs_dump(&log, &found))?;
            }
            if let Some(p) = &args.calendars_out {
                pipeline::write_calendars(p, &calendars)?;
            }
            info!("wrote {}", out.display());
        }
        Command::Enhance(args) => {
            let model = pipeline::load_model(&existing(
                required(&args.model, &file.paths.model, "model")?,
                "model",
            )?)?;
            let report_path = existing(
                required(&args.report, &file.paths.report, "report")?,
                "report",
            )?;
            let report = pipeline::read_json(&report_path, "read report")?;
            let gamma: Option<ScaleVector> =
                match args.gamma.clone().or_else(|| file.paths.gamma.clone()) {
                    Some(p) => Some(pipeline::read_json(
                        &existing(p, "gamma")?,
                        "read scale factors",
                    )?),
                    None => None,
                };
            let out = required(&args.out, &file.paths.out, "out")?;
            let enhanced = pipeline::enhance(&model, &report, gamma.as_ref())?;
            pipeline::save_model(&out, &enhanced)?;
        }
        Command::Simulate(args) => {
            let model = pipeline::load_model(&existing(
                required(&args.model, &file.paths.model, "model")?,
                "model",
            )?)?;
            let sim = sim_config(&args.sim, &file)?;
            let runs = runs(&args.sim, &file)?;
            let dir = required(&args.out_dir, &file.paths.out_dir, "out-dir")?;
            let outputs = pipeline::simulate_runs(&model, &sim, runs)?;
            pipeline::write_runs(&dir, &outputs, args.trace_timers)?;
        }
        Command::Evaluate(args) => {
            let reference = pipeline::load_log(&log_source(&args.log, &file)?)?;
            let mut paths = args.sims.clone();
            if let Some(dir) = &args.sim_dir {
                paths.extend(sim_dir_logs(dir)?);
            }
            if paths.is_empty() {
                return Err(CliError::Usage("give --sim or --sim-dir".into()));
            }
            let mut logs = Vec::new();
            for p in paths {
                let file = std::fs::File::open(&p).map_err(|e| {
                    CliError::validation("read log", format!("{}: {e}", p.display()))
                })?;
                logs.push(parse_csv_log(file, &ColumnMapping::default()).map_err(|e| {
                    CliError::validation("read log", format!("{}: {e}", p.display()))
                })?);
            }
            let out = required(&args.out, &file.paths.out, "out")?;
            let report = pipeline::evaluate(&reference, &logs)?;
            pipeline::write_json(&out, &report)?;
        }
        Command::Optimize(args) => {
            let model = pipeline::load_model(&existing(
                required(&args.model, &file.paths.model, "model")?,
                "model",
            )?)?;
            let src = log_source(&args.log, &file)?;
            let delay = delay_config(&args.delay, &file)?;
            let seed = resolve_seed(args.seed, &file)?;
            let tpe = tpe_config(&args.tpe, &file, seed)?;
            let out = required(&args.out, &file.paths.out, "out")?;
            let log = pipeline::load_log(&src)?;
            let result = pipeline::run_optimize(&model, &log, &delay, &tpe)?;
            pipeline::save_model(&out, &result.model)?;
            if let Some(p) = args.history.clone().or_else(|| file.paths.history.clone()) {
                pipeline::write_json(&p, &result.history)?;
            }
            if let Some(p) = &args.report_out {
                pipeline::write_json(p, &result.report)?;
            }
        }
        Command::Full(args) => {
            let model = existing(required(&args.model, &file.paths.model, "model")?, "model")?;
            let log = log_source(&args.log, &file)?;
            let delay = delay_config(&args.delay, &file)?;
            let seed = resolve_seed(args.sim.seed, &file)?;
            let tpe = if args.optimize {
                Some(tpe_config(&args.tpe, &file, seed)?)
            } else {
                None
            };
            let opts = FullOptions {
                log,
                model,
                calendars: calendar_source(&args.calendars, &file, None)?,
                delay,
                tpe,
                traces: args.sim.traces.or(file.simulation.traces),
                start: start_instant(&args.sim, &file)?,
                runs: runs(&args.sim, &file)?,
                seed,
                event_budget: args
                    .sim
                    .event_budget
                    .or(file.simulation.event_budget)
                    .unwrap_or(DEFAULT_EVENT_BUDGET),
                out_dir: required(&args.out_dir, &file.paths.out_dir, "out-dir")?,
            };
            pipeline::run_full(&opts)?;
        }
        Command::Rediscover(args) => {
            let model = pipeline::load_model(&existing(
                required(&args.model, &file.paths.model, "model")?,
                "model",
            )?)?;
            let cfg = HarnessConfig {
                sim: sim_config(&args.sim, &file)?,
                delay: delay_config(&args.delay, &file)?,
                estimators: if args.estimators.is_empty() {
                    HarnessConfig::default().estimators
                } else {
                    args.estimators.clone()
                },
            };
            let out = required(&args.out, &file.paths.out, "out")?;
            let (report, sim) = rediscovery_harness(&model, &cfg)?;
            pipeline::write_json(&out, &report)?;
            if let Some(p) = &args.log_out {
                pipeline::write_log(p, &sim.log)?;
            }
            if let Some(p) = &args.timers_out {
                pipeline::write_timer_draws(p, &sim)?;
            }
        }
    }
    Ok(())
}

fn init_logging(verbose: u8, quiet: bool) {
    let level = match (quiet, verbose) {
        (true, _) => log::LevelFilter::Error,
        (false, 0) => log::LevelFilter::Warn,
        (false, 1) => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .try_init();
}

/// Parses `args`, runs the subcommand and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            // Help and version requests exit 0; everything else is a usage error.
            return if code == 0 {
                EXIT_OK
            } else {
                crate::error::EXIT_USAGE
            };
        }
    };
    init_logging(cli.verbose, cli.quiet);
    match run_command(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
