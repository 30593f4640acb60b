//! Stages shared by the subcommands, with artifact I/O.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use delayminer_core::bps_model::{self, inject_timers, scale_report, BpsModel, ScaleVector};
use delayminer_core::calendars::{discover_calendars, DiscoveryParams, ResourceCalendar};
use delayminer_core::delay_discovery::{self, DelayConfig, DelayReport, Discovery};
use delayminer_core::log_io::{self, ActivityInstanceLog, ColumnMapping};
use delayminer_core::metrics::{cycle_times, mean_ci95, red_distance, summarize, MeanCi, Summary};
use delayminer_core::optimizer::{optimize, TpeConfig, TrialHistory};
use delayminer_core::simulator::{simulate_many, SimulationConfig, SimulationOutput};
use delayminer_core::time::format_timestamp;
use log::info;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone)]
pub struct LogSource {
    pub path: PathBuf,
    pub mapping: ColumnMapping,
    /// Input holds one row per lifecycle event instead of per instance.
    pub events: bool,
}

impl LogSource {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        Self {
            path: path.into(),
            mapping: ColumnMapping::default(),
            events: false,
        }
    }
}

pub fn load_log(src: &LogSource) -> Result<ActivityInstanceLog> {
    let log = if src.events {
        log_io::collapse_events(&src.path, &src.mapping)
    } else {
        log_io::parse_log(&src.path, &src.mapping)
    }
    .map_err(|e| CliError::validation("read log", e))?;
    if log.is_empty() {
        return Err(CliError::validation(
            "read log",
            format!("{} contains no activity instances", src.path.display()),
        ));
    }
    info!(
        "read {} instances in {} traces from {}",
        log.len(),
        log.num_traces(),
        src.path.display()
    );
    Ok(log)
}

pub fn write_log(path: &Path, log: &ActivityInstanceLog) -> Result<()> {
    ensure_parent(path)?;
    log_io::write_log(log, path).map_err(|e| CliError::runtime("write log", e))
}

pub fn load_model(path: &Path) -> Result<BpsModel> {
    bps_model::load_model(path).map_err(|e| CliError::from_model("read model", e))
}

pub fn save_model(path: &Path, model: &BpsModel) -> Result<()> {
    ensure_parent(path)?;
    bps_model::save_model(model, path).map_err(|e| CliError::runtime("write model", e))
}

fn ensure_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => fs::create_dir_all(dir)
            .map_err(|e| CliError::runtime("create directory", format!("{}: {e}", dir.display()))),
        _ => Ok(()),
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    ensure_parent(path)?;
    let mut text =
        serde_json::to_string_pretty(value).map_err(|e| CliError::runtime("serialise", e))?;
    text.push('\n');
    fs::write(path, text)
        .map_err(|e| CliError::runtime("write artifact", format!("{}: {e}", path.display())))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path, stage: &'static str) -> Result<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::validation(stage, format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::validation(stage, format!("{}: {e}", path.display())))
}

/// Where resource calendars come from.
#[derive(Debug, Clone)]
pub enum CalendarSource {
    /// JSON list of resource calendars.
    File(PathBuf),
    /// Pools of a simulation model.
    Model(PathBuf),
    /// Discovered from the log itself.
    Discover(DiscoveryParams),
}

pub fn resolve_calendars(
    src: &CalendarSource,
    log: &ActivityInstanceLog,
) -> Result<BTreeMap<String, ResourceCalendar>> {
    match src {
        CalendarSource::File(path) => {
            let list: Vec<ResourceCalendar> = read_json(path, "read calendars")?;
            let mut out = BTreeMap::new();
            for cal in list {
                cal.calendar.validate().map_err(|e| {
                    CliError::validation("read calendars", format!("{}: {e}", cal.resource))
                })?;
                out.insert(cal.resource.clone(), cal);
            }
            Ok(out)
        }
        CalendarSource::Model(path) => Ok(load_model(path)?.resource_calendars()),
        CalendarSource::Discover(params) => discover_calendars(log, *params)
            .map_err(|e| CliError::validation("discover calendars", e)),
    }
}

pub fn write_calendars(path: &Path, calendars: &BTreeMap<String, ResourceCalendar>) -> Result<()> {
    let list: Vec<&ResourceCalendar> = calendars.values().collect();
    write_json(path, &list)
}

pub fn discover(
    log: &ActivityInstanceLog,
    calendars: &BTreeMap<String, ResourceCalendar>,
    cfg: &DelayConfig,
) -> Result<Discovery> {
    let found = delay_discovery::discover(log, calendars, cfg)
        .map_err(|e| CliError::validation("discover", e))?;
    info!(
        "{} causal pairs, {} activities with extraneous delays",
        found.pairs.pairs.len(),
        found.report.activities.len()
    );
    Ok(found)
}

/// Debug view of a discovery run.
#[derive(Debug, Clone, Serialize)]
pub struct PairsDump {
    pub concurrent: Vec<(String, String)>,
    pub pairs: Vec<PairRow>,
    pub orphans: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct PairRow {
    pub trace_id: String,
    pub source: String,
    pub target: String,
    pub source_end: String,
    pub target_start: String,
    pub waiting: i64,
    pub extraneous: i64,
}

pub fn pairs_dump(log: &ActivityInstanceLog, found: &Discovery) -> PairsDump {
    PairsDump {
        concurrent: found
            .relation
            .unordered_pairs()
            .into_iter()
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .collect(),
        pairs: found
            .delays
            .iter()
            .map(|d| {
                let (s, t) = (&log.instances[d.source], &log.instances[d.target]);
                PairRow {
                    trace_id: t.trace_id.clone(),
                    source: s.activity.clone(),
                    target: t.activity.clone(),
                    source_end: format_timestamp(s.end),
                    target_start: format_timestamp(t.start),
                    waiting: d.waiting,
                    extraneous: d.extraneous,
                }
            })
            .collect(),
        orphans: found.pairs.orphans.len(),
    }
}

pub fn enhance(
    model: &BpsModel,
    report: &DelayReport,
    gamma: Option<&ScaleVector>,
) -> Result<BpsModel> {
    let report = match gamma {
        Some(g) => scale_report(report, g).map_err(|e| CliError::validation("enhance", e))?,
        None => report.clone(),
    };
    let enhanced = inject_timers(model, &report).map_err(|e| CliError::validation("enhance", e))?;
    info!("injected {} timers", enhanced.timers.len());
    Ok(enhanced)
}

pub fn simulate_runs(
    model: &BpsModel,
    sim: &SimulationConfig,
    runs: usize,
) -> Result<Vec<SimulationOutput>> {
    let out =
        simulate_many(model, sim, runs).map_err(|e| CliError::from_simulation("simulate", e))?;
    info!("simulated {runs} runs of {} traces", sim.num_traces);
    Ok(out)
}

pub fn run_file_name(k: usize, runs: usize) -> String {
    let width = (runs.saturating_sub(1)).to_string().len().max(2);
    format!("run_{k:0width$}")
}

#[derive(Debug, Serialize)]
struct TimerRow<'a> {
    trace_id: &'a str,
    timer: &'a str,
    activity: &'a str,
    attribution: String,
    timer_start: String,
    delay_seconds: i64,
    instance_start: String,
    instance_end: String,
}

pub fn write_timer_draws(path: &Path, out: &SimulationOutput) -> Result<()> {
    ensure_parent(path)?;
    let err =
        |e: csv::Error| CliError::runtime("write timer draws", format!("{}: {e}", path.display()));
    let mut writer = csv::Writer::from_path(path).map_err(err)?;
    for d in &out.timer_draws {
        let inst = d.instance.map(|i| &out.log.instances[i]);
        writer
            .serialize(TimerRow {
                trace_id: &d.trace_id,
                timer: &d.timer,
                activity: &d.activity,
                attribution: d.attribution.to_string(),
                timer_start: format_timestamp(d.start),
                delay_seconds: d.delay,
                instance_start: inst.map(|i| format_timestamp(i.start)).unwrap_or_default(),
                instance_end: inst.map(|i| format_timestamp(i.end)).unwrap_or_default(),
            })
            .map_err(err)?;
    }
    writer
        .flush()
        .map_err(|e| CliError::runtime("write timer draws", e))
}

/// Writes `run_XX.csv` (and `run_XX.timers.csv`) per run; returns the log paths.
pub fn write_runs(
    dir: &Path,
    outputs: &[SimulationOutput],
    trace_timers: bool,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)
        .map_err(|e| CliError::runtime("create directory", format!("{}: {e}", dir.display())))?;
    let mut paths = Vec::new();
    for (k, out) in outputs.iter().enumerate() {
        let stem = run_file_name(k, outputs.len());
        let path = dir.join(format!("{stem}.csv"));
        write_log(&path, &out.log)?;
        if trace_timers {
            write_timer_draws(&dir.join(format!("{stem}.timers.csv")), out)?;
        }
        paths.push(path);
    }
    Ok(paths)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub reference_traces: usize,
    pub runs: usize,
    /// RED distance of each simulated log to the reference.
    pub red: Vec<f64>,
    pub red_mean: MeanCi,
    pub cycle_time_reference: Summary,
    /// Pooled over every run.
    pub cycle_time_simulated: Summary,
    /// Mean cycle time across runs.
    pub cycle_time_mean: MeanCi,
}

pub fn evaluate(
    reference: &ActivityInstanceLog,
    simulated: &[ActivityInstanceLog],
) -> Result<EvaluationReport> {
    if simulated.is_empty() {
        return Err(CliError::validation("evaluate", "no simulated logs given"));
    }
    let mut red = Vec::with_capacity(simulated.len());
    let mut pooled = Vec::new();
    let mut run_means = Vec::new();
    for sim in simulated {
        red.push(red_distance(sim, reference).map_err(|e| CliError::validation("evaluate", e))?);
        let ct = cycle_times(sim);
        run_means.push(ct.iter().sum::<f64>() / ct.len().max(1) as f64);
        pooled.extend(ct);
    }
    let summary =
        |v: &[f64]| summarize(v).ok_or_else(|| CliError::validation("evaluate", "empty log"));
    Ok(EvaluationReport {
        reference_traces: reference.num_traces(),
        runs: simulated.len(),
        red_mean: mean_ci95(&red).map_err(|e| CliError::validation("evaluate", e))?,
        red,
        cycle_time_reference: summary(&cycle_times(reference))?,
        cycle_time_simulated: summary(&pooled)?,
        cycle_time_mean: mean_ci95(&run_means).map_err(|e| CliError::validation("evaluate", e))?,
    })
}

pub struct OptimizeOutput {
    pub model: BpsModel,
    pub history: TrialHistory,
    pub report: DelayReport,
}

pub fn run_optimize(
    model: &BpsModel,
    log: &ActivityInstanceLog,
    delay: &DelayConfig,
    tpe: &TpeConfig,
) -> Result<OptimizeOutput> {
    let result =
        optimize(model, log, delay, tpe).map_err(|e| CliError::from_optimize("optimize", e))?;
    let best = result.history.best_trial();
    info!(
        "best of {} trials: #{} with RED {:?}",
        result.history.trials.len(),
        result.history.best,
        best.objective
    );
    Ok(OptimizeOutput {
        model: result.model,
        history: result.history,
        report: result.best_report,
    })
}

pub struct FullOptions {
    pub log: LogSource,
    pub model: PathBuf,
    /// Defaults to the model's pools.
    pub calendars: Option<CalendarSource>,
    pub delay: DelayConfig,
    pub tpe: Option<TpeConfig>,
    /// Trace count and start default to the input log's.
    pub traces: Option<usize>,
    pub start: Option<i64>,
    pub runs: usize,
    pub seed: u64,
    pub event_budget: u64,
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Serialize)]
pub struct FullEvaluation {
    pub baseline: EvaluationReport,
    pub enhanced: EvaluationReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failed_stage: Option<&'static str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// Paths relative to the output directory, in creation order.
    pub artifacts: Vec<String>,
}

/// discover → enhance (or optimize) → simulate → evaluate.
///
/// Always writes `manifest.json`; on failure it is marked `failed` and lists
/// the artifacts written so far.
pub fn run_full(opts: &FullOptions) -> Result<Manifest> {
    let mut artifacts = Vec::new();
    let result = full_stages(opts, &mut artifacts);
    let manifest = match &result {
        Ok(()) => Manifest {
            status: "complete",
            failed_stage: None,
            error: None,
            artifacts,
        },
        Err(e) => Manifest {
            status: "failed",
            failed_stage: Some(e.stage()),
            error: Some(e.to_string()),
            artifacts,
        },
    };
    write_json(&opts.out_dir.join("manifest.json"), &manifest)?;
    result.map(|()| manifest)
}

fn full_stages(opts: &FullOptions, artifacts: &mut Vec<String>) -> Result<()> {
    let dir = &opts.out_dir;
    let mut record = |name: String| artifacts.push(name);
    let log = load_log(&opts.log)?;
    let model = load_model(&opts.model)?;
    let calendars = match &opts.calendars {
        Some(src) => resolve_calendars(src, &log)?,
        None => model.resource_calendars(),
    };
    write_calendars(&dir.join("calendars.json"), &calendars)?;
    record("calendars.json".into());

    let (report, enhanced) = match &opts.tpe {
        Some(tpe) => {
            let tpe = TpeConfig {
                seed: opts.seed,
                ..*tpe
            };
            let out = run_optimize(&model, &log, &opts.delay, &tpe)?;
            write_json(&dir.join("history.json"), &out.history)?;
            record("history.json".into());
            (out.report, out.model)
        }
        None => {
            let report = discover(&log, &calendars, &opts.delay)?.report;
            let enhanced = enhance(&model, &report, None)?;
            (report, enhanced)
        }
    };
    write_json(&dir.join("report.json"), &report)?;
    record("report.json".into());
    save_model(&dir.join("enhanced_model.json"), &enhanced)?;
    record("enhanced_model.json".into());

    let sim = SimulationConfig {
        num_traces: opts.traces.unwrap_or_else(|| log.num_traces()),
        seed: opts.seed,
        start_instant: opts
            .start
            .or_else(|| log.span().map(|s| s.start))
            .unwrap_or(SimulationConfig::default().start_instant),
        event_budget: opts.event_budget,
    };
    let mut evaluations = BTreeMap::new();
    for (name, m) in [("baseline", &model), ("enhanced", &enhanced)] {
        let outputs = simulate_runs(m, &sim, opts.runs)?;
        let sub = Path::new("simulations").join(name);
        for p in write_runs(&dir.join(&sub), &outputs, false)? {
            let rel = sub.join(p.file_name().expect("file name"));
            record(rel.to_string_lossy().replace('\\', "/"));
        }
        let logs: Vec<ActivityInstanceLog> = outputs.into_iter().map(|o| o.log).collect();
        evaluations.insert(name, evaluate(&log, &logs)?);
    }
    let evaluation = FullEvaluation {
        baseline: evaluations.remove("baseline").expect("baseline evaluated"),
        enhanced: evaluations.remove("enhanced").expect("enhanced evaluated"),
    };
    info!(
        "RED baseline {:.4}, enhanced {:.4}",
        evaluation.baseline.red_mean.mean, evaluation.enhanced.red_mean.mean
    );
    write_json(&dir.join("evaluation.json"), &evaluation)?;
    record("evaluation.json".into());
    Ok(())
}
