//! Re-discovery of known delays: simulate a model carrying timers, then
//! check how well each estimator recovers them from the log.

use std::collections::{BTreeMap, HashMap};

use delayminer_core::delay_discovery::{discover, DelayConfig, Estimator};
use delayminer_core::metrics::{smape, timer_rediscovery_score, TimerScore};
use delayminer_core::simulator::{simulate, SimulationConfig, SimulationOutput};
use delayminer_core::timeline::CausalPair;
use delayminer_core::{Attribution, BpsModel};
use serde::Serialize;

use crate::error::{CliError, Result};

#[derive(Debug, Clone)]
pub struct HarnessConfig {
    pub sim: SimulationConfig,
    /// The estimator field is ignored; see `estimators`.
    pub delay: DelayConfig,
    pub estimators: Vec<Estimator>,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        Self {
            sim: SimulationConfig::default(),
            delay: DelayConfig::default(),
            estimators: vec![
                Estimator::Naive,
                Estimator::EclipseAware,
                Estimator::EclipseAwareExtrapolated,
            ],
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EstimatorScore {
    pub estimator: Estimator,
    /// SMAPE of estimated against injected delay over every causal pair.
    pub pair_smape: f64,
    pub pairs: usize,
    pub timers: TimerScore,
    /// Mean discovered delay per activity that passed the filter.
    pub discovered: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RediscoveryReport {
    pub traces: usize,
    pub instances: usize,
    /// Mean sampled delay per timer-carrying activity.
    pub injected: BTreeMap<String, f64>,
    pub scores: Vec<EstimatorScore>,
}

impl RediscoveryReport {
    pub fn score(&self, estimator: Estimator) -> Option<&EstimatorScore> {
        self.scores.iter().find(|s| s.estimator == estimator)
    }
}

/// Mean sampled delay per activity whose timers match `attribution`.
pub fn injected_means(out: &SimulationOutput, attribution: Attribution) -> BTreeMap<String, f64> {
    let mut acc: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for d in out
        .timer_draws
        .iter()
        .filter(|d| d.attribution == attribution)
    {
        let e = acc.entry(d.activity.clone()).or_default();
        e.0 += d.delay as f64;
        e.1 += 1;
    }
    acc.into_iter()
        .map(|(k, (sum, n))| (k, sum / n as f64))
        .collect()
}

/// Injected delay of each pair: ex-ante draws before its target plus
/// ex-post draws after its source.
pub fn injected_pair_delays(out: &SimulationOutput, pairs: &[CausalPair]) -> Vec<f64> {
    let mut before: HashMap<usize, i64> = HashMap::new();
    let mut after: HashMap<usize, i64> = HashMap::new();
    for d in &out.timer_draws {
        let Some(i) = d.instance else { continue };
        let slot = match d.attribution {
            Attribution::ExAnte => &mut before,
            Attribution::ExPost => &mut after,
        };
        *slot.entry(i).or_default() += d.delay;
    }
    pairs
        .iter()
        .map(|p| {
            (before.get(&p.target).copied().unwrap_or(0)
                + after.get(&p.source).copied().unwrap_or(0)) as f64
        })
        .collect()
}

/// Scores every estimator on one log simulated from `model`. Calendars come
/// from the model's pools, as they would from a calendar discovery step.
pub fn score_log(
    model: &BpsModel,
    out: &SimulationOutput,
    cfg: &HarnessConfig,
) -> Result<RediscoveryReport> {
    let calendars = model.strip_timers().resource_calendars();
    let injected = injected_means(out, cfg.delay.attribution);
    let mut scores = Vec::new();
    for &estimator in &cfg.estimators {
        let delay = DelayConfig {
            estimator,
            ..cfg.delay
        };
        let found = discover(&out.log, &calendars, &delay)
            .map_err(|e| CliError::validation("rediscover", e))?;
        let pairs: Vec<CausalPair> = found
            .delays
            .iter()
            .map(|d| CausalPair {
                source: d.source,
                target: d.target,
            })
            .collect();
        let truth = injected_pair_delays(out, &pairs);
        let estimates: Vec<f64> = found.delays.iter().map(|d| d.extraneous as f64).collect();
        let pair_smape = if pairs.is_empty() {
            0.0
        } else {
            smape(&estimates, &truth).map_err(|e| CliError::runtime("rediscover", e))?
        };
        let discovered = found.report.means();
        scores.push(EstimatorScore {
            estimator,
            pair_smape,
            pairs: pairs.len(),
            timers: timer_rediscovery_score(&injected, &discovered),
            discovered,
        });
    }
    Ok(RediscoveryReport {
        traces: out.log.num_traces(),
        instances: out.log.len(),
        injected,
        scores,
    })
}

/// Simulates a ground-truth log from `model` and scores every estimator.
pub fn rediscovery_harness(
    model: &BpsModel,
    cfg: &HarnessConfig,
) -> Result<(RediscoveryReport, SimulationOutput)> {
    let out = simulate(model, &cfg.sim).map_err(|e| CliError::from_simulation("simulate", e))?;
    let report = score_log(model, &out, cfg)?;
    Ok((report, out))
}
