//! Tuning of per-activity delay scale factors with a Tree-structured Parzen
//! Estimator.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};
use thiserror::Error;

use crate::bps_model::{inject_timers, scale_report, BpsModel, ModelError, ScaleVector};
use crate::delay_discovery::{discover_delays, DelayConfig, DelayError, DelayReport};
use crate::log_io::ActivityInstanceLog;
use crate::metrics::{red_distance, MetricError};
use crate::simulator::{simulate_many, SimulationConfig, SimulationError};

/// Keeps the proposal stream independent from the simulation seeds.
const PROPOSAL_STREAM: u64 = 0x7A5E_11D0_0C0F_FEE5;

#[derive(Debug, Error)]
pub enum OptimizeError {
    #[error("invalid optimizer config: {0}")]
    Config(String),
    #[error("log needs at least two activity instances, got {0}")]
    LogTooSmall(usize),
    #[error(transparent)]
    Delay(#[from] DelayError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("all {0} trials failed; first failure: {1}")]
    AllTrialsFailed(usize, String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TpeConfig {
    pub iterations: usize,
    pub gamma_max: f64,
    pub startup_trials: usize,
    pub good_quantile: f64,
    pub candidates_per_step: usize,
    pub seed: u64,
    pub runs_per_eval: usize,
}

impl Default for TpeConfig {
    fn default() -> Self {
        Self {
            iterations: 100,
            gamma_max: 10.0,
            startup_trials: 10,
            good_quantile: 0.25,
            candidates_per_step: 24,
            seed: 42,
            runs_per_eval: 1,
        }
    }
}

impl TpeConfig {
    pub fn validate(&self) -> Result<(), OptimizeError> {
        let bad = |m: String| Err(OptimizeError::Config(m));
        if self.startup_trials < 1 || self.iterations < self.startup_trials {
            return bad(format!(
                "need iterations >= startup_trials >= 1, got {} and {}",
                self.iterations, self.startup_trials
            ));
        }
        if !(self.good_quantile > 0.0 && self.good_quantile < 1.0) {
            return bad(format!(
                "good_quantile must lie in (0, 1), got {}",
                self.good_quantile
            ));
        }
        if !(self.gamma_max.is_finite() && self.gamma_max > 0.0) {
            return bad(format!(
                "gamma_max must be positive, got {}",
                self.gamma_max
            ));
        }
        if self.candidates_per_step == 0 || self.runs_per_eval == 0 {
            return bad("candidates_per_step and runs_per_eval must be at least 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub gamma: ScaleVector,
    /// Mean RED distance; `None` when the trial failed.
    pub objective: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl Trial {
    fn score(&self) -> f64 {
        self.objective.unwrap_or(f64::INFINITY)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialHistory {
    pub trials: Vec<Trial>,
    pub best: usize,
}

impl TrialHistory {
    pub fn best_trial(&self) -> &Trial {
        &self.trials[self.best]
    }
}

#[derive(Debug, Clone)]
pub struct OptimizationResult {
    pub model: BpsModel,
    pub history: TrialHistory,
    /// Unscaled report discovered on the training half.
    pub report: DelayReport,
    /// Report scaled by the best trial's factors.
    pub best_report: DelayReport,
}

/// Splits a log by end time: the first half of the instances (rounded
/// down) trains, the rest validates. Traces may straddle the boundary.
pub fn split_log(log: &ActivityInstanceLog) -> (ActivityInstanceLog, ActivityInstanceLog) {
    let mut order: Vec<usize> = (0..log.len()).collect();
    order.sort_by_key(|&i| (log.instances[i].end, i));
    let half = log.len() / 2;
    let pick = |idx: &[usize]| {
        ActivityInstanceLog::new(idx.iter().map(|&i| log.instances[i].clone()).collect())
    };
    (pick(&order[..half]), pick(&order[half..]))
}

/// Simulation settings shared by every trial: as many traces as the
/// validation half holds, starting where it starts, with a fixed seed.
pub fn evaluation_config(validation: &ActivityInstanceLog, seed: u64) -> SimulationConfig {
    SimulationConfig {
        num_traces: validation.num_traces().max(1),
        seed,
        start_instant: validation
            .span()
            .map_or(SimulationConfig::default().start_instant, |s| s.start),
        ..SimulationConfig::default()
    }
}

struct Objective<'a> {
    model: &'a BpsModel,
    report: &'a DelayReport,
    validation: &'a ActivityInstanceLog,
    sim: SimulationConfig,
    runs: usize,
}

impl Objective<'_> {
    fn evaluate(&self, gamma: &ScaleVector) -> Result<f64, String> {
        let scaled = scale_report(self.report, gamma).map_err(|e| e.to_string())?;
        let enhanced = inject_timers(self.model, &scaled).map_err(|e| e.to_string())?;
        let runs = simulate_many(&enhanced, &self.sim, self.runs)
            .map_err(|e: SimulationError| e.to_string())?;
        let mut total = 0.0;
        for run in &runs {
            total += red_distance(&run.log, self.validation).map_err(|e| e.to_string())?;
        }
        let mean = total / runs.len() as f64;
        if mean.is_finite() {
            Ok(mean)
        } else {
            Err("non-finite objective".into())
        }
    }
}

/// One-dimensional Parzen estimator with Gaussian kernels truncated to
/// `[0, hi]`, mixed with a uniform prior.
struct Parzen {
    kernels: Vec<(f64, f64)>,
    hi: f64,
}

impl Parzen {
    fn fit(points: &[f64], hi: f64) -> Self {
        let mut sorted: Vec<f64> = points.to_vec();
        sorted.sort_by(f64::total_cmp);
        let min_bw = hi / (100.0f64).min(sorted.len() as f64 + 1.0);
        let kernels = (0..sorted.len())
            .map(|i| {
                let left = if i == 0 {
                    sorted[i]
                } else {
                    sorted[i] - sorted[i - 1]
                };
                let right = if i + 1 == sorted.len() {
                    hi - sorted[i]
                } else {
                    sorted[i + 1] - sorted[i]
                };
                (sorted[i], left.max(right).clamp(min_bw, hi))
            })
            .collect();
        Self { kernels, hi }
    }

    fn components(&self) -> usize {
        self.kernels.len() + 1
    }

    fn pdf(&self, x: f64) -> f64 {
        let prior = 1.0 / self.hi;
        let mut sum = prior;
        for &(mu, sigma) in &self.kernels {
            let n = Normal::new(mu, sigma).expect("positive bandwidth");
            let mass = n.cdf(self.hi) - n.cdf(0.0);
            if mass > 0.0 {
                sum += n.pdf(x) / mass;
            }
        }
        sum / self.components() as f64
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        let k = rng.random_range(0..self.components());
        if k == self.kernels.len() {
            return rng.random_range(0.0..=self.hi);
        }
        let (mu, sigma) = self.kernels[k];
        let normal = rand_distr::Normal::new(mu, sigma).expect("positive bandwidth");
        for _ in 0..100 {
            let x = rand_distr::Distribution::sample(&normal, rng);
            if (0.0..=self.hi).contains(&x) {
                return x;
            }
        }
        mu.clamp(0.0, self.hi)
    }
}

fn propose<R: Rng>(rng: &mut R, dims: &[String], trials: &[Trial], cfg: &TpeConfig) -> ScaleVector {
    let uniform = |rng: &mut R| ScaleVector {
        gamma: dims
            .iter()
            .map(|d| (d.clone(), rng.random_range(0.0..=cfg.gamma_max)))
            .collect(),
    };
    let mut scored: Vec<&Trial> = trials.iter().filter(|t| t.objective.is_some()).collect();
    if trials.len() < cfg.startup_trials || scored.len() < 2 {
        return uniform(rng);
    }
    scored.sort_by(|a, b| a.score().total_cmp(&b.score()));
    let n_good =
        ((cfg.good_quantile * scored.len() as f64).ceil() as usize).clamp(1, scored.len() - 1);
    let (good, bad) = scored.split_at(n_good);
    let models: Vec<(Parzen, Parzen)> = dims
        .iter()
        .map(|d| {
            let g: Vec<f64> = good.iter().map(|t| t.gamma.factor(d)).collect();
            let b: Vec<f64> = bad.iter().map(|t| t.gamma.factor(d)).collect();
            (
                Parzen::fit(&g, cfg.gamma_max),
                Parzen::fit(&b, cfg.gamma_max),
            )
        })
        .collect();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for _ in 0..cfg.candidates_per_step {
        let x: Vec<f64> = models.iter().map(|(l, _)| l.sample(rng)).collect();
        let score: f64 = models
            .iter()
            .zip(&x)
            .map(|((l, g), &v)| l.pdf(v).ln() - g.pdf(v).ln())
            .sum();
        if best.as_ref().is_none_or(|(s, _)| score > *s) {
            best = Some((score, x));
        }
    }
    let (_, x) = best.expect("at least one candidate");
    ScaleVector {
        gamma: dims.iter().cloned().zip(x).collect(),
    }
}

/// Discovers delays on the training half of `log`, then searches scale
/// factors whose enhanced model best reproduces the validation half.
///
/// Every trial simulates with the same seed, so the objective is a
/// deterministic function of the scale factors.
pub fn optimize(
    model: &BpsModel,
    log: &ActivityInstanceLog,
    delay_cfg: &DelayConfig,
    cfg: &TpeConfig,
) -> Result<OptimizationResult, OptimizeError> {
    cfg.validate()?;
    delay_cfg.validate()?;
    model.validate()?;
    if log.len() < 2 {
        return Err(OptimizeError::LogTooSmall(log.len()));
    }
    let (train, validation) = split_log(log);
    let report = discover_delays(&train, &model.resource_calendars(), delay_cfg)?;
    let dims: Vec<String> = report
        .activity_labels()
        .into_iter()
        .map(String::from)
        .collect();

    let sim = evaluation_config(&validation, cfg.seed);
    let objective = Objective {
        model,
        report: &report,
        validation: &validation,
        sim,
        runs: cfg.runs_per_eval,
    };

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ PROPOSAL_STREAM);
    let mut trials: Vec<Trial> = Vec::with_capacity(cfg.iterations);
    for k in 0..cfg.iterations {
        let gamma = if k == 0 {
            ScaleVector::uniform(&dims, 1.0)
        } else if dims.is_empty() {
            // Nothing to scale; every trial equals the first.
            trials.push(trials[0].clone());
            continue;
        } else {
            propose(&mut rng, &dims, &trials, cfg)
        };
        let trial = match objective.evaluate(&gamma) {
            Ok(v) => Trial {
                gamma,
                objective: Some(v),
                error: None,
            },
            Err(e) => Trial {
                gamma,
                objective: None,
                error: Some(e),
            },
        };
        trials.push(trial);
    }

    let best = (0..trials.len())
        .filter(|&i| trials[i].objective.is_some())
        .min_by(|&a, &b| {
            trials[a]
                .score()
                .total_cmp(&trials[b].score())
                .then(a.cmp(&b))
        });
    let Some(best) = best else {
        let first = trials[0].error.clone().unwrap_or_default();
        return Err(OptimizeError::AllTrialsFailed(trials.len(), first));
    };
    let best_report = scale_report(&report, &trials[best].gamma)?;
    let enhanced = inject_timers(model, &best_report)?;
    Ok(OptimizationResult {
        model: enhanced,
        history: TrialHistory { trials, best },
        report,
        best_report,
    })
}

/// Mean RED of `runs` simulations of `model` against `reference`.
pub fn mean_red(
    model: &BpsModel,
    reference: &ActivityInstanceLog,
    sim: &SimulationConfig,
    runs: usize,
) -> Result<f64, String> {
    let runs = simulate_many(model, sim, runs).map_err(|e| e.to_string())?;
    let mut total = 0.0;
    for run in &runs {
        total += red_distance(&run.log, reference).map_err(|e| e.to_string())?;
    }
    Ok(total / runs.len() as f64)
}

/// Scale factors of the best trial, for reporting.
pub fn best_factors(history: &TrialHistory) -> BTreeMap<String, f64> {
    history.best_trial().gamma.gamma.clone()
}
