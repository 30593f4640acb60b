//! Log comparison and re-discovery accuracy measures.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::log_io::ActivityInstanceLog;

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("inputs have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("empty input")]
    Empty,
    #[error("histogram has no mass")]
    ZeroMass,
    #[error("histograms use different bin widths ({0} vs {1})")]
    BinWidth(i64, i64),
}

/// Width of the RED histogram bins, in seconds.
pub const RED_BIN_WIDTH: i64 = 3600;

/// Symmetric mean absolute percentage error on the 0–2 scale. A term where
/// forecast and actual are both zero counts as zero error.
pub fn smape(forecast: &[f64], actual: &[f64]) -> Result<f64, MetricError> {
    if forecast.len() != actual.len() {
        return Err(MetricError::LengthMismatch(forecast.len(), actual.len()));
    }
    if forecast.is_empty() {
        return Err(MetricError::Empty);
    }
    let total: f64 = forecast
        .iter()
        .zip(actual)
        .map(|(&f, &a)| {
            let denom = f.abs() + a.abs();
            if denom == 0.0 {
                0.0
            } else {
                2.0 * (f - a).abs() / denom
            }
        })
        .sum();
    Ok(total / forecast.len() as f64)
}

/// Non-negative masses over equally wide bins starting at offset 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventHistogram {
    pub bins: Vec<f64>,
    pub bin_width: i64,
}

impl EventHistogram {
    pub fn new(bins: Vec<f64>, bin_width: i64) -> Self {
        Self { bins, bin_width }
    }

    /// Counts non-negative offsets into bins of `bin_width` seconds.
    pub fn from_offsets(offsets: impl IntoIterator<Item = i64>, bin_width: i64) -> Self {
        let mut bins: Vec<f64> = Vec::new();
        for off in offsets {
            let idx = off.max(0) / bin_width;
            let idx = idx as usize;
            if idx >= bins.len() {
                bins.resize(idx + 1, 0.0);
            }
            bins[idx] += 1.0;
        }
        Self { bins, bin_width }
    }

    pub fn total_mass(&self) -> f64 {
        self.bins.iter().sum()
    }
}

/// 1-D earth mover's distance with ground distance equal to the bin index
/// difference, after normalising both histograms to unit mass.
pub fn emd_1d(h1: &EventHistogram, h2: &EventHistogram) -> Result<f64, MetricError> {
    if h1.bin_width != h2.bin_width {
        return Err(MetricError::BinWidth(h1.bin_width, h2.bin_width));
    }
    let (m1, m2) = (h1.total_mass(), h2.total_mass());
    if m1 <= 0.0 || m2 <= 0.0 || !m1.is_finite() || !m2.is_finite() {
        return Err(MetricError::ZeroMass);
    }
    let len = h1.bins.len().max(h2.bins.len());
    let (mut c1, mut c2, mut dist) = (0.0, 0.0, 0.0);
    for k in 0..len {
        c1 += h1.bins.get(k).copied().unwrap_or(0.0) / m1;
        c2 += h2.bins.get(k).copied().unwrap_or(0.0) / m2;
        dist += (c1 - c2).abs();
    }
    Ok(dist)
}

/// Histogram of start and end events relative to their trace's first start.
pub fn relative_event_histogram(log: &ActivityInstanceLog, bin_width: i64) -> EventHistogram {
    let mut offsets = Vec::with_capacity(log.len() * 2);
    for indices in log.traces().values() {
        let trace_start = indices
            .iter()
            .map(|&i| log.instances[i].start)
            .min()
            .unwrap_or(0);
        for &i in indices {
            let inst = &log.instances[i];
            offsets.push(inst.start - trace_start);
            offsets.push(inst.end - trace_start);
        }
    }
    EventHistogram::from_offsets(offsets, bin_width)
}

/// Relative event distribution distance between two logs.
pub fn red_distance(
    sim: &ActivityInstanceLog,
    reference: &ActivityInstanceLog,
) -> Result<f64, MetricError> {
    if sim.is_empty() || reference.is_empty() {
        return Err(MetricError::Empty);
    }
    emd_1d(
        &relative_event_histogram(sim, RED_BIN_WIDTH),
        &relative_event_histogram(reference, RED_BIN_WIDTH),
    )
}

/// Min / quartiles / mean / max.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub mean: f64,
    pub q3: f64,
    pub max: f64,
}

/// Quantile by linear interpolation between order statistics.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn summarize(values: &[f64]) -> Option<Summary> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Some(Summary {
        min: sorted[0],
        q1: quantile_sorted(&sorted, 0.25),
        median: quantile_sorted(&sorted, 0.5),
        mean: sorted.iter().sum::<f64>() / sorted.len() as f64,
        q3: quantile_sorted(&sorted, 0.75),
        max: sorted[sorted.len() - 1],
    })
}

pub type CycleTimeStats = Summary;

/// Per-trace cycle times: last end minus first start, in seconds.
pub fn cycle_times(log: &ActivityInstanceLog) -> Vec<f64> {
    log.traces()
        .values()
        .map(|indices| {
            let start = indices
                .iter()
                .map(|&i| log.instances[i].start)
                .min()
                .unwrap_or(0);
            let end = indices
                .iter()
                .map(|&i| log.instances[i].end)
                .max()
                .unwrap_or(0);
            (end - start) as f64
        })
        .collect()
}

pub fn cycle_time_stats(log: &ActivityInstanceLog) -> Result<CycleTimeStats, MetricError> {
    summarize(&cycle_times(log)).ok_or(MetricError::Empty)
}

/// Mean with the half-width of a 95% normal-approximation confidence
/// interval (zero for fewer than two values).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanCi {
    pub mean: f64,
    pub half_width: f64,
}

pub fn mean_ci95(values: &[f64]) -> Result<MeanCi, MetricError> {
    if values.is_empty() {
        return Err(MetricError::Empty);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let half_width = if values.len() < 2 {
        0.0
    } else {
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        1.96 * (var / n).sqrt()
    };
    Ok(MeanCi { mean, half_width })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimerScore {
    pub precision: f64,
    pub recall: f64,
    pub smape: f64,
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
}

/// Precision and recall of discovered timers over activity keys, plus the
/// SMAPE of their mean delays over the union of keys (missing side = 0).
/// With nothing injected and nothing discovered, precision and recall are 1.
pub fn timer_rediscovery_score(
    injected: &BTreeMap<String, f64>,
    discovered: &BTreeMap<String, f64>,
) -> TimerScore {
    let keys: BTreeSet<&String> = injected.keys().chain(discovered.keys()).collect();
    let tp = discovered
        .keys()
        .filter(|k| injected.contains_key(*k))
        .count();
    let fp = discovered.len() - tp;
    let fn_ = injected.len() - tp;
    let ratio = |num: usize, den: usize| {
        if den == 0 {
            1.0
        } else {
            num as f64 / den as f64
        }
    };
    let (forecast, actual): (Vec<f64>, Vec<f64>) = keys
        .iter()
        .map(|k| {
            (
                discovered.get(*k).copied().unwrap_or(0.0),
                injected.get(*k).copied().unwrap_or(0.0),
            )
        })
        .unzip();
    TimerScore {
        precision: ratio(tp, tp + fp),
        recall: ratio(tp, tp + fn_),
        smape: smape(&forecast, &actual).unwrap_or(0.0),
        true_positives: tp,
        false_positives: fp,
        false_negatives: fn_,
    }
}
