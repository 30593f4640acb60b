//! Estimation of extraneous activity delays.
//!
//! For every causally consecutive pair `(source, target)` the waiting window
//! `[source.end, target.start]` is split into the part explained by the
//! target resource being busy or off duty, and the remainder, attributed to
//! extraneous causes. Three estimators are provided:
//!
//! * **naive**: the wait after the latest of the source end and the instant
//!   the resource last became available (end of its previous instance or of
//!   its previous off-duty period);
//! * **eclipse-aware**: the span between the first and last instants in the
//!   window where the resource was idle and on duty for at least `lambda`
//!   seconds;
//! * **extrapolated eclipse-aware**: the eclipse-aware bounds pushed halfway
//!   towards the window borders.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calendars::{non_working_intervals, ResourceCalendar};
use crate::distribution::{fit_distribution, DistributionError, DurationDistribution};
use crate::log_io::{ActivityInstance, ActivityInstanceLog};
use crate::metrics::{summarize, Summary};
use crate::time::{merge_intervals, Interval, Timestamp};
use crate::timeline::{
    causal_pairs, discover_concurrency, CausalPair, CausalPairSet, ConcurrencyRelation,
};

#[derive(Debug, Error)]
pub enum DelayError {
    #[error("unknown estimator '{0}' (expected naive, eclipse or eclipse-extrapolated)")]
    UnknownEstimator(String),
    #[error("unknown attribution '{0}' (expected ex-post or ex-ante)")]
    UnknownAttribution(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Distribution(#[from] DistributionError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    Naive,
    EclipseAware,
    EclipseAwareExtrapolated,
}

impl Estimator {
    pub const ALL: [Estimator; 3] = [
        Estimator::Naive,
        Estimator::EclipseAware,
        Estimator::EclipseAwareExtrapolated,
    ];

    pub fn cli_name(self) -> &'static str {
        match self {
            Estimator::Naive => "naive",
            Estimator::EclipseAware => "eclipse",
            Estimator::EclipseAwareExtrapolated => "eclipse-extrapolated",
        }
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.cli_name())
    }
}

impl FromStr for Estimator {
    type Err = DelayError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "naive" => Ok(Estimator::Naive),
            "eclipse" | "eclipse-aware" | "eclipse_aware" => Ok(Estimator::EclipseAware),
            "eclipse-extrapolated"
            | "eclipse-aware-extrapolated"
            | "eclipse_aware_extrapolated" => Ok(Estimator::EclipseAwareExtrapolated),
            other => Err(DelayError::UnknownEstimator(other.to_string())),
        }
    }
}

/// Where a discovered delay is modelled: after the enabling activity
/// (`ex_post`) or before the delayed one (`ex_ante`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Attribution {
    ExPost,
    ExAnte,
}

impl fmt::Display for Attribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Attribution::ExPost => "ex-post",
            Attribution::ExAnte => "ex-ante",
        })
    }
}

impl FromStr for Attribution {
    type Err = DelayError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ex-post" | "ex_post" | "expost" => Ok(Attribution::ExPost),
            "ex-ante" | "ex_ante" | "exante" => Ok(Attribution::ExAnte),
            other => Err(DelayError::UnknownAttribution(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayConfig {
    pub estimator: Estimator,
    /// Minimum length, in seconds, of an idle period counted as availability.
    pub lambda: i64,
    /// Activities need a share of positive delays strictly above this.
    pub delta: f64,
    pub attribution: Attribution,
    /// Overlap-ratio threshold of the concurrency oracle.
    pub zeta: f64,
}

impl Default for DelayConfig {
    fn default() -> Self {
        Self {
            estimator: Estimator::EclipseAwareExtrapolated,
            lambda: 300,
            delta: 0.05,
            attribution: Attribution::ExAnte,
            zeta: 0.75,
        }
    }
}

impl DelayConfig {
    pub fn validate(&self) -> Result<(), DelayError> {
        if self.lambda < 0 {
            return Err(DelayError::Config(format!(
                "lambda must be >= 0, got {}",
                self.lambda
            )));
        }
        if !(0.0..=1.0).contains(&self.delta) {
            return Err(DelayError::Config(format!(
                "delta must lie in [0, 1], got {}",
                self.delta
            )));
        }
        if !(0.0..=1.0).contains(&self.zeta) {
            return Err(DelayError::Config(format!(
                "zeta must lie in [0, 1], got {}",
                self.zeta
            )));
        }
        Ok(())
    }
}

/// Estimated delay of one causally consecutive pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairDelay {
    pub source: usize,
    pub target: usize,
    /// `target.start - source.end`.
    pub waiting: i64,
    pub extraneous: i64,
    /// First available time (eclipse-aware estimators only).
    pub fat: Option<Timestamp>,
    /// Last available time (eclipse-aware estimators only).
    pub lat: Option<Timestamp>,
}

#[derive(Debug, Clone, Default)]
struct ResourceTimeline {
    /// Sorted end times of the resource's instances.
    ends: Vec<Timestamp>,
    /// Sorted, disjoint off-duty intervals.
    off_duty: Vec<Interval>,
    /// Busy and off-duty time merged.
    blocked: Vec<Interval>,
}

/// Per-resource index of busy and off-duty time, built once per log.
#[derive(Debug, Clone)]
pub struct AvailabilityIndex {
    span: Interval,
    timelines: HashMap<String, ResourceTimeline>,
}

impl AvailabilityIndex {
    /// Resources without a calendar are treated as always on duty.
    pub fn new(log: &ActivityInstanceLog, calendars: &BTreeMap<String, ResourceCalendar>) -> Self {
        let span = log.span().unwrap_or(Interval::new(0, 0));
        let mut busy: HashMap<&str, Vec<Interval>> = HashMap::new();
        for inst in &log.instances {
            busy.entry(inst.resource.as_str())
                .or_default()
                .push(inst.interval());
        }
        let timelines = busy
            .into_iter()
            .map(|(resource, intervals)| {
                let mut ends: Vec<Timestamp> = intervals.iter().map(|iv| iv.end).collect();
                ends.sort_unstable();
                let off_duty = calendars
                    .get(resource)
                    .map(|cal| non_working_intervals(cal, span).intervals)
                    .unwrap_or_default();
                let mut all = intervals;
                all.extend_from_slice(&off_duty);
                let timeline = ResourceTimeline {
                    ends,
                    off_duty,
                    blocked: merge_intervals(all),
                };
                (resource.to_string(), timeline)
            })
            .collect();
        Self { span, timelines }
    }

    pub fn span(&self) -> Interval {
        self.span
    }

    /// Off-duty intervals of a resource within the log span.
    pub fn off_duty(&self, resource: &str) -> &[Interval] {
        self.timelines
            .get(resource)
            .map_or(&[], |t| t.off_duty.as_slice())
    }

    /// Latest instant, not after `target.start`, at which the target's
    /// resource finished an instance or came back on duty. Falls back to the
    /// log span start when there is no such evidence.
    pub fn resource_availability_time(&self, target: &ActivityInstance) -> Timestamp {
        let Some(tl) = self.timelines.get(&target.resource) else {
            return self.span.start;
        };
        let t = target.start;
        let last_end = tl.ends[..tl.ends.partition_point(|&e| e <= t)]
            .last()
            .copied();
        let last_on_duty = tl.off_duty[..tl.off_duty.partition_point(|iv| iv.end <= t)]
            .last()
            .map(|iv| iv.end);
        last_end.max(last_on_duty).unwrap_or(self.span.start)
    }

    /// Maximal sub-intervals of `[from, to]` during which `resource` is
    /// neither off duty nor busy, keeping those lasting at least `lambda`
    /// (and always a positive length). Short gaps are dropped, not merged.
    pub fn availability_intervals(
        &self,
        resource: &str,
        from: Timestamp,
        to: Timestamp,
        lambda: i64,
    ) -> Vec<Interval> {
        if to <= from {
            return Vec::new();
        }
        let blocked = self
            .timelines
            .get(resource)
            .map_or(&[][..], |t| t.blocked.as_slice());
        let first = blocked.partition_point(|iv| iv.end <= from);
        let mut gaps = Vec::new();
        let mut cursor = from;
        for iv in &blocked[first..] {
            if iv.start >= to {
                break;
            }
            if iv.start > cursor {
                gaps.push(Interval::new(cursor, iv.start));
            }
            cursor = cursor.max(iv.end);
            if cursor >= to {
                break;
            }
        }
        if cursor < to {
            gaps.push(Interval::new(cursor, to));
        }
        gaps.retain(|g| g.duration() > 0 && g.duration() >= lambda);
        gaps
    }

    pub fn naive_delay(&self, log: &ActivityInstanceLog, pair: CausalPair) -> PairDelay {
        let (source, target) = (&log.instances[pair.source], &log.instances[pair.target]);
        let earliest_start = self.resource_availability_time(target).max(source.end);
        PairDelay {
            source: pair.source,
            target: pair.target,
            waiting: target.start - source.end,
            extraneous: (target.start - earliest_start).max(0),
            fat: None,
            lat: None,
        }
    }

    fn available_bounds(
        &self,
        log: &ActivityInstanceLog,
        pair: CausalPair,
        lambda: i64,
    ) -> Option<(Timestamp, Timestamp)> {
        let (source, target) = (&log.instances[pair.source], &log.instances[pair.target]);
        let intervals =
            self.availability_intervals(&target.resource, source.end, target.start, lambda);
        Some((intervals.first()?.start, intervals.last()?.end))
    }

    pub fn eclipse_delay(
        &self,
        log: &ActivityInstanceLog,
        pair: CausalPair,
        lambda: i64,
    ) -> PairDelay {
        let (source, target) = (&log.instances[pair.source], &log.instances[pair.target]);
        let bounds = self.available_bounds(log, pair, lambda);
        PairDelay {
            source: pair.source,
            target: pair.target,
            waiting: target.start - source.end,
            extraneous: bounds.map_or(0, |(fat, lat)| lat - fat),
            fat: bounds.map(|b| b.0),
            lat: bounds.map(|b| b.1),
        }
    }

    /// Half-second remainders round towards the available bounds, keeping
    /// every estimate an integer number of seconds inside the window.
    pub fn extrapolated_delay(
        &self,
        log: &ActivityInstanceLog,
        pair: CausalPair,
        lambda: i64,
    ) -> PairDelay {
        let (source, target) = (&log.instances[pair.source], &log.instances[pair.target]);
        let bounds = self.available_bounds(log, pair, lambda);
        let extraneous = bounds.map_or(0, |(fat, lat)| {
            let fat_x = fat - (fat - source.end) / 2;
            let lat_x = lat + (target.start - lat) / 2;
            lat_x - fat_x
        });
        PairDelay {
            source: pair.source,
            target: pair.target,
            waiting: target.start - source.end,
            extraneous,
            fat: bounds.map(|b| b.0),
            lat: bounds.map(|b| b.1),
        }
    }

    pub fn estimate(
        &self,
        log: &ActivityInstanceLog,
        pair: CausalPair,
        estimator: Estimator,
        lambda: i64,
    ) -> PairDelay {
        match estimator {
            Estimator::Naive => self.naive_delay(log, pair),
            Estimator::EclipseAware => self.eclipse_delay(log, pair, lambda),
            Estimator::EclipseAwareExtrapolated => self.extrapolated_delay(log, pair, lambda),
        }
    }
}

/// Estimates every pair in parallel; output follows `pairs` order.
pub fn estimate_pair_delays(
    log: &ActivityInstanceLog,
    pairs: &CausalPairSet,
    index: &AvailabilityIndex,
    estimator: Estimator,
    lambda: i64,
) -> Vec<PairDelay> {
    pairs
        .pairs
        .par_iter()
        .map(|&pair| index.estimate(log, pair, estimator, lambda))
        .collect()
}

/// Multiset of delays grouped under one activity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayMultiset {
    pub activity: String,
    pub delays: Vec<f64>,
    pub positive_ratio: f64,
}

impl DelayMultiset {
    pub fn new(activity: impl Into<String>, delays: Vec<f64>) -> Self {
        let positive_ratio = positive_ratio(&delays);
        Self {
            activity: activity.into(),
            delays,
            positive_ratio,
        }
    }
}

pub fn positive_ratio(delays: &[f64]) -> f64 {
    if delays.is_empty() {
        0.0
    } else {
        delays.iter().filter(|&&d| d > 0.0).count() as f64 / delays.len() as f64
    }
}

/// Groups pair delays per activity (target activity for ex-ante, source
/// activity for ex-post) and keeps the activities whose share of positive
/// delays is strictly above `delta`. Zero delays stay in the multisets.
pub fn group_delays(
    log: &ActivityInstanceLog,
    delays: &[PairDelay],
    attribution: Attribution,
    delta: f64,
) -> Vec<DelayMultiset> {
    let mut grouped: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for d in delays {
        let idx = match attribution {
            Attribution::ExAnte => d.target,
            Attribution::ExPost => d.source,
        };
        grouped
            .entry(log.instances[idx].activity.as_str())
            .or_default()
            .push(d.extraneous as f64);
    }
    grouped
        .into_iter()
        .map(|(activity, delays)| DelayMultiset::new(activity, delays))
        .filter(|m| m.positive_ratio > delta)
        .collect()
}

/// Discovered delays of one activity, with their fitted distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivityDelays {
    pub activity: String,
    pub count: usize,
    pub positive_ratio: f64,
    pub summary: Summary,
    pub distribution: DurationDistribution,
    /// Raw multiset; omitted from compact reports.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub delays: Vec<f64>,
}

impl ActivityDelays {
    pub fn from_multiset(multiset: DelayMultiset) -> Result<Self, DelayError> {
        let distribution = fit_distribution(&multiset.delays)?;
        Ok(Self {
            activity: multiset.activity,
            count: multiset.delays.len(),
            positive_ratio: multiset.positive_ratio,
            summary: summarize(&multiset.delays).unwrap_or_default(),
            distribution,
            delays: multiset.delays,
        })
    }

    pub fn mean(&self) -> f64 {
        self.summary.mean
    }
}

/// Per-activity extraneous delays that survived the outlier filter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayReport {
    pub estimator: Estimator,
    pub attribution: Attribution,
    pub delta: f64,
    /// Sorted by activity label.
    pub activities: Vec<ActivityDelays>,
}

impl DelayReport {
    pub fn empty(estimator: Estimator, attribution: Attribution, delta: f64) -> Self {
        Self {
            estimator,
            attribution,
            delta,
            activities: Vec::new(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.activities.is_empty()
    }

    pub fn get(&self, activity: &str) -> Option<&ActivityDelays> {
        self.activities.iter().find(|a| a.activity == activity)
    }

    pub fn activity_labels(&self) -> Vec<&str> {
        self.activities
            .iter()
            .map(|a| a.activity.as_str())
            .collect()
    }

    /// Mean discovered delay per activity.
    pub fn means(&self) -> BTreeMap<String, f64> {
        self.activities
            .iter()
            .map(|a| (a.activity.clone(), a.mean()))
            .collect()
    }

    /// Copy without the raw delay multisets.
    pub fn without_raw(&self) -> Self {
        let mut compact = self.clone();
        compact.activities.iter_mut().for_each(|a| a.delays.clear());
        compact
    }
}

/// Every intermediate product of a delay discovery run.
#[derive(Debug, Clone)]
pub struct Discovery {
    pub relation: ConcurrencyRelation,
    pub pairs: CausalPairSet,
    pub delays: Vec<PairDelay>,
    pub report: DelayReport,
}

/// Runs concurrency discovery, causal pairing, delay estimation, grouping,
/// filtering and distribution fitting.
pub fn discover(
    log: &ActivityInstanceLog,
    calendars: &BTreeMap<String, ResourceCalendar>,
    cfg: &DelayConfig,
) -> Result<Discovery, DelayError> {
    cfg.validate()?;
    let relation = discover_concurrency(log, cfg.zeta);
    let pairs = causal_pairs(log, &relation);
    let index = AvailabilityIndex::new(log, calendars);
    let delays = estimate_pair_delays(log, &pairs, &index, cfg.estimator, cfg.lambda);
    let activities = group_delays(log, &delays, cfg.attribution, cfg.delta)
        .into_iter()
        .map(ActivityDelays::from_multiset)
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Discovery {
        relation,
        pairs,
        delays,
        report: DelayReport {
            estimator: cfg.estimator,
            attribution: cfg.attribution,
            delta: cfg.delta,
            activities,
        },
    })
}

pub fn discover_delays(
    log: &ActivityInstanceLog,
    calendars: &BTreeMap<String, ResourceCalendar>,
    cfg: &DelayConfig,
) -> Result<DelayReport, DelayError> {
    discover(log, calendars, cfg).map(|d| d.report)
}
