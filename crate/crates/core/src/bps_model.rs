//! BPMN-lite simulation models and timer-event injection.
//!
//! A model is a flow graph over a start event, an end event, tasks,
//! gateways and timer events, plus resource pools with weekly calendars and
//! an arrival process. Models are stored as JSON (see `docs/model-schema.md`).

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calendars::{ResourceCalendar, WeeklyCalendar};
pub use crate::delay_discovery::Attribution;
use crate::delay_discovery::{
    positive_ratio, ActivityDelays, DelayError, DelayMultiset, DelayReport,
};
use crate::distribution::DurationDistribution;

pub const SCHEMA_VERSION: u32 = 1;

/// Upper bound on explored markings during the soundness check.
const MAX_MARKINGS: usize = 200_000;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("schema violation at '{path}': {message}")]
    Schema { path: String, message: String },
    #[error("invalid model: {0}")]
    Validation(String),
    #[error("unknown activity '{0}'")]
    UnknownActivity(String),
    #[error("invalid scale factor {factor} for '{activity}'")]
    ScaleFactor { activity: String, factor: f64 },
    #[error("report entry '{0}' has no raw delays to rescale")]
    MissingRawDelays(String),
    #[error(transparent)]
    Delay(#[from] DelayError),
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, ModelError> {
    Err(ModelError::Validation(msg.into()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Task {
    pub duration: DurationDistribution,
    pub pool: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GatewayKind {
    Exclusive,
    Parallel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GatewayDirection {
    Split,
    Join,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Gateway {
    pub kind: GatewayKind,
    pub direction: GatewayDirection,
    /// Exclusive splits only: outgoing target node → probability.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub branch_probs: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimerAttachment {
    pub activity: String,
    pub attribution: Attribution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Timer {
    pub duration: DurationDistribution,
    pub attached_to: TimerAttachment,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Flow {
    pub from: String,
    pub to: String,
}

impl Flow {
    pub fn new(from: impl Into<String>, to: impl Into<String>) -> Self {
        Self {
            from: from.into(),
            to: to.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Pool {
    pub resources: Vec<String>,
    pub calendar: WeeklyCalendar,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Arrivals {
    pub interarrival: DurationDistribution,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calendar: Option<WeeklyCalendar>,
}

fn default_start() -> String {
    "start".into()
}

fn default_end() -> String {
    "end".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BpsModel {
    pub schema_version: u32,
    #[serde(default = "default_start")]
    pub start_event: String,
    #[serde(default = "default_end")]
    pub end_event: String,
    pub tasks: BTreeMap<String, Task>,
    #[serde(default)]
    pub gateways: BTreeMap<String, Gateway>,
    #[serde(default)]
    pub timers: BTreeMap<String, Timer>,
    pub flows: Vec<Flow>,
    pub pools: BTreeMap<String, Pool>,
    pub arrivals: Arrivals,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NodeKind<'a> {
    Start,
    End,
    Task(&'a Task),
    Gateway(&'a Gateway),
    Timer(&'a Timer),
}

impl BpsModel {
    /// Empty model skeleton with the given arrival process.
    pub fn new(interarrival: DurationDistribution) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            start_event: default_start(),
            end_event: default_end(),
            tasks: BTreeMap::new(),
            gateways: BTreeMap::new(),
            timers: BTreeMap::new(),
            flows: Vec::new(),
            pools: BTreeMap::new(),
            arrivals: Arrivals {
                interarrival,
                calendar: None,
            },
        }
    }

    pub fn node_kind(&self, id: &str) -> Option<NodeKind<'_>> {
        if id == self.start_event {
            Some(NodeKind::Start)
        } else if id == self.end_event {
            Some(NodeKind::End)
        } else if let Some(t) = self.tasks.get(id) {
            Some(NodeKind::Task(t))
        } else if let Some(g) = self.gateways.get(id) {
            Some(NodeKind::Gateway(g))
        } else {
            self.timers.get(id).map(NodeKind::Timer)
        }
    }

    pub fn node_ids(&self) -> Vec<&str> {
        let mut ids = vec![self.start_event.as_str(), self.end_event.as_str()];
        ids.extend(self.tasks.keys().map(String::as_str));
        ids.extend(self.gateways.keys().map(String::as_str));
        ids.extend(self.timers.keys().map(String::as_str));
        ids
    }

    pub fn incoming(&self, id: &str) -> Vec<usize> {
        (0..self.flows.len())
            .filter(|&i| self.flows[i].to == id)
            .collect()
    }

    pub fn outgoing(&self, id: &str) -> Vec<usize> {
        (0..self.flows.len())
            .filter(|&i| self.flows[i].from == id)
            .collect()
    }

    /// Calendar of each resource, taken from the pools it belongs to.
    pub fn resource_calendars(&self) -> BTreeMap<String, ResourceCalendar> {
        let mut out = BTreeMap::new();
        for pool in self.pools.values() {
            for r in &pool.resources {
                out.entry(r.clone())
                    .or_insert_with(|| ResourceCalendar::new(r.clone(), pool.calendar.clone()));
            }
        }
        out
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.schema_version != SCHEMA_VERSION {
            return invalid(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        let ids = self.node_ids();
        let mut seen = HashSet::new();
        for id in &ids {
            if !seen.insert(*id) {
                return invalid(format!("duplicate node id '{id}'"));
            }
        }
        let mut flow_set = HashSet::new();
        for f in &self.flows {
            for end in [&f.from, &f.to] {
                if !seen.contains(end.as_str()) {
                    return invalid(format!(
                        "flow {} -> {} references unknown node '{end}'",
                        f.from, f.to
                    ));
                }
            }
            if !flow_set.insert(f) {
                return invalid(format!("duplicate flow {} -> {}", f.from, f.to));
            }
        }

        for id in &ids {
            let (ins, outs) = (self.incoming(id).len(), self.outgoing(id).len());
            let kind = self.node_kind(id).expect("listed node");
            let ok = match kind {
                NodeKind::Start => ins == 0 && outs == 1,
                NodeKind::End => ins >= 1 && outs == 0,
                NodeKind::Task(_) | NodeKind::Timer(_) => ins == 1 && outs == 1,
                NodeKind::Gateway(g) => match g.direction {
                    GatewayDirection::Split => ins == 1 && outs >= 1,
                    GatewayDirection::Join => ins >= 1 && outs == 1,
                },
            };
            if !ok {
                return invalid(format!(
                    "node '{id}' ({}) has {ins} incoming and {outs} outgoing flows",
                    match kind {
                        NodeKind::Start => "start event: needs 0 in / 1 out",
                        NodeKind::End => "end event: needs >=1 in / 0 out",
                        NodeKind::Task(_) => "task: needs 1 in / 1 out; merge with a join gateway",
                        NodeKind::Timer(_) => "timer: needs 1 in / 1 out",
                        NodeKind::Gateway(g) if g.direction == GatewayDirection::Split =>
                            "split: needs 1 in",
                        NodeKind::Gateway(_) => "join: needs 1 out",
                    }
                ));
            }
        }

        for (id, g) in &self.gateways {
            let is_xor_split =
                g.kind == GatewayKind::Exclusive && g.direction == GatewayDirection::Split;
            if !is_xor_split {
                if !g.branch_probs.is_empty() {
                    return invalid(format!(
                        "gateway '{id}': branch_probs only apply to exclusive splits"
                    ));
                }
                continue;
            }
            let targets: BTreeSet<&str> = self
                .outgoing(id)
                .iter()
                .map(|&i| self.flows[i].to.as_str())
                .collect();
            let keys: BTreeSet<&str> = g.branch_probs.keys().map(String::as_str).collect();
            if targets != keys {
                return invalid(format!(
                    "gateway '{id}': branch_probs keys {keys:?} must match outgoing targets {targets:?}"
                ));
            }
            if g.branch_probs
                .values()
                .any(|p| !p.is_finite() || *p < 0.0 || *p > 1.0)
            {
                return invalid(format!("gateway '{id}': probabilities must lie in [0, 1]"));
            }
            let sum: f64 = g.branch_probs.values().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return invalid(format!(
                    "gateway '{id}': branch probabilities sum to {sum}, expected 1"
                ));
            }
        }

        let mut resource_calendars: HashMap<&str, &WeeklyCalendar> = HashMap::new();
        for (id, pool) in &self.pools {
            if pool.resources.is_empty() {
                return invalid(format!("pool '{id}' has no resources"));
            }
            pool.calendar
                .validate()
                .map_err(|e| ModelError::Validation(format!("pool '{id}': {e}")))?;
            if pool.calendar.is_empty() {
                return invalid(format!("pool '{id}' has no working time"));
            }
            for r in &pool.resources {
                if let Some(prev) = resource_calendars.insert(r, &pool.calendar) {
                    if prev.normalized() != pool.calendar.normalized() {
                        return invalid(format!(
                            "resource '{r}' has different calendars in different pools"
                        ));
                    }
                }
            }
        }
        if let Some(cal) = &self.arrivals.calendar {
            cal.validate()
                .map_err(|e| ModelError::Validation(format!("arrival calendar: {e}")))?;
            if cal.is_empty() {
                return invalid("arrival calendar has no working time");
            }
        }
        for (id, task) in &self.tasks {
            if !self.pools.contains_key(&task.pool) {
                return invalid(format!("task '{id}' uses unknown pool '{}'", task.pool));
            }
            task.duration
                .validate()
                .map_err(|e| ModelError::Validation(format!("task '{id}': {e}")))?;
        }
        for (id, timer) in &self.timers {
            timer
                .duration
                .validate()
                .map_err(|e| ModelError::Validation(format!("timer '{id}': {e}")))?;
        }
        self.arrivals
            .interarrival
            .validate()
            .map_err(|e| ModelError::Validation(format!("arrivals: {e}")))?;
        if self.arrivals.interarrival.mean() <= 0.0 {
            return invalid("arrivals: mean inter-arrival time must be positive");
        }

        self.check_connectivity()?;
        self.check_soundness()
    }

    fn check_connectivity(&self) -> Result<(), ModelError> {
        let reach = |from: &str, forward: bool| -> HashSet<String> {
            let mut seen = HashSet::from([from.to_string()]);
            let mut queue = VecDeque::from([from.to_string()]);
            while let Some(n) = queue.pop_front() {
                for f in &self.flows {
                    let (a, b) = if forward {
                        (&f.from, &f.to)
                    } else {
                        (&f.to, &f.from)
                    };
                    if *a == n && seen.insert(b.clone()) {
                        queue.push_back(b.clone());
                    }
                }
            }
            seen
        };
        let from_start = reach(&self.start_event, true);
        let to_end = reach(&self.end_event, false);
        for id in self.node_ids() {
            if !from_start.contains(id) {
                return invalid(format!("node '{id}' is not reachable from the start event"));
            }
            if !to_end.contains(id) {
                return invalid(format!("node '{id}' cannot reach the end event"));
            }
        }
        Ok(())
    }

    /// Explores the token game of a single case (exclusive choices are
    /// non-deterministic, zero-probability branches excluded) and checks that
    /// no flow ever holds two tokens and that every reachable marking can
    /// still complete.
    fn check_soundness(&self) -> Result<(), ModelError> {
        type Marking = Vec<bool>;
        let nf = self.flows.len();
        let flow_name = |i: usize| format!("{} -> {}", self.flows[i].from, self.flows[i].to);
        let mut initial = vec![false; nf];
        for i in self.outgoing(&self.start_event) {
            initial[i] = true;
        }

        let nodes: Vec<&str> = self
            .node_ids()
            .into_iter()
            .filter(|id| *id != self.start_event)
            .collect();
        let ins: HashMap<&str, Vec<usize>> = nodes.iter().map(|&n| (n, self.incoming(n))).collect();
        let outs: HashMap<&str, Vec<usize>> =
            nodes.iter().map(|&n| (n, self.outgoing(n))).collect();

        let successors = |m: &Marking| -> Result<Vec<Marking>, ModelError> {
            let mut next = Vec::new();
            for &node in &nodes {
                let kind = self.node_kind(node).expect("listed node");
                let node_ins = &ins[node];
                let consume_sets: Vec<Vec<usize>> = match kind {
                    NodeKind::Gateway(g)
                        if g.kind == GatewayKind::Parallel
                            && g.direction == GatewayDirection::Join =>
                    {
                        if node_ins.iter().all(|&i| m[i]) {
                            vec![node_ins.clone()]
                        } else {
                            vec![]
                        }
                    }
                    _ => node_ins
                        .iter()
                        .filter(|&&i| m[i])
                        .map(|&i| vec![i])
                        .collect(),
                };
                let produce_sets: Vec<Vec<usize>> = match kind {
                    NodeKind::End => vec![vec![]],
                    NodeKind::Gateway(g) if g.direction == GatewayDirection::Split => {
                        match g.kind {
                            GatewayKind::Parallel => vec![outs[node].clone()],
                            GatewayKind::Exclusive => outs[node]
                                .iter()
                                .filter(|&&i| {
                                    g.branch_probs
                                        .get(&self.flows[i].to)
                                        .copied()
                                        .unwrap_or(0.0)
                                        > 0.0
                                })
                                .map(|&i| vec![i])
                                .collect(),
                        }
                    }
                    _ => vec![outs[node].clone()],
                };
                for consume in &consume_sets {
                    for produce in &produce_sets {
                        let mut m2 = m.clone();
                        for &i in consume {
                            m2[i] = false;
                        }
                        for &i in produce {
                            if m2[i] {
                                return invalid(format!(
                                    "flow {} can hold more than one token (unbalanced split/join)",
                                    flow_name(i)
                                ));
                            }
                            m2[i] = true;
                        }
                        next.push(m2);
                    }
                }
            }
            Ok(next)
        };

        let mut index: HashMap<Marking, usize> = HashMap::new();
        let mut states: Vec<Marking> = vec![initial.clone()];
        let mut edges: Vec<Vec<usize>> = vec![Vec::new()];
        index.insert(initial, 0);
        let mut queue = VecDeque::from([0usize]);
        while let Some(s) = queue.pop_front() {
            let succ = successors(&states[s].clone())?;
            if succ.is_empty() && states[s].iter().any(|&b| b) {
                let stuck: Vec<String> = (0..nf).filter(|&i| states[s][i]).map(flow_name).collect();
                return invalid(format!("deadlock with tokens on [{}]", stuck.join(", ")));
            }
            for m in succ {
                let id = match index.get(&m) {
                    Some(&id) => id,
                    None => {
                        if states.len() >= MAX_MARKINGS {
                            return invalid("model state space too large to validate");
                        }
                        let id = states.len();
                        states.push(m.clone());
                        edges.push(Vec::new());
                        index.insert(m, id);
                        queue.push_back(id);
                        id
                    }
                };
                edges[s].push(id);
            }
        }

        // Every reachable marking must be able to reach the empty marking.
        let Some(&final_id) = index.get(&vec![false; nf]) else {
            return invalid("no execution reaches the end event");
        };
        let mut reverse: Vec<Vec<usize>> = vec![Vec::new(); states.len()];
        for (s, succ) in edges.iter().enumerate() {
            for &t in succ {
                reverse[t].push(s);
            }
        }
        let mut can_finish = vec![false; states.len()];
        can_finish[final_id] = true;
        let mut queue = VecDeque::from([final_id]);
        while let Some(s) = queue.pop_front() {
            for &p in &reverse[s] {
                if !can_finish[p] {
                    can_finish[p] = true;
                    queue.push_back(p);
                }
            }
        }
        if let Some(s) = can_finish.iter().position(|ok| !ok) {
            let marked: Vec<String> = (0..nf).filter(|&i| states[s][i]).map(flow_name).collect();
            return invalid(format!(
                "marking [{}] can never complete",
                marked.join(", ")
            ));
        }
        Ok(())
    }

    /// Removes every timer, reconnecting its neighbours.
    pub fn strip_timers(&self) -> BpsModel {
        let mut model = self.clone();
        let ids: Vec<String> = model.timers.keys().cloned().collect();
        for id in ids {
            model.splice_out(&id);
        }
        model
    }

    fn rename_branch_target(&mut self, gateway: &str, old: &str, new: &str) {
        if let Some(g) = self.gateways.get_mut(gateway) {
            if let Some(p) = g.branch_probs.remove(old) {
                g.branch_probs.insert(new.to_string(), p);
            }
        }
    }

    fn splice_out(&mut self, timer: &str) {
        let (Some(&i), Some(&o)) = (self.incoming(timer).first(), self.outgoing(timer).first())
        else {
            self.timers.remove(timer);
            return;
        };
        let pred = self.flows[i].from.clone();
        let succ = self.flows[o].to.clone();
        self.flows[i].to = succ.clone();
        self.flows.remove(o);
        self.rename_branch_target(&pred, timer, &succ);
        self.timers.remove(timer);
    }

    /// Inserts `timer` on flow `flow_idx`.
    fn splice_in(&mut self, flow_idx: usize, id: String, timer: Timer) {
        let pred = self.flows[flow_idx].from.clone();
        let succ = std::mem::replace(&mut self.flows[flow_idx].to, id.clone());
        self.flows
            .insert(flow_idx + 1, Flow::new(id.clone(), succ.clone()));
        self.rename_branch_target(&pred, &succ, &id);
        self.timers.insert(id, timer);
    }

    fn fresh_timer_id(&self, activity: &str, attribution: Attribution) -> String {
        let tag = match attribution {
            Attribution::ExAnte => "before",
            Attribution::ExPost => "after",
        };
        let base = format!("timer {tag} {activity}");
        let mut id = base.clone();
        let mut k = 1;
        while self.node_kind(&id).is_some() {
            k += 1;
            id = format!("{base} #{k}");
        }
        id
    }

    /// Timers attached to `(activity, attribution)`.
    pub fn timers_for(&self, activity: &str, attribution: Attribution) -> Vec<&str> {
        self.timers
            .iter()
            .filter(|(_, t)| {
                t.attached_to.activity == activity && t.attached_to.attribution == attribution
            })
            .map(|(id, _)| id.as_str())
            .collect()
    }

    /// Puts a timer with `duration` on the flow entering (ex-ante) or leaving
    /// (ex-post) `activity`, replacing timers already attached there.
    pub fn set_timer(
        &mut self,
        activity: &str,
        attribution: Attribution,
        duration: DurationDistribution,
    ) -> Result<(), ModelError> {
        if !self.tasks.contains_key(activity) {
            return Err(ModelError::UnknownActivity(activity.to_string()));
        }
        let existing: Vec<String> = self
            .timers_for(activity, attribution)
            .into_iter()
            .map(String::from)
            .collect();
        for id in existing {
            self.splice_out(&id);
        }
        let flow = match attribution {
            Attribution::ExAnte => self.incoming(activity),
            Attribution::ExPost => self.outgoing(activity),
        };
        let [flow] = flow[..] else {
            return invalid(format!(
                "task '{activity}' must have exactly one adjacent flow on that side"
            ));
        };
        let id = self.fresh_timer_id(activity, attribution);
        let timer = Timer {
            duration,
            attached_to: TimerAttachment {
                activity: activity.to_string(),
                attribution,
            },
        };
        self.splice_in(flow, id, timer);
        Ok(())
    }
}

/// Returns a copy of `model` with one timer per report activity, carrying
/// the activity's fitted distribution.
pub fn inject_timers(model: &BpsModel, report: &DelayReport) -> Result<BpsModel, ModelError> {
    if let Some(missing) = report
        .activities
        .iter()
        .find(|a| !model.tasks.contains_key(&a.activity))
    {
        return Err(ModelError::UnknownActivity(missing.activity.clone()));
    }
    let mut enhanced = model.clone();
    for entry in &report.activities {
        enhanced.set_timer(
            &entry.activity,
            report.attribution,
            entry.distribution.clone(),
        )?;
    }
    Ok(enhanced)
}

/// Per-activity delay scale factors.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ScaleVector {
    pub gamma: BTreeMap<String, f64>,
}

impl ScaleVector {
    pub fn uniform<S: AsRef<str>>(activities: &[S], factor: f64) -> Self {
        Self {
            gamma: activities
                .iter()
                .map(|a| (a.as_ref().to_string(), factor))
                .collect(),
        }
    }

    /// Missing activities scale by 1.
    pub fn factor(&self, activity: &str) -> f64 {
        self.gamma.get(activity).copied().unwrap_or(1.0)
    }

    pub fn validate(&self, gamma_max: f64) -> Result<(), ModelError> {
        for (activity, &factor) in &self.gamma {
            if !factor.is_finite() || factor < 0.0 || factor > gamma_max {
                return Err(ModelError::ScaleFactor {
                    activity: activity.clone(),
                    factor,
                });
            }
        }
        Ok(())
    }
}

/// Multiplies every delay of each activity by its factor, refits the
/// distributions and re-applies the report's positive-share filter.
pub fn scale_report(report: &DelayReport, gamma: &ScaleVector) -> Result<DelayReport, ModelError> {
    let mut activities = Vec::new();
    for entry in &report.activities {
        let factor = gamma.factor(&entry.activity);
        if !factor.is_finite() || factor < 0.0 {
            return Err(ModelError::ScaleFactor {
                activity: entry.activity.clone(),
                factor,
            });
        }
        if entry.delays.is_empty() && entry.count > 0 {
            return Err(ModelError::MissingRawDelays(entry.activity.clone()));
        }
        let delays: Vec<f64> = entry.delays.iter().map(|d| d * factor).collect();
        if positive_ratio(&delays) <= report.delta {
            continue;
        }
        activities.push(ActivityDelays::from_multiset(DelayMultiset::new(
            entry.activity.clone(),
            delays,
        ))?);
    }
    Ok(DelayReport {
        activities,
        ..report.clone()
    })
}

/// Parses and validates a model from JSON text.
pub fn model_from_json(text: &str) -> Result<BpsModel, ModelError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let model: BpsModel = serde_path_to_error::deserialize(de).map_err(|e| ModelError::Schema {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    model.validate()?;
    Ok(model)
}

pub fn model_to_json(model: &BpsModel) -> String {
    serde_json::to_string_pretty(model).expect("model serialises")
}

pub fn load_model(path: impl AsRef<Path>) -> Result<BpsModel, ModelError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| ModelError::Io {
        path: path.display().to_string(),
        source,
    })?;
    model_from_json(&text)
}

pub fn save_model(model: &BpsModel, path: impl AsRef<Path>) -> Result<(), ModelError> {
    let path = path.as_ref();
    let mut text = model_to_json(model);
    text.push('\n');
    fs::write(path, text).map_err(|source| ModelError::Io {
        path: path.display().to_string(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calendars::DayTime;
    use crate::metrics::Summary;

    fn fixed(v: f64) -> DurationDistribution {
        DurationDistribution::Fixed { value: v }
    }

    fn minimal() -> BpsModel {
        let mut m = BpsModel::new(fixed(600.0));
        m.pools.insert(
            "staff".into(),
            Pool {
                resources: vec!["R1".into()],
                calendar: WeeklyCalendar::always(),
            },
        );
        m.tasks.insert(
            "A".into(),
            Task {
                duration: fixed(60.0),
                pool: "staff".into(),
            },
        );
        m.flows = vec![Flow::new("start", "A"), Flow::new("A", "end")];
        m
    }

    fn xor_model(p_b: f64, p_c: f64) -> BpsModel {
        let mut m = minimal();
        for t in ["B", "C"] {
            m.tasks.insert(
                t.into(),
                Task {
                    duration: fixed(60.0),
                    pool: "staff".into(),
                },
            );
        }
        m.gateways.insert(
            "x".into(),
            Gateway {
                kind: GatewayKind::Exclusive,
                direction: GatewayDirection::Split,
                branch_probs: BTreeMap::from([("B".into(), p_b), ("C".into(), p_c)]),
            },
        );
        m.gateways.insert(
            "m".into(),
            Gateway {
                kind: GatewayKind::Exclusive,
                direction: GatewayDirection::Join,
                branch_probs: BTreeMap::new(),
            },
        );
        m.flows = vec![
            Flow::new("start", "A"),
            Flow::new("A", "x"),
            Flow::new("x", "B"),
            Flow::new("x", "C"),
            Flow::new("B", "m"),
            Flow::new("C", "m"),
            Flow::new("m", "end"),
        ];
        m
    }

    fn report(activities: &[(&str, Vec<f64>)]) -> DelayReport {
        let mut r = DelayReport::empty(
            crate::delay_discovery::Estimator::Naive,
            Attribution::ExAnte,
            0.05,
        );
        for (a, delays) in activities {
            r.activities.push(
                ActivityDelays::from_multiset(DelayMultiset::new(*a, delays.clone())).unwrap(),
            );
        }
        r
    }

    #[test]
    fn minimal_model_is_valid() {
        minimal().validate().unwrap();
    }

    #[test]
    fn probabilities_must_sum_to_one() {
        let err = xor_model(0.7, 0.2).validate().unwrap_err();
        assert!(err.to_string().contains("sum to"), "{err}");
        xor_model(0.7, 0.3).validate().unwrap();
    }

    #[test]
    fn unbalanced_parallel_join_is_rejected() {
        // Exclusive split closed by a parallel join deadlocks.
        let mut m = xor_model(0.5, 0.5);
        m.gateways.get_mut("m").unwrap().kind = GatewayKind::Parallel;
        let err = m.validate().unwrap_err();
        assert!(err.to_string().contains("deadlock"), "{err}");
        // Parallel split closed by an exclusive join leaves two tokens.
        let mut m = xor_model(0.5, 0.5);
        let x = m.gateways.get_mut("x").unwrap();
        x.kind = GatewayKind::Parallel;
        x.branch_probs.clear();
        let err = m.validate().unwrap_err();
        assert!(err.to_string().contains("more than one token"), "{err}");
    }

    #[test]
    fn structural_errors() {
        let mut m = minimal();
        m.flows.push(Flow::new("A", "ghost"));
        assert!(m.validate().is_err());
        let mut m = minimal();
        m.tasks.get_mut("A").unwrap().pool = "nobody".into();
        assert!(m.validate().is_err());
        let mut m = minimal();
        m.pools.get_mut("staff").unwrap().calendar = WeeklyCalendar::default();
        assert!(m.validate().is_err());
        let mut m = minimal();
        m.schema_version = 2;
        assert!(m.validate().is_err());
    }

    #[test]
    fn schema_errors_name_the_path() {
        let mut json: serde_json::Value = serde_json::from_str(&model_to_json(&minimal())).unwrap();
        json["tasks"]["A"]["duration"]["family"] = "weibull".into();
        let err = model_from_json(&json.to_string()).unwrap_err();
        match err {
            ModelError::Schema { path, .. } => assert!(path.starts_with("tasks.A"), "{path}"),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn injection_before_task_after_exclusive_split() {
        let m = xor_model(0.7, 0.3);
        let enhanced = inject_timers(&m, &report(&[("B", vec![3600.0, 3600.0])])).unwrap();
        enhanced.validate().unwrap();
        let id = enhanced.timers_for("B", Attribution::ExAnte)[0].to_string();
        assert_eq!(enhanced.timers[&id].duration, fixed(3600.0));
        assert_eq!(enhanced.gateways["x"].branch_probs[&id], 0.7);
        assert!(enhanced.flows.contains(&Flow::new(id.clone(), "B")));
        assert!(enhanced.flows.contains(&Flow::new("x", id.clone())));
        assert_eq!(enhanced.strip_timers(), m);
    }

    #[test]
    fn injection_is_idempotent_and_replaces() {
        let m = minimal();
        let r1 = report(&[("A", vec![100.0, 100.0])]);
        let once = inject_timers(&m, &r1).unwrap();
        assert_eq!(inject_timers(&once, &r1).unwrap(), once);
        let r2 = report(&[("A", vec![900.0])]);
        let replaced = inject_timers(&once, &r2).unwrap();
        assert_eq!(replaced.timers.len(), 1);
        assert_eq!(
            replaced.timers.values().next().unwrap().duration,
            fixed(900.0)
        );
        assert_eq!(inject_timers(&m, &report(&[])).unwrap(), m);
    }

    #[test]
    fn ex_post_goes_after_the_task() {
        let mut r = report(&[("A", vec![50.0])]);
        r.attribution = Attribution::ExPost;
        let enhanced = inject_timers(&minimal(), &r).unwrap();
        let id = enhanced.timers_for("A", Attribution::ExPost)[0];
        assert!(enhanced.flows.contains(&Flow::new("A", id)));
        assert!(enhanced.flows.contains(&Flow::new(id, "end")));
    }

    #[test]
    fn unknown_activity_is_rejected() {
        let err = inject_timers(&minimal(), &report(&[("Z", vec![1.0])])).unwrap_err();
        assert!(matches!(err, ModelError::UnknownActivity(ref a) if a == "Z"));
    }

    #[test]
    fn scaling() {
        let r = report(&[("A", vec![100.0, 200.0])]);
        let same = scale_report(&r, &ScaleVector::default()).unwrap();
        assert_eq!(same, r);
        let doubled = scale_report(&r, &ScaleVector::uniform(&["A"], 2.0)).unwrap();
        assert_eq!(doubled.activities[0].delays, vec![200.0, 400.0]);
        let zeroed = scale_report(&r, &ScaleVector::uniform(&["A"], 0.0)).unwrap();
        assert!(zeroed.is_empty());
        assert!(scale_report(&r, &ScaleVector::uniform(&["A"], -1.0)).is_err());
        assert!(ScaleVector::uniform(&["A"], 11.0).validate(10.0).is_err());
        let compact = r.without_raw();
        assert!(matches!(
            scale_report(&compact, &ScaleVector::default()),
            Err(ModelError::MissingRawDelays(_))
        ));
    }

    #[test]
    fn calendars_per_resource() {
        let mut m = minimal();
        m.pools.insert(
            "office".into(),
            Pool {
                resources: vec!["R2".into()],
                calendar: WeeklyCalendar::daily(DayTime::hms(8, 0, 0), DayTime::hms(16, 0, 0)),
            },
        );
        let cals = m.resource_calendars();
        assert_eq!(cals.len(), 2);
        assert_eq!(cals["R2"].calendar.slots.len(), 7);
        let _ = Summary::default();
    }
}
