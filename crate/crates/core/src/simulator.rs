//! Discrete-event simulation of a [`BpsModel`].
//!
//! Time is measured in whole seconds. Tasks wait for an idle, on-duty
//! resource of their pool; processing only advances during the resource's
//! working time. Timers delay tokens in wall-clock time.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bps_model::{BpsModel, GatewayDirection, GatewayKind, ModelError, NodeKind};
use crate::calendars::WeeklyCalendar;
use crate::delay_discovery::Attribution;
use crate::log_io::{ActivityInstance, ActivityInstanceLog};
use crate::time::{utc, Timestamp};

pub const DEFAULT_EVENT_BUDGET: u64 = 50_000_000;

#[derive(Debug, Error)]
pub enum SimulationError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("invalid simulation config: {0}")]
    Config(String),
    #[error("case {case} deadlocked at node '{node}'")]
    Deadlock { case: String, node: String },
    #[error("event budget of {0} exceeded")]
    EventBudget(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub num_traces: usize,
    pub seed: u64,
    pub start_instant: Timestamp,
    pub event_budget: u64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            num_traces: 1000,
            seed: 42,
            // A Monday.
            start_instant: utc(2024, 1, 1, 0, 0, 0),
            event_budget: DEFAULT_EVENT_BUDGET,
        }
    }
}

impl SimulationConfig {
    pub fn new(num_traces: usize, seed: u64) -> Self {
        Self {
            num_traces,
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), SimulationError> {
        if self.num_traces == 0 {
            return Err(SimulationError::Config(
                "num_traces must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// One sampled timer delay, linked to the task instance it precedes
/// (ex-ante timers) or follows (ex-post timers).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimerDraw {
    pub trace_id: String,
    pub timer: String,
    pub activity: String,
    pub attribution: Attribution,
    pub delay: i64,
    pub start: Timestamp,
    /// Index into the simulated log.
    pub instance: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimulationOutput {
    pub log: ActivityInstanceLog,
    pub timer_draws: Vec<TimerDraw>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Event {
    Arrival {
        case: usize,
    },
    Token {
        case: usize,
        flow: usize,
        token: TokenInfo,
    },
    Complete {
        item: usize,
    },
    Wake,
}

/// Provenance carried by a token between a timer and its adjacent task.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord)]
struct TokenInfo {
    /// Instance just completed upstream.
    after_instance: Option<usize>,
    /// Ex-ante timer draw waiting for its task.
    pending_draw: Option<usize>,
}

struct WorkItem {
    case: usize,
    task: usize,
    enabled: Timestamp,
    pending_draw: Option<usize>,
    resource: Option<usize>,
    instance: Option<usize>,
}

struct ResourceState {
    label: String,
    calendar: WeeklyCalendar,
    busy: bool,
    idle_since: Timestamp,
    wake_at: Option<Timestamp>,
}

struct Engine<'m> {
    model: &'m BpsModel,
    cfg: SimulationConfig,
    rng: ChaCha8Rng,
    trace_ids: Vec<String>,
    task_labels: Vec<&'m str>,
    task_pool: Vec<Vec<usize>>,
    resources: Vec<ResourceState>,
    node_out: HashMap<&'m str, Vec<usize>>,
    node_in_count: HashMap<&'m str, usize>,
    queue: BinaryHeap<Reverse<(Timestamp, u64, Event)>>,
    seq: u64,
    events: u64,
    items: Vec<WorkItem>,
    /// Waiting items ordered by (enablement, case, task label).
    pending: BTreeSet<(Timestamp, usize, usize, usize)>,
    tokens_alive: Vec<usize>,
    join_arrivals: HashMap<(usize, &'m str), BTreeSet<usize>>,
    instances: Vec<ActivityInstance>,
    instance_case: Vec<usize>,
    draws: Vec<TimerDraw>,
    last_arrival: Timestamp,
}

impl<'m> Engine<'m> {
    fn new(model: &'m BpsModel, cfg: SimulationConfig) -> Self {
        let task_labels: Vec<&str> = model.tasks.keys().map(String::as_str).collect();
        let mut resource_index: BTreeMap<&str, usize> = BTreeMap::new();
        let mut resources = Vec::new();
        for pool in model.pools.values() {
            for r in &pool.resources {
                resource_index.entry(r.as_str()).or_insert_with(|| {
                    resources.push(ResourceState {
                        label: r.clone(),
                        calendar: pool.calendar.clone(),
                        busy: false,
                        idle_since: cfg.start_instant,
                        wake_at: None,
                    });
                    resources.len() - 1
                });
            }
        }
        let task_pool = model
            .tasks
            .values()
            .map(|t| {
                let mut rs: Vec<usize> = model.pools[&t.pool]
                    .resources
                    .iter()
                    .map(|r| resource_index[r.as_str()])
                    .collect();
                rs.sort_unstable();
                rs.dedup();
                rs
            })
            .collect();
        let node_out = model
            .node_ids()
            .into_iter()
            .map(|n| (n, model.outgoing(n)))
            .collect();
        let node_in_count = model
            .node_ids()
            .into_iter()
            .map(|n| (n, model.incoming(n).len()))
            .collect();
        let width = cfg.num_traces.to_string().len();
        Self {
            model,
            cfg,
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            trace_ids: (1..=cfg.num_traces)
                .map(|k| format!("case_{k:0width$}"))
                .collect(),
            task_labels,
            task_pool,
            resources,
            node_out,
            node_in_count,
            queue: BinaryHeap::new(),
            seq: 0,
            events: 0,
            items: Vec::new(),
            pending: BTreeSet::new(),
            tokens_alive: vec![0; cfg.num_traces],
            join_arrivals: HashMap::new(),
            instances: Vec::new(),
            instance_case: Vec::new(),
            draws: Vec::new(),
            last_arrival: cfg.start_instant,
        }
    }

    fn push(&mut self, time: Timestamp, event: Event) {
        self.seq += 1;
        self.queue.push(Reverse((time, self.seq, event)));
    }

    fn sample_seconds(&mut self, dist: &crate::distribution::DurationDistribution) -> i64 {
        dist.sample(&mut self.rng).round() as i64
    }

    fn schedule_arrival(&mut self, case: usize) {
        let time = if case == 0 {
            self.cfg.start_instant
        } else {
            let gap = self.sample_seconds(&self.model.arrivals.interarrival);
            self.last_arrival + gap
        };
        let time = match &self.model.arrivals.calendar {
            Some(cal) if case == 0 => cal.next_working_instant(time).unwrap_or(time),
            Some(cal) => {
                let gap = time - self.last_arrival;
                cal.advance(self.last_arrival, gap).unwrap_or(time)
            }
            None => time,
        };
        self.last_arrival = time;
        self.push(time, Event::Arrival { case });
    }

    fn run(mut self) -> Result<SimulationOutput, SimulationError> {
        self.schedule_arrival(0);
        while let Some(Reverse((now, _, _))) = self.queue.peek().copied() {
            while let Some(Reverse((t, _, event))) = self.queue.peek().copied() {
                if t != now {
                    break;
                }
                self.queue.pop();
                self.events += 1;
                if self.events > self.cfg.event_budget {
                    return Err(SimulationError::EventBudget(self.cfg.event_budget));
                }
                self.handle(now, event);
            }
            self.dispatch(now);
        }
        self.finish()
    }

    fn handle(&mut self, now: Timestamp, event: Event) {
        match event {
            Event::Arrival { case } => {
                if case + 1 < self.cfg.num_traces {
                    self.schedule_arrival(case + 1);
                }
                let start = self.model.start_event.as_str();
                for flow in self.node_out[start].clone() {
                    self.tokens_alive[case] += 1;
                    self.push(
                        now,
                        Event::Token {
                            case,
                            flow,
                            token: TokenInfo::default(),
                        },
                    );
                }
            }
            Event::Token { case, flow, token } => self.route(now, case, flow, token),
            Event::Complete { item } => self.complete(now, item),
            Event::Wake => {}
        }
    }

    fn emit(&mut self, now: Timestamp, case: usize, from: &str, token: TokenInfo) {
        for flow in self.node_out[from].clone() {
            self.tokens_alive[case] += 1;
            self.push(now, Event::Token { case, flow, token });
        }
    }

    fn route(&mut self, now: Timestamp, case: usize, flow: usize, token: TokenInfo) {
        let model = self.model;
        let node = model.flows[flow].to.as_str();
        self.tokens_alive[case] -= 1;
        match model.node_kind(node).expect("validated model") {
            NodeKind::Start => unreachable!("start event has no incoming flows"),
            NodeKind::End => {}
            NodeKind::Task(_) => {
                let task_idx = self.task_labels.binary_search(&node).expect("known task");
                let item = self.items.len();
                self.items.push(WorkItem {
                    case,
                    task: task_idx,
                    enabled: now,
                    pending_draw: token.pending_draw,
                    resource: None,
                    instance: None,
                });
                self.tokens_alive[case] += 1;
                self.pending
                    .insert((self.items[item].enabled, case, task_idx, item));
            }
            NodeKind::Timer(timer) => {
                let delay = self.sample_seconds(&timer.duration);
                let draw = self.draws.len();
                self.draws.push(TimerDraw {
                    trace_id: self.trace_ids[case].clone(),
                    timer: node.to_string(),
                    activity: timer.attached_to.activity.clone(),
                    attribution: timer.attached_to.attribution,
                    delay,
                    start: now,
                    instance: match timer.attached_to.attribution {
                        Attribution::ExPost => token.after_instance,
                        Attribution::ExAnte => None,
                    },
                });
                let next = TokenInfo {
                    after_instance: None,
                    pending_draw: match timer.attached_to.attribution {
                        Attribution::ExAnte => Some(draw),
                        Attribution::ExPost => None,
                    },
                };
                for out in self.node_out[node].clone() {
                    self.tokens_alive[case] += 1;
                    self.push(
                        now + delay,
                        Event::Token {
                            case,
                            flow: out,
                            token: next,
                        },
                    );
                }
            }
            NodeKind::Gateway(g) => match (g.kind, g.direction) {
                (GatewayKind::Exclusive, GatewayDirection::Split) => {
                    let outs = &self.node_out[node];
                    let u: f64 = self.rng.random();
                    let mut acc = 0.0;
                    let mut chosen = None;
                    for &o in outs {
                        let p = g
                            .branch_probs
                            .get(&model.flows[o].to)
                            .copied()
                            .unwrap_or(0.0);
                        if p <= 0.0 {
                            continue;
                        }
                        acc += p;
                        chosen = Some(o);
                        if u < acc {
                            break;
                        }
                    }
                    let chosen = chosen.expect("validated branch probabilities");
                    self.tokens_alive[case] += 1;
                    self.push(
                        now,
                        Event::Token {
                            case,
                            flow: chosen,
                            token: TokenInfo::default(),
                        },
                    );
                }
                (GatewayKind::Parallel, GatewayDirection::Split)
                | (GatewayKind::Exclusive, GatewayDirection::Join) => {
                    self.emit(now, case, node, TokenInfo::default());
                }
                (GatewayKind::Parallel, GatewayDirection::Join) => {
                    let needed = self.node_in_count[node];
                    let arrived = self.join_arrivals.entry((case, node)).or_default();
                    arrived.insert(flow);
                    if arrived.len() == needed {
                        self.join_arrivals.remove(&(case, node));
                        self.tokens_alive[case] -= needed - 1;
                        self.emit(now, case, node, TokenInfo::default());
                    } else {
                        // The token now waits inside the join.
                        self.tokens_alive[case] += 1;
                    }
                }
            },
        }
    }

    fn dispatch(&mut self, now: Timestamp) {
        let waiting: Vec<_> = self.pending.iter().copied().collect();
        for key in waiting {
            let (_, _, task, item) = key;
            let best = self.task_pool[task]
                .iter()
                .copied()
                .filter(|&r| !self.resources[r].busy && self.resources[r].calendar.is_working(now))
                .min_by(|&a, &b| {
                    let (ra, rb) = (&self.resources[a], &self.resources[b]);
                    ra.idle_since
                        .cmp(&rb.idle_since)
                        .then_with(|| ra.label.cmp(&rb.label))
                });
            let Some(r) = best else { continue };
            self.pending.remove(&key);
            self.start(now, item, r);
        }
        // Resources that are idle but off duty must wake up for waiting work.
        let mut wakes = Vec::new();
        for &(_, _, task, _) in &self.pending {
            for &r in &self.task_pool[task] {
                let res = &self.resources[r];
                if res.busy {
                    continue;
                }
                if let Some(at) = res.calendar.next_working_instant(now) {
                    if at > now && res.wake_at.is_none_or(|w| w <= now || w > at) {
                        wakes.push((r, at));
                    }
                }
            }
        }
        for (r, at) in wakes {
            if self.resources[r].wake_at != Some(at) {
                self.resources[r].wake_at = Some(at);
                self.push(at, Event::Wake);
            }
        }
    }

    fn start(&mut self, now: Timestamp, item: usize, r: usize) {
        let task = self.items[item].task;
        let dist = &self.model.tasks[self.task_labels[task]].duration;
        let work = self.sample_seconds(dist);
        let res = &mut self.resources[r];
        let end = res
            .calendar
            .advance(now, work)
            .expect("validated calendar has working time");
        res.busy = true;
        let idx = self.instances.len();
        let case = self.items[item].case;
        self.instances.push(ActivityInstance::new(
            self.trace_ids[case].clone(),
            self.task_labels[task],
            now,
            end,
            res.label.clone(),
        ));
        self.instance_case.push(case);
        if let Some(d) = self.items[item].pending_draw {
            self.draws[d].instance = Some(idx);
        }
        self.items[item].instance = Some(idx);
        self.items[item].resource = Some(r);
        self.push(end, Event::Complete { item });
    }

    fn complete(&mut self, now: Timestamp, item: usize) {
        let r = self.items[item].resource.expect("started item");
        self.resources[r].busy = false;
        self.resources[r].idle_since = now;
        let case = self.items[item].case;
        let instance = self.items[item].instance;
        self.tokens_alive[case] -= 1;
        let node = self.task_labels[self.items[item].task];
        self.emit(
            now,
            case,
            node,
            TokenInfo {
                after_instance: instance,
                pending_draw: None,
            },
        );
    }

    fn finish(self) -> Result<SimulationOutput, SimulationError> {
        if let Some(case) = self.tokens_alive.iter().position(|&n| n > 0) {
            let node = self
                .join_arrivals
                .keys()
                .filter(|(c, _)| *c == case)
                .map(|(_, n)| n.to_string())
                .min()
                .unwrap_or_else(|| "unknown".into());
            return Err(SimulationError::Deadlock {
                case: self.trace_ids[case].clone(),
                node,
            });
        }
        // Order instances by case, then start time.
        let mut order: Vec<usize> = (0..self.instances.len()).collect();
        let inst = &self.instances;
        order.sort_by(|&a, &b| {
            (
                self.instance_case[a],
                inst[a].start,
                inst[a].end,
                &inst[a].activity,
                a,
            )
                .cmp(&(
                    self.instance_case[b],
                    inst[b].start,
                    inst[b].end,
                    &inst[b].activity,
                    b,
                ))
        });
        let mut new_index = vec![0; order.len()];
        for (new, &old) in order.iter().enumerate() {
            new_index[old] = new;
        }
        let mut instances: Vec<Option<ActivityInstance>> =
            self.instances.into_iter().map(Some).collect();
        let log = ActivityInstanceLog::new(
            order
                .iter()
                .map(|&i| instances[i].take().expect("once"))
                .collect(),
        );
        let mut timer_draws = self.draws;
        for d in &mut timer_draws {
            d.instance = d.instance.map(|i| new_index[i]);
        }
        Ok(SimulationOutput { log, timer_draws })
    }
}

/// Runs one simulation.
pub fn simulate(
    model: &BpsModel,
    cfg: &SimulationConfig,
) -> Result<SimulationOutput, SimulationError> {
    cfg.validate()?;
    model.validate()?;
    Engine::new(model, *cfg).run()
}

/// Runs `runs` independent simulations seeded `seed`, `seed + 1`, ...
pub fn simulate_many(
    model: &BpsModel,
    cfg: &SimulationConfig,
    runs: usize,
) -> Result<Vec<SimulationOutput>, SimulationError> {
    if runs == 0 {
        return Err(SimulationError::Config("runs must be at least 1".into()));
    }
    cfg.validate()?;
    model.validate()?;
    (0..runs)
        .into_par_iter()
        .map(|k| {
            let cfg = SimulationConfig {
                seed: cfg.seed.wrapping_add(k as u64),
                ..*cfg
            };
            Engine::new(model, cfg).run()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bps_model::{Flow, Gateway, Pool, Task, Timer, TimerAttachment};
    use crate::calendars::DayTime;
    use crate::distribution::DurationDistribution;
    use crate::metrics::cycle_times;

    fn fixed(v: f64) -> DurationDistribution {
        DurationDistribution::Fixed { value: v }
    }

    fn base(interarrival: f64, calendar: WeeklyCalendar, resources: &[&str]) -> BpsModel {
        let mut m = BpsModel::new(fixed(interarrival));
        m.pools.insert(
            "staff".into(),
            Pool {
                resources: resources.iter().map(|r| r.to_string()).collect(),
                calendar,
            },
        );
        m
    }

    fn single_task(duration: DurationDistribution) -> BpsModel {
        let mut m = base(1e6, WeeklyCalendar::always(), &["R1"]);
        m.tasks.insert(
            "A".into(),
            Task {
                duration,
                pool: "staff".into(),
            },
        );
        m.flows = vec![Flow::new("start", "A"), Flow::new("A", "end")];
        m
    }

    #[test]
    fn no_contention_cycle_time_is_duration() {
        let out = simulate(&single_task(fixed(100.0)), &SimulationConfig::new(5, 1)).unwrap();
        assert_eq!(out.log.len(), 5);
        assert_eq!(cycle_times(&out.log), vec![100.0; 5]);
    }

    #[test]
    fn parallel_branches_take_the_longest() {
        let mut m = base(1e6, WeeklyCalendar::always(), &["R1", "R2"]);
        m.tasks.insert(
            "B".into(),
            Task {
                duration: fixed(100.0),
                pool: "staff".into(),
            },
        );
        m.tasks.insert(
            "C".into(),
            Task {
                duration: fixed(300.0),
                pool: "staff".into(),
            },
        );
        for (id, direction) in [
            ("fork", GatewayDirection::Split),
            ("sync", GatewayDirection::Join),
        ] {
            m.gateways.insert(
                id.into(),
                Gateway {
                    kind: GatewayKind::Parallel,
                    direction,
                    branch_probs: BTreeMap::new(),
                },
            );
        }
        m.flows = vec![
            Flow::new("start", "fork"),
            Flow::new("fork", "B"),
            Flow::new("fork", "C"),
            Flow::new("B", "sync"),
            Flow::new("C", "sync"),
            Flow::new("sync", "end"),
        ];
        let out = simulate(&m, &SimulationConfig::new(4, 2)).unwrap();
        assert_eq!(cycle_times(&out.log), vec![300.0; 4]);
    }

    #[test]
    fn timer_adds_wall_clock_wait() {
        let mut m = single_task(fixed(100.0));
        m.set_timer("A", Attribution::ExAnte, fixed(900.0)).unwrap();
        let out = simulate(&m, &SimulationConfig::new(3, 3)).unwrap();
        let traces = out.log.traces();
        for (k, idx) in traces.values().enumerate() {
            let inst = &out.log.instances[idx[0]];
            let arrival = SimulationConfig::default().start_instant + k as i64 * 1_000_000;
            assert_eq!(inst.end - arrival, 1000);
        }
        assert_eq!(out.timer_draws.len(), 3);
        for d in &out.timer_draws {
            assert_eq!(d.delay, 900);
            let inst = &out.log.instances[d.instance.unwrap()];
            assert_eq!(inst.trace_id, d.trace_id);
            assert_eq!(inst.start, d.start + 900);
        }
    }

    #[test]
    fn ex_post_draws_link_to_preceding_instance() {
        let mut m = single_task(fixed(100.0));
        m.set_timer("A", Attribution::ExPost, fixed(50.0)).unwrap();
        let out = simulate(&m, &SimulationConfig::new(2, 3)).unwrap();
        for d in &out.timer_draws {
            let inst = &out.log.instances[d.instance.unwrap()];
            assert_eq!(inst.end, d.start);
        }
    }

    #[test]
    fn exclusive_split_probabilities() {
        let mut m = base(1e6, WeeklyCalendar::always(), &["R1"]);
        for t in ["B", "C"] {
            m.tasks.insert(
                t.into(),
                Task {
                    duration: fixed(10.0),
                    pool: "staff".into(),
                },
            );
        }
        m.gateways.insert(
            "x".into(),
            Gateway {
                kind: GatewayKind::Exclusive,
                direction: GatewayDirection::Split,
                branch_probs: BTreeMap::from([("B".into(), 0.8), ("C".into(), 0.2)]),
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
            Flow::new("start", "x"),
            Flow::new("x", "B"),
            Flow::new("x", "C"),
            Flow::new("B", "m"),
            Flow::new("C", "m"),
            Flow::new("m", "end"),
        ];
        let out = simulate(&m, &SimulationConfig::new(2000, 4)).unwrap();
        let b = out
            .log
            .instances
            .iter()
            .filter(|i| i.activity == "B")
            .count() as f64
            / 2000.0;
        assert!((b - 0.8).abs() < 0.03, "{b}");
    }

    #[test]
    fn contention_and_calendars_are_respected() {
        let cal = WeeklyCalendar::daily(DayTime::hms(8, 0, 0), DayTime::hms(16, 0, 0));
        let mut m = base(0.0, cal.clone(), &["R1", "R2"]);
        m.arrivals.interarrival = DurationDistribution::Exponential { mean: 1200.0 };
        m.tasks.insert(
            "A".into(),
            Task {
                duration: DurationDistribution::Exponential { mean: 1800.0 },
                pool: "staff".into(),
            },
        );
        m.tasks.insert(
            "B".into(),
            Task {
                duration: fixed(3000.0),
                pool: "staff".into(),
            },
        );
        m.flows = vec![
            Flow::new("start", "A"),
            Flow::new("A", "B"),
            Flow::new("B", "end"),
        ];
        let out = simulate(&m, &SimulationConfig::new(300, 5)).unwrap();
        assert_eq!(out.log.len(), 600);
        let mut by_resource: BTreeMap<&str, Vec<(i64, i64)>> = BTreeMap::new();
        for inst in &out.log.instances {
            assert!(cal.is_working(inst.start), "{inst:?} starts off duty");
            let worked: i64 = cal
                .working_intervals(inst.interval())
                .iter()
                .map(|iv| iv.duration())
                .sum();
            assert!(inst.duration() == 0 || worked > 0);
            by_resource
                .entry(&inst.resource)
                .or_default()
                .push((inst.start, inst.end));
        }
        for spans in by_resource.values_mut() {
            spans.sort();
            for w in spans.windows(2) {
                assert!(w[0].1 <= w[1].0, "overlap {w:?}");
            }
        }
    }

    #[test]
    fn deterministic_under_seed() {
        let mut m = single_task(DurationDistribution::Exponential { mean: 500.0 });
        m.arrivals.interarrival = DurationDistribution::Exponential { mean: 400.0 };
        let cfg = SimulationConfig::new(200, 9);
        assert_eq!(simulate(&m, &cfg).unwrap(), simulate(&m, &cfg).unwrap());
        let many = simulate_many(&m, &cfg, 3).unwrap();
        assert_eq!(many.len(), 3);
        assert_eq!(many[0], simulate(&m, &cfg).unwrap());
        assert_eq!(many, simulate_many(&m, &cfg, 3).unwrap());
        assert_ne!(many[0].log, many[1].log);
    }

    #[test]
    fn config_and_budget_errors() {
        let m = single_task(fixed(1.0));
        assert!(matches!(
            simulate(&m, &SimulationConfig::new(0, 1)),
            Err(SimulationError::Config(_))
        ));
        assert!(simulate_many(&m, &SimulationConfig::new(1, 1), 0).is_err());
        let cfg = SimulationConfig {
            event_budget: 5,
            ..SimulationConfig::new(100, 1)
        };
        assert!(matches!(
            simulate(&m, &cfg),
            Err(SimulationError::EventBudget(5))
        ));
    }

    #[test]
    fn timers_do_not_hold_resources() {
        let mut m = single_task(fixed(100.0));
        m.arrivals.interarrival = fixed(10.0);
        m.timers.clear();
        m.set_timer("A", Attribution::ExAnte, fixed(1000.0))
            .unwrap();
        let out = simulate(&m, &SimulationConfig::new(3, 1)).unwrap();
        let _ = Timer {
            duration: fixed(0.0),
            attached_to: TimerAttachment {
                activity: "A".into(),
                attribution: Attribution::ExAnte,
            },
        };
        let starts: Vec<i64> = out.log.instances.iter().map(|i| i.start).collect();
        let t0 = SimulationConfig::default().start_instant;
        assert_eq!(starts, vec![t0 + 1000, t0 + 1100, t0 + 1200]);
    }
}
