//! Brute-force reference implementations used by property tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Datelike, Timelike};
use delayminer_core::log_io::ActivityInstanceLog;
use delayminer_core::time::{Interval, Timestamp};
use delayminer_core::timeline::{CausalPair, ConcurrencyRelation};
use delayminer_core::{Weekday, WeeklyCalendar};

/// Minimum-cost transport between two unit-normalised histograms with
/// ground distance |i - j|, by successive shortest augmenting paths.
pub fn transport_cost(a: &[f64], b: &[f64]) -> f64 {
    let (sa, sb): (f64, f64) = (a.iter().sum(), b.iter().sum());
    let supply: Vec<f64> = a.iter().map(|x| x / sa).collect();
    let demand: Vec<f64> = b.iter().map(|x| x / sb).collect();
    let (n, m) = (supply.len(), demand.len());
    // Nodes: 0 source, 1..=n suppliers, n+1..=n+m consumers, n+m+1 sink.
    let nodes = n + m + 2;
    let sink = nodes - 1;
    let mut cap = vec![vec![0.0f64; nodes]; nodes];
    let mut cost = vec![vec![0.0f64; nodes]; nodes];
    for i in 0..n {
        cap[0][1 + i] = supply[i];
        for j in 0..m {
            cap[1 + i][1 + n + j] = f64::INFINITY;
            let c = (i as f64 - j as f64).abs();
            cost[1 + i][1 + n + j] = c;
            cost[1 + n + j][1 + i] = -c;
        }
    }
    for j in 0..m {
        cap[1 + n + j][sink] = demand[j];
    }
    let eps = 1e-13;
    let mut total = 0.0;
    loop {
        let mut dist = vec![f64::INFINITY; nodes];
        let mut prev = vec![usize::MAX; nodes];
        dist[0] = 0.0;
        for _ in 0..nodes {
            let mut changed = false;
            for u in 0..nodes {
                if !dist[u].is_finite() {
                    continue;
                }
                for v in 0..nodes {
                    if cap[u][v] > eps && dist[u] + cost[u][v] < dist[v] - 1e-12 {
                        dist[v] = dist[u] + cost[u][v];
                        prev[v] = u;
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        if !dist[sink].is_finite() {
            break;
        }
        let mut flow = f64::INFINITY;
        let mut v = sink;
        while v != 0 {
            let u = prev[v];
            flow = flow.min(cap[u][v]);
            v = u;
        }
        if flow <= eps {
            break;
        }
        let mut v = sink;
        while v != 0 {
            let u = prev[v];
            cap[u][v] -= flow;
            cap[v][u] += flow;
            v = u;
        }
        total += flow * dist[sink];
    }
    total
}

fn weekday_of(t: Timestamp) -> (Weekday, u32) {
    let dt = DateTime::from_timestamp(t, 0).unwrap();
    let day = Weekday::from_index(dt.weekday().num_days_from_monday() as i64);
    (day, dt.num_seconds_from_midnight())
}

/// Whether the calendar covers second `t`, read directly off the slots.
pub fn on_duty(cal: &WeeklyCalendar, t: Timestamp) -> bool {
    let (day, sec) = weekday_of(t);
    cal.slots
        .iter()
        .any(|s| s.weekday == day && s.from.0 <= sec && sec < s.to.0)
}

/// Availability intervals of `resource` in `[from, to)` by scanning every
/// second. Off-duty time only counts inside the log span.
pub fn availability_by_scan(
    log: &ActivityInstanceLog,
    resource: &str,
    calendar: Option<&WeeklyCalendar>,
    from: Timestamp,
    to: Timestamp,
    lambda: i64,
) -> Vec<Interval> {
    let span = log.span().unwrap();
    let busy: Vec<Interval> = log
        .instances
        .iter()
        .filter(|i| i.resource == resource)
        .map(|i| i.interval())
        .collect();
    let free = |s: Timestamp| {
        let off = calendar.is_some_and(|c| s >= span.start && s < span.end && !on_duty(c, s));
        !off && !busy.iter().any(|b| b.start <= s && s < b.end)
    };
    let mut out = Vec::new();
    let mut run_start: Option<Timestamp> = None;
    for s in from..to {
        match (free(s), run_start) {
            (true, None) => run_start = Some(s),
            (false, Some(r)) => {
                out.push(Interval::new(r, s));
                run_start = None;
            }
            _ => {}
        }
    }
    if let Some(r) = run_start {
        out.push(Interval::new(r, to));
    }
    out.retain(|iv| iv.duration() > 0 && iv.duration() >= lambda);
    out
}

/// Concurrency by counting, per activity pair, the traces with an
/// overlapping instance pair over the traces containing both.
pub fn concurrency_by_counting(log: &ActivityInstanceLog, zeta: f64) -> BTreeSet<(String, String)> {
    let mut co: BTreeMap<(String, String), (usize, usize)> = BTreeMap::new();
    let traces: BTreeSet<&str> = log.instances.iter().map(|i| i.trace_id.as_str()).collect();
    let labels: BTreeSet<&str> = log.instances.iter().map(|i| i.activity.as_str()).collect();
    for trace in traces {
        let inst: Vec<_> = log
            .instances
            .iter()
            .filter(|i| i.trace_id == trace)
            .collect();
        for a in &labels {
            for b in &labels {
                if a >= b {
                    continue;
                }
                let has_a = inst.iter().any(|i| i.activity == *a);
                let has_b = inst.iter().any(|i| i.activity == *b);
                if !(has_a && has_b) {
                    continue;
                }
                let overlap = inst.iter().any(|x| {
                    x.activity == *a
                        && inst
                            .iter()
                            .any(|y| y.activity == *b && x.start < y.end && y.start < x.end)
                });
                let e = co.entry((a.to_string(), b.to_string())).or_default();
                e.0 += 1;
                e.1 += overlap as usize;
            }
        }
    }
    co.into_iter()
        .filter(|(_, (n, k))| *n > 0 && *k as f64 / *n as f64 >= zeta)
        .map(|(p, _)| p)
        .collect()
}

/// Direct evaluation of the causal predecessor definition over all pairs.
pub fn causal_pairs_quadratic(
    log: &ActivityInstanceLog,
    rel: &ConcurrencyRelation,
) -> (Vec<CausalPair>, Vec<usize>) {
    let mut pairs = Vec::new();
    let mut orphans = Vec::new();
    for (t, target) in log.instances.iter().enumerate() {
        let mut best: Option<usize> = None;
        for (c, cand) in log.instances.iter().enumerate() {
            if c == t
                || cand.trace_id != target.trace_id
                || cand.end > target.start
                || rel.are_concurrent(&cand.activity, &target.activity)
            {
                continue;
            }
            best = match best {
                None => Some(c),
                Some(b) => {
                    let cur = &log.instances[b];
                    let better = cand.end > cur.end
                        || (cand.end == cur.end && cand.activity < cur.activity)
                        || (cand.end == cur.end && cand.activity == cur.activity && c < b);
                    Some(if better { c } else { b })
                }
            };
        }
        match best {
            Some(s) => pairs.push(CausalPair {
                source: s,
                target: t,
            }),
            None => orphans.push(t),
        }
    }
    (pairs, orphans)
}
