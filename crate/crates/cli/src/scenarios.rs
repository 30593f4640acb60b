//! Synthetic simulation models with known behaviour, used to exercise the
//! pipelines end to end.

use std::collections::BTreeMap;

use delayminer_core::bps_model::{Flow, Gateway, GatewayDirection, GatewayKind, Pool, Task};
use delayminer_core::calendars::DayTime;
use delayminer_core::distribution::DurationDistribution;
use delayminer_core::{Attribution, BpsModel, Weekday, WeeklyCalendar};

fn exp(mean: f64) -> DurationDistribution {
    DurationDistribution::Exponential { mean }
}

fn fixed(value: f64) -> DurationDistribution {
    DurationDistribution::Fixed { value }
}

const WEEKDAYS: [Weekday; 5] = [
    Weekday::Monday,
    Weekday::Tuesday,
    Weekday::Wednesday,
    Weekday::Thursday,
    Weekday::Friday,
];

fn office_hours() -> WeeklyCalendar {
    WeeklyCalendar::on_days(&WEEKDAYS, DayTime::hms(8, 0, 0), DayTime::hms(16, 0, 0))
}

#[derive(Debug, Clone)]
pub struct OfficeParams {
    /// Mean inter-arrival time, counted in office hours only.
    pub interarrival_mean: f64,
    pub clerks: usize,
    pub managers: usize,
    /// Adds the closing task "F" after the parallel block.
    pub closing_task: bool,
    /// Ex-ante timers: activity → delay distribution.
    pub timers: Vec<(&'static str, DurationDistribution)>,
    /// Scales every task duration.
    pub work_scale: f64,
}

impl Default for OfficeParams {
    fn default() -> Self {
        Self {
            interarrival_mean: 1800.0,
            clerks: 3,
            managers: 1,
            closing_task: true,
            timers: Vec::new(),
            work_scale: 1.0,
        }
    }
}

/// `A → xor(B 0.6 | C 0.4) → and(D, E) [→ F] → end`.
///
/// Clerks (A, B, E, F) work weekdays 08–16; managers (C, D) every day
/// 10–18:30. Cases arrive during office hours.
pub fn office(params: &OfficeParams) -> BpsModel {
    let mut m = BpsModel::new(exp(params.interarrival_mean));
    m.arrivals.calendar = Some(office_hours());
    m.pools.insert(
        "clerks".into(),
        Pool {
            resources: (1..=params.clerks).map(|k| format!("clerk_{k}")).collect(),
            calendar: office_hours(),
        },
    );
    m.pools.insert(
        "managers".into(),
        Pool {
            resources: (1..=params.managers)
                .map(|k| format!("manager_{k}"))
                .collect(),
            calendar: WeeklyCalendar::daily(DayTime::hms(10, 0, 0), DayTime::hms(18, 30, 0)),
        },
    );
    let w = params.work_scale;
    let mut tasks = vec![
        ("A", exp(900.0 * w), "clerks"),
        ("B", exp(600.0 * w), "clerks"),
        ("C", exp(1500.0 * w), "managers"),
        ("D", exp(900.0 * w), "managers"),
        ("E", exp(1200.0 * w), "clerks"),
    ];
    if params.closing_task {
        tasks.push(("F", fixed(600.0 * w), "clerks"));
    }
    for (t, duration, pool) in tasks {
        m.tasks.insert(
            t.into(),
            Task {
                duration,
                pool: pool.into(),
            },
        );
    }
    let gw = |kind, direction| Gateway {
        kind,
        direction,
        branch_probs: BTreeMap::new(),
    };
    m.gateways.insert(
        "choice".into(),
        Gateway {
            branch_probs: BTreeMap::from([("B".into(), 0.6), ("C".into(), 0.4)]),
            ..gw(GatewayKind::Exclusive, GatewayDirection::Split)
        },
    );
    m.gateways.insert(
        "merge".into(),
        gw(GatewayKind::Exclusive, GatewayDirection::Join),
    );
    m.gateways.insert(
        "fork".into(),
        gw(GatewayKind::Parallel, GatewayDirection::Split),
    );
    m.gateways.insert(
        "sync".into(),
        gw(GatewayKind::Parallel, GatewayDirection::Join),
    );
    let last = if params.closing_task { "F" } else { "sync" };
    let mut flows = vec![
        ("start", "A"),
        ("A", "choice"),
        ("choice", "B"),
        ("choice", "C"),
        ("B", "merge"),
        ("C", "merge"),
        ("merge", "fork"),
        ("fork", "D"),
        ("fork", "E"),
        ("D", "sync"),
        ("E", "sync"),
    ];
    if params.closing_task {
        flows.push(("sync", "F"));
    }
    flows.push((last, "end"));
    m.flows = flows.into_iter().map(|(a, b)| Flow::new(a, b)).collect();
    for (activity, duration) in &params.timers {
        m.set_timer(activity, Attribution::ExAnte, duration.clone())
            .expect("scenario timers target existing tasks");
    }
    m
}

/// Five activities, busy resources, calendars, no timers.
pub fn closure_model() -> BpsModel {
    office(&OfficeParams {
        interarrival_mean: 1200.0,
        clerks: 2,
        closing_task: false,
        ..OfficeParams::default()
    })
}

/// Timer set of `n` timers (1, 3 or 5), mixing fixed and exponential
/// delays. None precedes the first activity, where a delay could not be
/// told apart from a later arrival.
pub fn timer_set(n: usize) -> Vec<(&'static str, DurationDistribution)> {
    let order = ["F", "B", "E", "C", "D"];
    order
        .iter()
        .take(n.min(order.len()))
        .enumerate()
        .map(|(k, &a)| {
            let d = if k % 2 == 0 {
                fixed(3600.0 * (1 + k) as f64)
            } else {
                exp(2400.0 * (1 + k) as f64)
            };
            (a, d)
        })
        .collect()
}

/// Moderate load with `n` injected timers.
pub fn rediscovery_model(n: usize) -> BpsModel {
    office(&OfficeParams {
        interarrival_mean: 2400.0,
        timers: timer_set(n),
        ..OfficeParams::default()
    })
}

/// High load, so timers often expire while the resource is busy.
pub fn eclipse_rich_model(variant: usize) -> BpsModel {
    let interarrival = [1100.0, 1250.0, 1400.0, 1000.0][variant % 4];
    office(&OfficeParams {
        interarrival_mean: interarrival,
        clerks: 3,
        managers: 1,
        timers: timer_set(3 + variant % 3),
        ..OfficeParams::default()
    })
}

/// Invoice handling: register, then post and notify in parallel, then pay;
/// optionally with a six-hour timer before paying.
pub fn invoice_model(with_timer: bool) -> BpsModel {
    let mut m = BpsModel::new(exp(3600.0));
    m.arrivals.calendar = Some(office_hours());
    let cal = WeeklyCalendar::daily(DayTime::hms(8, 0, 0), DayTime::hms(16, 0, 0));
    for (pool, resources) in [
        ("accounting", vec!["BoJack"]),
        ("posting", vec!["Sarah", "Todd"]),
        ("notification", vec!["Carolyn"]),
    ] {
        m.pools.insert(
            pool.into(),
            Pool {
                resources: resources.into_iter().map(String::from).collect(),
                calendar: cal.clone(),
            },
        );
    }
    for (t, mean, pool) in [
        ("Register invoice", 1500.0, "accounting"),
        ("Post invoice", 1800.0, "posting"),
        ("Notify acceptance", 1500.0, "notification"),
        ("Pay invoice", 900.0, "accounting"),
    ] {
        m.tasks.insert(
            t.into(),
            Task {
                duration: exp(mean),
                pool: pool.into(),
            },
        );
    }
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
    m.flows = [
        ("start", "Register invoice"),
        ("Register invoice", "fork"),
        ("fork", "Post invoice"),
        ("fork", "Notify acceptance"),
        ("Post invoice", "sync"),
        ("Notify acceptance", "sync"),
        ("sync", "Pay invoice"),
        ("Pay invoice", "end"),
    ]
    .into_iter()
    .map(|(a, b)| Flow::new(a, b))
    .collect();
    if with_timer {
        m.set_timer("Pay invoice", Attribution::ExAnte, fixed(6.0 * 3600.0))
            .expect("task exists");
    }
    m
}
