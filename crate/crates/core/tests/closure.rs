use std::collections::BTreeMap;

use delayminer_core::bps_model::{Flow, Gateway, GatewayDirection, GatewayKind, Pool, Task};
use delayminer_core::calendars::DayTime;
use delayminer_core::delay_discovery::{discover, DelayConfig, Estimator};
use delayminer_core::distribution::DurationDistribution;
use delayminer_core::simulator::{simulate, SimulationConfig};
use delayminer_core::{Attribution, BpsModel, Weekday, WeeklyCalendar};

fn exp(mean: f64) -> DurationDistribution {
    DurationDistribution::Exponential { mean }
}

/// A -> xor(B | C) -> and(D, E) -> end, two pools with different hours.
fn busy_office() -> BpsModel {
    let mut m = BpsModel::new(exp(900.0));
    let weekdays = [
        Weekday::Monday,
        Weekday::Tuesday,
        Weekday::Wednesday,
        Weekday::Thursday,
        Weekday::Friday,
    ];
    m.pools.insert(
        "clerks".into(),
        Pool {
            resources: vec!["Ann".into(), "Bob".into()],
            calendar: WeeklyCalendar::on_days(
                &weekdays,
                DayTime::hms(8, 0, 0),
                DayTime::hms(16, 0, 0),
            ),
        },
    );
    m.pools.insert(
        "managers".into(),
        Pool {
            resources: vec!["Cid".into()],
            calendar: WeeklyCalendar::daily(DayTime::hms(10, 0, 0), DayTime::hms(18, 30, 0)),
        },
    );
    for (t, mean, pool) in [
        ("A", 1200.0, "clerks"),
        ("B", 900.0, "clerks"),
        ("C", 1500.0, "managers"),
        ("D", 600.0, "managers"),
        ("E", 1800.0, "clerks"),
    ] {
        m.tasks.insert(
            t.into(),
            Task {
                duration: exp(mean),
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
    m.flows = [
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
        ("sync", "end"),
    ]
    .into_iter()
    .map(|(a, b)| Flow::new(a, b))
    .collect();
    m
}

#[test]
fn timer_free_simulation_has_no_extraneous_delay() {
    let model = busy_office();
    let calendars = model.resource_calendars();
    for seed in [1, 2, 3] {
        let out = simulate(&model, &SimulationConfig::new(300, seed)).unwrap();
        let instances = out.log.len();
        assert!(instances > 0);
        for estimator in [
            Estimator::Naive,
            Estimator::EclipseAware,
            Estimator::EclipseAwareExtrapolated,
        ] {
            for attribution in [Attribution::ExAnte, Attribution::ExPost] {
                let cfg = DelayConfig {
                    estimator,
                    lambda: 1,
                    attribution,
                    ..DelayConfig::default()
                };
                let found = discover(&out.log, &calendars, &cfg).unwrap();
                let positive: Vec<_> = found.delays.iter().filter(|d| d.extraneous != 0).collect();
                assert!(
                    positive.is_empty(),
                    "seed {seed} {estimator}: {:?}",
                    &positive[..positive.len().min(3)]
                );
                assert!(found.report.is_empty());
            }
        }
    }
}

#[test]
fn contention_actually_occurs() {
    let out = simulate(&busy_office(), &SimulationConfig::new(300, 1)).unwrap();
    let calendars = busy_office().resource_calendars();
    let found = discover(&out.log, &calendars, &DelayConfig::default()).unwrap();
    let waited = found.delays.iter().filter(|d| d.waiting > 0).count();
    assert!(
        waited * 2 > found.delays.len(),
        "{waited} of {}",
        found.delays.len()
    );
}
