//! Inputs shared by the benchmarks.

use std::collections::BTreeMap;

use delayminer_core::bps_model::{Flow, Pool, Task};
use delayminer_core::calendars::DayTime;
use delayminer_core::simulator::{simulate, SimulationConfig};
use delayminer_core::{
    ActivityInstanceLog, Attribution, BpsModel, DurationDistribution, WeeklyCalendar,
};

/// Four sequential tasks sharing two busy clerks, with one timer.
pub fn sequence_model() -> BpsModel {
    let mut m = BpsModel::new(DurationDistribution::Exponential { mean: 900.0 });
    m.pools.insert(
        "clerks".into(),
        Pool {
            resources: vec!["clerk_1".into(), "clerk_2".into()],
            calendar: WeeklyCalendar::daily(DayTime::hms(8, 0, 0), DayTime::hms(17, 0, 0)),
        },
    );
    let tasks = ["A", "B", "C", "D"];
    for t in tasks {
        m.tasks.insert(
            t.into(),
            Task {
                duration: DurationDistribution::Exponential { mean: 400.0 },
                pool: "clerks".into(),
            },
        );
    }
    let nodes: Vec<&str> = std::iter::once("start")
        .chain(tasks)
        .chain(std::iter::once("end"))
        .collect();
    m.flows = nodes.windows(2).map(|w| Flow::new(w[0], w[1])).collect();
    m.set_timer(
        "C",
        Attribution::ExAnte,
        DurationDistribution::Fixed { value: 1800.0 },
    )
    .expect("task exists");
    m
}

pub fn simulated_log(traces: usize) -> ActivityInstanceLog {
    simulate(&sequence_model(), &SimulationConfig::new(traces, 1))
        .expect("model simulates")
        .log
}

/// Histogram pairs of `bins` bins with deterministic pseudo-random masses.
pub fn histogram_pair(bins: usize) -> (Vec<f64>, Vec<f64>) {
    let mass = |k: usize, salt: u64| ((k as u64 * 2_654_435_761 + salt) % 97) as f64 + 1.0;
    (
        (0..bins).map(|k| mass(k, 3)).collect(),
        (0..bins).map(|k| mass(k, 41)).collect(),
    )
}

pub fn model_calendars() -> BTreeMap<String, delayminer_core::ResourceCalendar> {
    sequence_model().strip_timers().resource_calendars()
}
