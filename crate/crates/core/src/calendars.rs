//! Weekly working calendars, their absolute non-working intervals, and a
//! simple support/confidence calendar discovery.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::log_io::ActivityInstanceLog;
use crate::time::{
    complement_within, merge_intervals, Interval, Timestamp, SECONDS_PER_DAY, SECONDS_PER_WEEK,
};

#[derive(Debug, Error, PartialEq)]
pub enum CalendarError {
    #[error("granularity {0} s does not divide a day")]
    Granularity(i64),
    #[error("{name} must lie in [0, 1], got {value}")]
    Ratio { name: &'static str, value: f64 },
    #[error("invalid slot {0}")]
    Slot(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Weekday {
    Monday,
    Tuesday,
    Wednesday,
    Thursday,
    Friday,
    Saturday,
    Sunday,
}

impl Weekday {
    pub const ALL: [Weekday; 7] = [
        Weekday::Monday,
        Weekday::Tuesday,
        Weekday::Wednesday,
        Weekday::Thursday,
        Weekday::Friday,
        Weekday::Saturday,
        Weekday::Sunday,
    ];

    /// Days since Monday.
    pub fn index(self) -> i64 {
        self as i64
    }

    pub fn from_index(idx: i64) -> Weekday {
        Self::ALL[idx.rem_euclid(7) as usize]
    }
}

/// Start of the (Monday 00:00 UTC based) week containing `t`.
pub fn week_start(t: Timestamp) -> Timestamp {
    // 1970-01-01 was a Thursday, three days after a Monday.
    let shifted = t + 3 * SECONDS_PER_DAY;
    shifted.div_euclid(SECONDS_PER_WEEK) * SECONDS_PER_WEEK - 3 * SECONDS_PER_DAY
}

/// Seconds of the day, serialised as `HH:MM:SS` (`24:00:00` allowed).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DayTime(pub u32);

impl DayTime {
    pub fn hms(h: u32, m: u32, s: u32) -> Self {
        DayTime(h * 3600 + m * 60 + s)
    }
}

impl fmt::Display for DayTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:02}:{:02}:{:02}",
            self.0 / 3600,
            self.0 / 60 % 60,
            self.0 % 60
        )
    }
}

impl std::str::FromStr for DayTime {
    type Err = CalendarError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || CalendarError::Slot(format!("bad time of day '{s}'"));
        let mut parts = s.trim().split(':');
        let mut next = |required: bool| -> Result<u32, CalendarError> {
            match parts.next() {
                Some(p) => p.parse().map_err(|_| err()),
                None if required => Err(err()),
                None => Ok(0),
            }
        };
        let (h, m, sec) = (next(true)?, next(true)?, next(false)?);
        if m >= 60 || sec >= 60 {
            return Err(err());
        }
        let total = h * 3600 + m * 60 + sec;
        if total > SECONDS_PER_DAY as u32 {
            return Err(err());
        }
        Ok(DayTime(total))
    }
}

impl Serialize for DayTime {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for DayTime {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        raw.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct WeeklySlot {
    pub weekday: Weekday,
    pub from: DayTime,
    pub to: DayTime,
}

impl WeeklySlot {
    pub fn new(weekday: Weekday, from: DayTime, to: DayTime) -> Self {
        Self { weekday, from, to }
    }

    /// Offsets within the week.
    fn week_offsets(&self) -> Interval {
        let day = self.weekday.index() * SECONDS_PER_DAY;
        Interval::new(day + self.from.0 as i64, day + self.to.0 as i64)
    }
}

/// A set of weekly working slots.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeeklyCalendar {
    pub slots: Vec<WeeklySlot>,
}

impl WeeklyCalendar {
    pub fn new(slots: Vec<WeeklySlot>) -> Result<Self, CalendarError> {
        let cal = Self { slots };
        cal.validate()?;
        Ok(cal.normalized())
    }

    /// Working around the clock.
    pub fn always() -> Self {
        Self::daily(DayTime(0), DayTime(SECONDS_PER_DAY as u32))
    }

    /// Same working hours every day of the week.
    pub fn daily(from: DayTime, to: DayTime) -> Self {
        Self::on_days(&Weekday::ALL, from, to)
    }

    pub fn on_days(days: &[Weekday], from: DayTime, to: DayTime) -> Self {
        Self {
            slots: days.iter().map(|&d| WeeklySlot::new(d, from, to)).collect(),
        }
    }

    pub fn validate(&self) -> Result<(), CalendarError> {
        for slot in &self.slots {
            if slot.from >= slot.to || slot.to.0 > SECONDS_PER_DAY as u32 {
                return Err(CalendarError::Slot(format!(
                    "{:?} {}-{}",
                    slot.weekday, slot.from, slot.to
                )));
            }
        }
        Ok(())
    }

    /// Slots merged per weekday, sorted.
    pub fn normalized(&self) -> Self {
        let mut slots = Vec::new();
        for day in Weekday::ALL {
            let day_intervals = merge_intervals(
                self.slots
                    .iter()
                    .filter(|s| s.weekday == day)
                    .map(|s| Interval::new(s.from.0 as i64, s.to.0 as i64))
                    .collect(),
            );
            slots.extend(
                day_intervals.into_iter().map(|iv| {
                    WeeklySlot::new(day, DayTime(iv.start as u32), DayTime(iv.end as u32))
                }),
            );
        }
        Self { slots }
    }

    pub fn is_empty(&self) -> bool {
        self.slots.iter().all(|s| s.from >= s.to)
    }

    /// Merged working offsets within one week.
    fn week_offsets(&self) -> Vec<Interval> {
        merge_intervals(self.slots.iter().map(WeeklySlot::week_offsets).collect())
    }

    /// Absolute working intervals intersected with `span`, merged maximally
    /// (also across midnight and week boundaries).
    pub fn working_intervals(&self, span: Interval) -> Vec<Interval> {
        let offsets = self.week_offsets();
        if offsets.is_empty() || span.is_empty() {
            return Vec::new();
        }
        let mut out = Vec::new();
        let mut week = week_start(span.start);
        while week < span.end {
            for off in &offsets {
                let abs = Interval::new(week + off.start, week + off.end);
                if let Some(iv) = abs.intersection(&span) {
                    out.push(iv);
                }
            }
            week += SECONDS_PER_WEEK;
        }
        merge_intervals(out)
    }

    /// The working interval containing `t`, or the next one after it.
    /// Adjacent slots are merged, so the returned interval is maximal within
    /// one week.
    pub fn working_interval_from(&self, t: Timestamp) -> Option<Interval> {
        let offsets = self.week_offsets();
        let mut week = week_start(t);
        // Two weeks always suffice for a non-empty calendar.
        for _ in 0..3 {
            for off in &offsets {
                let abs = Interval::new(week + off.start, week + off.end);
                if abs.end > t {
                    return Some(abs);
                }
            }
            week += SECONDS_PER_WEEK;
        }
        None
    }

    pub fn is_working(&self, t: Timestamp) -> bool {
        self.working_interval_from(t)
            .is_some_and(|iv| iv.start <= t)
    }

    /// First instant `>= t` inside working time.
    pub fn next_working_instant(&self, t: Timestamp) -> Option<Timestamp> {
        self.working_interval_from(t).map(|iv| iv.start.max(t))
    }

    /// Instant at which `work` seconds of working time, counted from `t`,
    /// have elapsed. Work only progresses inside working intervals.
    pub fn advance(&self, t: Timestamp, work: i64) -> Option<Timestamp> {
        let mut now = t;
        let mut remaining = work.max(0);
        loop {
            let iv = self.working_interval_from(now)?;
            let begin = iv.start.max(now);
            if begin + remaining <= iv.end {
                return Some(begin + remaining);
            }
            remaining -= iv.end - begin;
            now = iv.end;
        }
    }
}

/// Weekly calendar of one resource.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResourceCalendar {
    pub resource: String,
    #[serde(flatten)]
    pub calendar: WeeklyCalendar,
}

impl ResourceCalendar {
    pub fn new(resource: impl Into<String>, calendar: WeeklyCalendar) -> Self {
        Self {
            resource: resource.into(),
            calendar,
        }
    }
}

/// Absolute off-duty intervals of a resource, clipped to a span.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NonWorkingIntervals {
    pub resource: String,
    pub intervals: Vec<Interval>,
}

/// Complement of the calendar's working time within `span`.
pub fn non_working_intervals(cal: &ResourceCalendar, span: Interval) -> NonWorkingIntervals {
    let working = cal.calendar.working_intervals(span);
    NonWorkingIntervals {
        resource: cal.resource.clone(),
        intervals: complement_within(&working, span),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscoveryParams {
    pub granularity: i64,
    pub support: f64,
    pub confidence: f64,
}

impl Default for DiscoveryParams {
    fn default() -> Self {
        Self {
            granularity: 3600,
            support: 0.1,
            confidence: 0.6,
        }
    }
}

impl DiscoveryParams {
    pub fn validate(&self) -> Result<(), CalendarError> {
        if self.granularity <= 0 || SECONDS_PER_DAY % self.granularity != 0 {
            return Err(CalendarError::Granularity(self.granularity));
        }
        for (name, value) in [("support", self.support), ("confidence", self.confidence)] {
            if !(0.0..=1.0).contains(&value) {
                return Err(CalendarError::Ratio { name, value });
            }
        }
        Ok(())
    }
}

/// Discovers a weekly calendar per resource from its interaction instants
/// (starts and ends of its activity instances).
///
/// A weekly slot is kept when the share of observed weeks in which the
/// resource interacted inside it reaches `confidence`, and its interaction
/// count reaches `support` times the resource's busiest slot count.
pub fn discover_calendars(
    log: &ActivityInstanceLog,
    params: DiscoveryParams,
) -> Result<BTreeMap<String, ResourceCalendar>, CalendarError> {
    params.validate()?;
    let slots_per_week = SECONDS_PER_WEEK / params.granularity;

    #[derive(Default)]
    struct Evidence {
        weeks: BTreeSet<i64>,
        slot_weeks: BTreeMap<i64, BTreeSet<i64>>,
        slot_counts: BTreeMap<i64, usize>,
    }
    let mut evidence: BTreeMap<&str, Evidence> = BTreeMap::new();
    for inst in &log.instances {
        let ev = evidence.entry(inst.resource.as_str()).or_default();
        for t in [inst.start, inst.end] {
            let week = week_start(t);
            let slot = (t - week) / params.granularity;
            ev.weeks.insert(week);
            ev.slot_weeks.entry(slot).or_default().insert(week);
            *ev.slot_counts.entry(slot).or_default() += 1;
        }
    }

    let mut calendars = BTreeMap::new();
    for (resource, ev) in evidence {
        let max_count = ev.slot_counts.values().copied().max().unwrap_or(0) as f64;
        let observed_weeks = ev.weeks.len() as f64;
        let mut kept: Vec<Interval> = Vec::new();
        for slot in 0..slots_per_week {
            let count = ev.slot_counts.get(&slot).copied().unwrap_or(0);
            if count == 0 {
                continue;
            }
            let weeks = ev.slot_weeks.get(&slot).map_or(0, BTreeSet::len) as f64;
            if weeks / observed_weeks >= params.confidence
                && count as f64 >= params.support * max_count
            {
                let start = slot * params.granularity;
                kept.push(Interval::new(start, start + params.granularity));
            }
        }
        let mut slots = Vec::new();
        for iv in merge_intervals(kept) {
            // Split merged week offsets back into per-day slots.
            let mut cursor = iv.start;
            while cursor < iv.end {
                let day = cursor / SECONDS_PER_DAY;
                let day_end = ((day + 1) * SECONDS_PER_DAY).min(iv.end);
                slots.push(WeeklySlot::new(
                    Weekday::from_index(day),
                    DayTime((cursor - day * SECONDS_PER_DAY) as u32),
                    DayTime((day_end - day * SECONDS_PER_DAY) as u32),
                ));
                cursor = day_end;
            }
        }
        calendars.insert(
            resource.to_string(),
            ResourceCalendar::new(resource, WeeklyCalendar { slots }),
        );
    }
    Ok(calendars)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::log_io::ActivityInstance;
    use crate::time::utc;

    fn office() -> WeeklyCalendar {
        WeeklyCalendar::daily(DayTime::hms(8, 0, 0), DayTime::hms(16, 0, 0))
    }

    #[test]
    fn week_start_is_monday() {
        // 2021-11-01 was a Monday.
        assert_eq!(
            week_start(utc(2021, 11, 3, 15, 0, 0)),
            utc(2021, 11, 1, 0, 0, 0)
        );
        assert_eq!(
            week_start(utc(2021, 11, 1, 0, 0, 0)),
            utc(2021, 11, 1, 0, 0, 0)
        );
        assert_eq!(
            week_start(utc(2021, 10, 31, 23, 59, 59)),
            utc(2021, 10, 25, 0, 0, 0)
        );
        assert_eq!(week_start(0), utc(1969, 12, 29, 0, 0, 0));
    }

    #[test]
    fn office_hours_overnight_gap() {
        let cal = ResourceCalendar::new("BoJack", office());
        let span = Interval::new(utc(2021, 11, 3, 8, 0, 0), utc(2021, 11, 4, 16, 0, 0));
        let nw = non_working_intervals(&cal, span);
        assert_eq!(
            nw.intervals,
            vec![Interval::new(
                utc(2021, 11, 3, 16, 0, 0),
                utc(2021, 11, 4, 8, 0, 0)
            )]
        );
    }

    #[test]
    fn always_and_never() {
        let span = Interval::new(utc(2021, 11, 3, 8, 0, 0), utc(2021, 11, 10, 8, 0, 0));
        let full = ResourceCalendar::new("r", WeeklyCalendar::always());
        assert!(non_working_intervals(&full, span).intervals.is_empty());
        assert_eq!(full.calendar.working_intervals(span), vec![span]);
        let none = ResourceCalendar::new("r", WeeklyCalendar::default());
        assert_eq!(non_working_intervals(&none, span).intervals, vec![span]);
    }

    #[test]
    fn slot_json_shape() {
        let cal = ResourceCalendar::new(
            "Sarah",
            WeeklyCalendar::on_days(
                &[Weekday::Monday],
                DayTime::hms(8, 0, 0),
                DayTime::hms(24, 0, 0),
            ),
        );
        let json = serde_json::to_string(&cal).unwrap();
        assert_eq!(
            json,
            r#"{"resource":"Sarah","slots":[{"weekday":"MONDAY","from":"08:00:00","to":"24:00:00"}]}"#
        );
        let back: ResourceCalendar = serde_json::from_str(&json).unwrap();
        assert_eq!(back, cal);
        assert!(serde_json::from_str::<ResourceCalendar>(
            r#"{"resource":"x","slots":[{"weekday":"MONDAY","from":"08:61:00","to":"09:00:00"}]}"#
        )
        .is_err());
    }

    #[test]
    fn advance_pauses_off_duty() {
        let cal = office();
        let t = utc(2021, 11, 3, 15, 0, 0);
        assert_eq!(cal.advance(t, 3600), Some(utc(2021, 11, 3, 16, 0, 0)));
        assert_eq!(cal.advance(t, 7200), Some(utc(2021, 11, 4, 9, 0, 0)));
        assert_eq!(
            cal.next_working_instant(utc(2021, 11, 3, 17, 0, 0)),
            Some(utc(2021, 11, 4, 8, 0, 0))
        );
        assert!(cal.is_working(utc(2021, 11, 3, 8, 0, 0)));
        assert!(!cal.is_working(utc(2021, 11, 3, 16, 0, 0)));
        assert_eq!(WeeklyCalendar::default().advance(t, 10), None);
        // Working across midnight merges Sunday into Monday.
        let always = WeeklyCalendar::always();
        assert_eq!(
            always.advance(utc(2021, 11, 7, 23, 0, 0), 7200),
            Some(utc(2021, 11, 8, 1, 0, 0))
        );
    }

    #[test]
    fn normalization_merges_overlaps() {
        let cal = WeeklyCalendar::new(vec![
            WeeklySlot::new(
                Weekday::Friday,
                DayTime::hms(9, 0, 0),
                DayTime::hms(12, 0, 0),
            ),
            WeeklySlot::new(
                Weekday::Friday,
                DayTime::hms(11, 0, 0),
                DayTime::hms(13, 0, 0),
            ),
        ])
        .unwrap();
        assert_eq!(
            cal.slots,
            vec![WeeklySlot::new(
                Weekday::Friday,
                DayTime::hms(9, 0, 0),
                DayTime::hms(13, 0, 0)
            )]
        );
        assert!(WeeklyCalendar::new(vec![WeeklySlot::new(
            Weekday::Friday,
            DayTime(10),
            DayTime(10)
        )])
        .is_err());
    }

    fn monday_morning_log(weeks: i64) -> ActivityInstanceLog {
        let first_monday = utc(2021, 11, 1, 0, 0, 0);
        let instances = (0..weeks)
            .map(|w| {
                let base = first_monday + w * SECONDS_PER_WEEK;
                ActivityInstance::new(
                    format!("{w}"),
                    "A",
                    base + 9 * 3600 + 300,
                    base + 9 * 3600 + 3300,
                    "R",
                )
            })
            .collect();
        ActivityInstanceLog::new(instances)
    }

    #[test]
    fn discovers_recurring_monday_slot() {
        let log = monday_morning_log(10);
        let params = DiscoveryParams {
            granularity: 3600,
            support: 0.1,
            confidence: 0.8,
        };
        let cals = discover_calendars(&log, params).unwrap();
        assert_eq!(
            cals["R"].calendar.slots,
            vec![WeeklySlot::new(
                Weekday::Monday,
                DayTime::hms(9, 0, 0),
                DayTime::hms(10, 0, 0)
            )]
        );
    }

    #[test]
    fn disabled_thresholds_keep_every_touched_slot() {
        let mut log = monday_morning_log(2);
        // One Tuesday 14:xx interaction in the second week only.
        let tuesday = utc(2021, 11, 9, 14, 10, 0);
        log.instances
            .push(ActivityInstance::new("x", "B", tuesday, tuesday + 60, "R"));
        let params = DiscoveryParams {
            granularity: 3600,
            support: 0.0,
            confidence: 0.0,
        };
        let cals = discover_calendars(&log, params).unwrap();
        assert_eq!(
            cals["R"].calendar.slots,
            vec![
                WeeklySlot::new(
                    Weekday::Monday,
                    DayTime::hms(9, 0, 0),
                    DayTime::hms(10, 0, 0)
                ),
                WeeklySlot::new(
                    Weekday::Tuesday,
                    DayTime::hms(14, 0, 0),
                    DayTime::hms(15, 0, 0)
                ),
            ]
        );
    }

    #[test]
    fn single_event_resource_gets_one_slot() {
        let t = utc(2021, 11, 5, 10, 15, 0);
        let log =
            ActivityInstanceLog::new(vec![ActivityInstance::new("1", "A", t, t + 600, "Solo")]);
        let cals = discover_calendars(&log, DiscoveryParams::default()).unwrap();
        assert_eq!(cals.len(), 1);
        assert_eq!(
            cals["Solo"].calendar.slots,
            vec![WeeklySlot::new(
                Weekday::Friday,
                DayTime::hms(10, 0, 0),
                DayTime::hms(11, 0, 0)
            )]
        );
    }

    #[test]
    fn discovery_parameter_validation() {
        let log = ActivityInstanceLog::default();
        let bad = DiscoveryParams {
            granularity: 7000,
            ..Default::default()
        };
        assert_eq!(
            discover_calendars(&log, bad).unwrap_err(),
            CalendarError::Granularity(7000)
        );
        let bad = DiscoveryParams {
            confidence: 1.5,
            ..Default::default()
        };
        assert!(discover_calendars(&log, bad).is_err());
        assert!(discover_calendars(&log, DiscoveryParams::default())
            .unwrap()
            .is_empty());
    }
}
