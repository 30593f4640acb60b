//! Activity-instance logs: CSV parsing, writing and lifecycle-event collapsing.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::time::{format_timestamp, parse_timestamp, Interval, Timestamp};

/// One executed activity: trace, label, start, end and performing resource.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ActivityInstance {
    pub trace_id: String,
    pub activity: String,
    pub start: Timestamp,
    pub end: Timestamp,
    pub resource: String,
}

impl ActivityInstance {
    pub fn new(
        trace_id: impl Into<String>,
        activity: impl Into<String>,
        start: Timestamp,
        end: Timestamp,
        resource: impl Into<String>,
    ) -> Self {
        Self {
            trace_id: trace_id.into(),
            activity: activity.into(),
            start,
            end,
            resource: resource.into(),
        }
    }

    pub fn interval(&self) -> Interval {
        Interval::new(self.start, self.end)
    }

    pub fn duration(&self) -> i64 {
        self.end - self.start
    }
}

/// An ordered collection of activity instances.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActivityInstanceLog {
    pub instances: Vec<ActivityInstance>,
}

impl ActivityInstanceLog {
    pub fn new(instances: Vec<ActivityInstance>) -> Self {
        Self { instances }
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    /// `[min start, max end]`, or `None` for an empty log.
    pub fn span(&self) -> Option<Interval> {
        let start = self.instances.iter().map(|i| i.start).min()?;
        let end = self.instances.iter().map(|i| i.end).max()?;
        Some(Interval::new(start, end))
    }

    /// Instance indices grouped per trace, in log order within each trace.
    pub fn traces(&self) -> BTreeMap<&str, Vec<usize>> {
        let mut traces: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for (idx, inst) in self.instances.iter().enumerate() {
            traces.entry(inst.trace_id.as_str()).or_default().push(idx);
        }
        traces
    }

    pub fn num_traces(&self) -> usize {
        self.traces().len()
    }

    /// Sorted, de-duplicated resource labels.
    pub fn resources(&self) -> Vec<&str> {
        let mut res: Vec<&str> = self.instances.iter().map(|i| i.resource.as_str()).collect();
        res.sort_unstable();
        res.dedup();
        res
    }

    /// Sorted, de-duplicated activity labels.
    pub fn activities(&self) -> Vec<&str> {
        let mut acts: Vec<&str> = self.instances.iter().map(|i| i.activity.as_str()).collect();
        acts.sort_unstable();
        acts.dedup();
        acts
    }
}

#[derive(Debug, Error)]
pub enum LogError {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("missing column '{0}'")]
    MissingColumn(String),
    #[error("line {line}: cannot parse timestamp '{value}' in column '{column}'")]
    Timestamp {
        line: u64,
        column: String,
        value: String,
    },
    #[error("line {line}: empty value in column '{column}'")]
    EmptyField { line: u64, column: String },
    #[error("line {line}: start after end for trace '{trace_id}', activity '{activity}'")]
    StartAfterEnd {
        line: u64,
        trace_id: String,
        activity: String,
    },
    #[error("line {line}: unknown lifecycle '{value}' (expected start or complete)")]
    Lifecycle { line: u64, value: String },
    #[error("unmatched lifecycle events: {}", .0.join("; "))]
    OrphanEvents(Vec<String>),
    #[error("invalid column mapping entry '{0}' (expected key=value)")]
    Mapping(String),
}

/// Maps the canonical column roles onto the header names of a CSV file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ColumnMapping {
    pub case_id: String,
    pub activity: String,
    pub start_time: String,
    pub end_time: String,
    pub resource: String,
    /// Only used when collapsing lifecycle events.
    pub lifecycle: String,
    /// Only used when collapsing lifecycle events.
    pub timestamp: String,
}

impl Default for ColumnMapping {
    fn default() -> Self {
        Self {
            case_id: "case_id".into(),
            activity: "activity".into(),
            start_time: "start_time".into(),
            end_time: "end_time".into(),
            resource: "resource".into(),
            lifecycle: "lifecycle".into(),
            timestamp: "timestamp".into(),
        }
    }
}

impl ColumnMapping {
    /// Overrides columns from `key=value` pairs, e.g. `case_id=CaseID`.
    pub fn with_overrides<S: AsRef<str>>(mut self, pairs: &[S]) -> Result<Self, LogError> {
        for pair in pairs {
            let pair = pair.as_ref();
            let (key, value) = pair
                .split_once('=')
                .ok_or_else(|| LogError::Mapping(pair.to_string()))?;
            let slot = match key.trim() {
                "case_id" => &mut self.case_id,
                "activity" => &mut self.activity,
                "start_time" => &mut self.start_time,
                "end_time" => &mut self.end_time,
                "resource" => &mut self.resource,
                "lifecycle" => &mut self.lifecycle,
                "timestamp" => &mut self.timestamp,
                _ => return Err(LogError::Mapping(pair.to_string())),
            };
            *slot = value.trim().to_string();
        }
        Ok(self)
    }
}

fn open(path: &Path) -> Result<File, LogError> {
    File::open(path).map_err(|source| LogError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn column_index(headers: &csv::StringRecord, name: &str) -> Result<usize, LogError> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| LogError::MissingColumn(name.to_string()))
}

fn field<'r>(
    record: &'r csv::StringRecord,
    idx: usize,
    column: &str,
    line: u64,
    allow_empty: bool,
) -> Result<&'r str, LogError> {
    let value = record.get(idx).unwrap_or("").trim();
    if value.is_empty() && !allow_empty {
        return Err(LogError::EmptyField {
            line,
            column: column.to_string(),
        });
    }
    Ok(value)
}

fn timestamp_field(
    record: &csv::StringRecord,
    idx: usize,
    column: &str,
    line: u64,
) -> Result<Timestamp, LogError> {
    let raw = field(record, idx, column, line, false)?;
    parse_timestamp(raw).ok_or_else(|| LogError::Timestamp {
        line,
        column: column.to_string(),
        value: raw.to_string(),
    })
}

/// Parses an activity-instance CSV file.
pub fn parse_log(
    path: impl AsRef<Path>,
    mapping: &ColumnMapping,
) -> Result<ActivityInstanceLog, LogError> {
    read_log(open(path.as_ref())?, mapping)
}

/// Parses an activity-instance CSV from any reader.
pub fn read_log<R: Read>(
    reader: R,
    mapping: &ColumnMapping,
) -> Result<ActivityInstanceLog, LogError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let case_col = column_index(&headers, &mapping.case_id)?;
    let act_col = column_index(&headers, &mapping.activity)?;
    let start_col = column_index(&headers, &mapping.start_time)?;
    let end_col = column_index(&headers, &mapping.end_time)?;
    let res_col = column_index(&headers, &mapping.resource)?;

    let mut instances = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let trace_id = field(&record, case_col, &mapping.case_id, line, true)?;
        let activity = field(&record, act_col, &mapping.activity, line, false)?;
        let resource = field(&record, res_col, &mapping.resource, line, false)?;
        let start = timestamp_field(&record, start_col, &mapping.start_time, line)?;
        let end = timestamp_field(&record, end_col, &mapping.end_time, line)?;
        if start > end {
            return Err(LogError::StartAfterEnd {
                line,
                trace_id: trace_id.to_string(),
                activity: activity.to_string(),
            });
        }
        instances.push(ActivityInstance::new(
            trace_id, activity, start, end, resource,
        ));
    }
    Ok(ActivityInstanceLog::new(instances))
}

/// Writes `log` with the canonical header and ISO-8601 UTC timestamps.
pub fn write_log(log: &ActivityInstanceLog, path: impl AsRef<Path>) -> Result<(), LogError> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|source| LogError::Io {
        path: path.display().to_string(),
        source,
    })?;
    write_log_to(log, file)
}

pub fn write_log_to<W: Write>(log: &ActivityInstanceLog, writer: W) -> Result<(), LogError> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["case_id", "activity", "start_time", "end_time", "resource"])?;
    for inst in &log.instances {
        wtr.write_record([
            inst.trace_id.as_str(),
            inst.activity.as_str(),
            &format_timestamp(inst.start),
            &format_timestamp(inst.end),
            inst.resource.as_str(),
        ])?;
    }
    wtr.flush().map_err(|source| LogError::Io {
        path: "<writer>".into(),
        source,
    })?;
    Ok(())
}

/// Collapses an event-per-row log (lifecycle `start` / `complete`) into
/// activity instances.
pub fn collapse_events(
    path: impl AsRef<Path>,
    mapping: &ColumnMapping,
) -> Result<ActivityInstanceLog, LogError> {
    read_events(open(path.as_ref())?, mapping)
}

/// Same as [`collapse_events`] over a reader.
///
/// Starts and completes of the same (trace, activity, resource) key pair
/// FIFO. Output follows the order of the start events.
pub fn read_events<R: Read>(
    reader: R,
    mapping: &ColumnMapping,
) -> Result<ActivityInstanceLog, LogError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let case_col = column_index(&headers, &mapping.case_id)?;
    let act_col = column_index(&headers, &mapping.activity)?;
    let life_col = column_index(&headers, &mapping.lifecycle)?;
    let ts_col = column_index(&headers, &mapping.timestamp)?;
    let res_col = column_index(&headers, &mapping.resource)?;

    struct OpenStart {
        line: u64,
        slot: usize,
        ts: Timestamp,
    }
    type Key = (String, String, String);
    let mut open_starts: HashMap<Key, VecDeque<OpenStart>> = HashMap::new();
    // One slot per start event, filled when its complete arrives.
    let mut slots: Vec<Option<ActivityInstance>> = Vec::new();
    let mut orphans = Vec::new();

    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let trace_id = field(&record, case_col, &mapping.case_id, line, true)?.to_string();
        let activity = field(&record, act_col, &mapping.activity, line, false)?.to_string();
        let resource = field(&record, res_col, &mapping.resource, line, false)?.to_string();
        let lifecycle =
            field(&record, life_col, &mapping.lifecycle, line, false)?.to_ascii_lowercase();
        let ts = timestamp_field(&record, ts_col, &mapping.timestamp, line)?;
        let key = (trace_id, activity, resource);
        match lifecycle.as_str() {
            "start" => {
                open_starts.entry(key).or_default().push_back(OpenStart {
                    line,
                    slot: slots.len(),
                    ts,
                });
                slots.push(None);
            }
            "complete" | "end" => {
                let Some(start) = open_starts.get_mut(&key).and_then(VecDeque::pop_front) else {
                    orphans.push(format!(
                        "complete without start at line {line} ({}, {}, {})",
                        key.0, key.1, key.2
                    ));
                    continue;
                };
                if start.ts > ts {
                    return Err(LogError::StartAfterEnd {
                        line,
                        trace_id: key.0,
                        activity: key.1,
                    });
                }
                slots[start.slot] = Some(ActivityInstance::new(key.0, key.1, start.ts, ts, key.2));
            }
            other => {
                return Err(LogError::Lifecycle {
                    line,
                    value: other.to_string(),
                })
            }
        }
    }

    let mut dangling: Vec<(u64, String)> = open_starts
        .into_iter()
        .flat_map(|(key, starts)| {
            starts.into_iter().map(move |s| {
                (
                    s.line,
                    format!(
                        "start without complete at line {} ({}, {}, {})",
                        s.line, key.0, key.1, key.2
                    ),
                )
            })
        })
        .collect();
    dangling.sort();
    orphans.extend(dangling.into_iter().map(|(_, msg)| msg));
    if !orphans.is_empty() {
        return Err(LogError::OrphanEvents(orphans));
    }
    Ok(ActivityInstanceLog::new(
        slots.into_iter().flatten().collect(),
    ))
}
