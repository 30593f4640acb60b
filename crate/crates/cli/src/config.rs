//! Optional TOML configuration file. Command-line flags take precedence
//! over file values, which take precedence over built-in defaults.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    #[serde(default)]
    pub paths: PathsSection,
    #[serde(default)]
    pub log: LogSection,
    #[serde(default)]
    pub delay: DelaySection,
    #[serde(default)]
    pub calendars: CalendarSection,
    #[serde(default)]
    pub tpe: TpeSection,
    #[serde(default)]
    pub simulation: SimulationSection,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsSection {
    pub log: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub report: Option<PathBuf>,
    pub calendars: Option<PathBuf>,
    pub gamma: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub history: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogSection {
    /// Input rows are lifecycle events.
    pub events: Option<bool>,
    /// Canonical column name → column in the file.
    #[serde(default)]
    pub columns: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DelaySection {
    pub estimator: Option<String>,
    pub lambda: Option<i64>,
    pub delta: Option<f64>,
    pub zeta: Option<f64>,
    pub attribution: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalendarSection {
    pub discover: Option<bool>,
    pub granularity: Option<i64>,
    pub support: Option<f64>,
    pub confidence: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TpeSection {
    pub iterations: Option<usize>,
    pub gamma_max: Option<f64>,
    pub startup_trials: Option<usize>,
    pub good_quantile: Option<f64>,
    pub candidates_per_step: Option<usize>,
    pub runs_per_eval: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSection {
    pub traces: Option<usize>,
    pub runs: Option<usize>,
    /// RFC 3339 instant of the first arrival.
    pub start: Option<String>,
    pub event_budget: Option<u64>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::validation("read config", format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Validation { message, .. } => {
                CliError::validation("read config", format!("{}: {message}", path.display()))
            }
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| CliError::validation("read config", e))
    }
}
