//! Discovery of extraneous activity delays from activity-instance logs.
//!
//! The crate is organised as a pipeline:
//!
//! * [`log_io`] reads and writes activity-instance logs (CSV).
//! * [`timeline`] discovers concurrency between activities and the causally
//!   consecutive pairs of activity instances.
//! * [`calendars`] expands weekly working calendars into absolute
//!   non-working intervals, and can discover calendars from a log.
//! * [`delay_discovery`] estimates the extraneous part of each waiting time
//!   (naive, eclipse-aware and extrapolated eclipse-aware estimators).
//! * [`distribution`] fits and samples duration distributions.
//! * [`bps_model`] holds the simulation model and injects timer events.
//! * [`simulator`] is a discrete-event engine executing a model.
//! * [`metrics`] compares logs (SMAPE, EMD, RED, cycle times).
//! * [`optimizer`] tunes per-activity scale factors with a TPE search.

pub mod bps_model;
pub mod calendars;
pub mod delay_discovery;
pub mod distribution;
pub mod log_io;
pub mod metrics;
pub mod optimizer;
pub mod simulator;
pub mod time;
pub mod timeline;

pub use bps_model::{Attribution, BpsModel, ScaleVector};
pub use calendars::{NonWorkingIntervals, ResourceCalendar, Weekday, WeeklyCalendar};
pub use delay_discovery::{DelayConfig, DelayReport, Estimator, PairDelay};
pub use distribution::DurationDistribution;
pub use log_io::{ActivityInstance, ActivityInstanceLog, ColumnMapping};
pub use simulator::{SimulationConfig, SimulationOutput};
pub use time::{Interval, Timestamp};
pub use timeline::{CausalPairSet, ConcurrencyRelation};
