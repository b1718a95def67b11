//! Study storage and HTTP API for paired IAT and questionnaire studies.
//!
//! Each study is an append-only event log replayed into a [`StudyRecord`].
//! The [`Store`] validates requests against the current record, persists an
//! event, and serves immutable snapshots; [`http::router`] exposes it.

pub mod bundle;
pub mod config;
pub mod error;
pub mod http;
pub mod log;
pub mod record;
pub mod store;

pub use bundle::{bundle_from_cohort, Bundle, SimulatedTimeline};
pub use config::ServiceConfig;
pub use error::ServiceError;
pub use record::{Event, LogEntry, StudyId, StudyRecord, StudySettings};
pub use store::{analyze_record, Store};
