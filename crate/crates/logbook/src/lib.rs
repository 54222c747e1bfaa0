//! Examination records: the append-only action log, named scene
//! configurations, replay of a log onto a scene, and portable exports.

pub mod config;
pub mod entry;
pub mod export;
pub mod replay;
pub mod store;

use thiserror::Error;

pub use config::{Measurement, ObjectState, SceneConfiguration};
pub use entry::{Action, LogEntry, ACTION_NAMES};
pub use export::{export_entries, export_session, read_export, verify_export, Export, ExportMeta};
pub use replay::{replay, replay_log};
pub use store::{read_log, LogFilter, LogStore, Recovery, StoreOptions};

#[derive(Debug, Error)]
pub enum LogbookError {
    #[error("log storage limit of {limit} bytes reached")]
    StorageFull { limit: u64 },
    #[error("cannot serialize record: {0}")]
    Serialization(String),
    #[error("corrupt log record at line {line}: {message}")]
    Corrupt { line: usize, message: String },
    #[error("unknown configuration `{0}`")]
    UnknownConfig(String),
    #[error("configuration `{0}` already exists")]
    NameCollision(String),
    #[error("invalid configuration name `{0}`")]
    InvalidName(String),
    #[error("replay mismatch at seq {seq}: {message}")]
    ReplayMismatch { seq: u64, message: String },
    #[error("no log entries for session `{0}`")]
    UnknownSession(String),
    #[error("invalid export: {0}")]
    Export(String),
    #[error("exported configuration does not match the replayed log:\n  {}", diff.join("\n  "))]
    ExportMismatch { diff: Vec<String> },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
