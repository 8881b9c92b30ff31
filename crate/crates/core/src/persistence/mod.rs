//! Patient records, session logs and compliance reporting.
//!
//! Store layout:
//!
//! ```text
//! <root>/config.json              clinic settings (UTC offset)
//! <root>/patients/<id>.xml        one patient document each
//! <root>/sessions/<id>.jsonl      append-only session records per patient
//! <root>/events/<session>.jsonl   per-session event log
//! ```

mod patient;
mod report;
mod session;
mod store;

use thiserror::Error;

pub use patient::{
    is_valid_id, load_patient, save_patient, Acuity, GameOverrides, PatientProfile, TherapySettings,
    SCHEMA_VERSION,
};
pub use report::{compliance_report, session_minutes, ComplianceReport};
pub use session::{Activity, SessionRecord};
pub use store::{CorruptLine, EventLog, Receipt, SessionLoad, Store, StoreConfig};

#[derive(Debug, Error)]
pub enum PersistenceError {
    #[error("schema violation at {path}: {reason}")]
    SchemaViolation { path: String, reason: String },
    #[error("patient `{0}` already exists")]
    DuplicateId(String),
    #[error("unknown patient `{0}`")]
    UnknownPatient(String),
    #[error("invalid identifier `{0}` (allowed: A-Z a-z 0-9 _ -)")]
    InvalidId(String),
    #[error("invalid session record: {0}")]
    InvalidRecord(String),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl PersistenceError {
    pub(crate) fn schema(path: impl Into<String>, reason: impl Into<String>) -> Self {
        PersistenceError::SchemaViolation {
            path: path.into(),
            reason: reason.into(),
        }
    }
}
