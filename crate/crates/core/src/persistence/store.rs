use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, FixedOffset, Utc};
use serde::{Deserialize, Serialize};

use super::{is_valid_id, load_patient, save_patient, PatientProfile, PersistenceError, SessionRecord};

/// Clinic-wide settings kept in `<root>/config.json`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct StoreConfig {
    /// Offset of the clinic's local time from UTC, used to assign sessions to days.
    pub utc_offset_minutes: i32,
}

impl StoreConfig {
    pub fn offset(&self) -> FixedOffset {
        FixedOffset::east_opt(self.utc_offset_minutes * 60).unwrap_or(FixedOffset::east_opt(0).unwrap())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Receipt {
    pub session_id: String,
    pub path: PathBuf,
    /// 1-based line of the appended record.
    pub line: usize,
}

/// A session line that failed to parse or validate.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CorruptLine {
    pub line: usize,
    pub message: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SessionLoad {
    pub records: Vec<SessionRecord>,
    pub corrupt: Vec<CorruptLine>,
}

/// File-backed patient and session store.
#[derive(Clone, Debug)]
pub struct Store {
    root: PathBuf,
    config: StoreConfig,
}

impl Store {
    /// Opens (creating if needed) the store rooted at `root`.
    pub fn open(root: impl Into<PathBuf>) -> Result<Store, PersistenceError> {
        let root = root.into();
        for sub in ["patients", "sessions", "events"] {
            fs::create_dir_all(root.join(sub))?;
        }
        let cfg_path = root.join("config.json");
        let config = if cfg_path.exists() {
            serde_json::from_slice(&fs::read(&cfg_path)?)?
        } else {
            StoreConfig::default()
        };
        Ok(Store { root, config })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn config(&self) -> StoreConfig {
        self.config
    }

    pub fn set_config(&mut self, config: StoreConfig) -> Result<(), PersistenceError> {
        let mut bytes = serde_json::to_vec_pretty(&config)?;
        bytes.push(b'\n');
        fs::write(self.root.join("config.json"), bytes)?;
        self.config = config;
        Ok(())
    }

    fn patient_path(&self, id: &str) -> PathBuf {
        self.root.join("patients").join(format!("{id}.xml"))
    }

    fn sessions_path(&self, id: &str) -> PathBuf {
        self.root.join("sessions").join(format!("{id}.jsonl"))
    }

    pub fn event_log_path(&self, session_id: &str) -> PathBuf {
        self.root.join("events").join(format!("{session_id}.jsonl"))
    }

    fn checked_id<'a>(&self, id: &'a str) -> Result<&'a str, PersistenceError> {
        if is_valid_id(id) {
            Ok(id)
        } else {
            Err(PersistenceError::InvalidId(id.to_string()))
        }
    }

    pub fn has_patient(&self, id: &str) -> bool {
        is_valid_id(id) && self.patient_path(id).is_file()
    }

    pub fn insert_patient(&self, profile: &PatientProfile) -> Result<(), PersistenceError> {
        let bytes = save_patient(profile)?;
        let path = self.patient_path(&profile.id);
        let mut f = match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(f) => f,
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                return Err(PersistenceError::DuplicateId(profile.id.clone()))
            }
            Err(e) => return Err(e.into()),
        };
        f.write_all(&bytes)?;
        f.sync_all()?;
        Ok(())
    }

    /// Replaces an existing patient's document.
    pub fn update_patient(&self, profile: &PatientProfile) -> Result<(), PersistenceError> {
        if !self.has_patient(&profile.id) {
            return Err(PersistenceError::UnknownPatient(profile.id.clone()));
        }
        let bytes = save_patient(profile)?;
        let path = self.patient_path(&profile.id);
        let tmp = path.with_extension("xml.tmp");
        fs::write(&tmp, bytes)?;
        fs::rename(tmp, path)?;
        Ok(())
    }

    pub fn load_patient(&self, id: &str) -> Result<PatientProfile, PersistenceError> {
        let id = self.checked_id(id)?;
        match fs::read(self.patient_path(id)) {
            Ok(bytes) => load_patient(&bytes),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                Err(PersistenceError::UnknownPatient(id.to_string()))
            }
            Err(e) => Err(e.into()),
        }
    }

    pub fn patient_ids(&self) -> Result<Vec<String>, PersistenceError> {
        let mut ids: Vec<String> = fs::read_dir(self.root.join("patients"))?
            .filter_map(|e| e.ok())
            .filter_map(|e| {
                let name = e.file_name().into_string().ok()?;
                name.strip_suffix(".xml").map(str::to_string)
            })
            .filter(|id| is_valid_id(id))
            .collect();
        ids.sort();
        Ok(ids)
    }

    /// Appends one record to the patient's session log under the per-patient
    /// advisory lock.
    pub fn append_session(&self, record: &SessionRecord) -> Result<Receipt, PersistenceError> {
        record.validate()?;
        if !self.has_patient(&record.patient_id) {
            return Err(PersistenceError::UnknownPatient(record.patient_id.clone()));
        }
        let lock = File::create(self.root.join("sessions").join(format!("{}.lock", record.patient_id)))?;
        lock.lock()?;
        let path = self.sessions_path(&record.patient_id);
        let existing = match fs::read(&path) {
            Ok(b) => b.iter().filter(|&&c| c == b'\n').count(),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => 0,
            Err(e) => return Err(e.into()),
        };
        let mut f = OpenOptions::new().create(true).append(true).open(&path)?;
        let mut line = record.to_line();
        line.push('\n');
        f.write_all(line.as_bytes())?;
        f.sync_data()?;
        lock.unlock()?;
        Ok(Receipt {
            session_id: record.session_id.clone(),
            path,
            line: existing + 1,
        })
    }

    /// Every record in the patient's log, in file order. A trailing line
    /// without a newline that does not parse is an append in progress and is
    /// skipped.
    pub fn load_all_sessions(&self, patient_id: &str) -> Result<SessionLoad, PersistenceError> {
        let id = self.checked_id(patient_id)?;
        if !self.has_patient(id) {
            return Err(PersistenceError::UnknownPatient(id.to_string()));
        }
        let file = match File::open(self.sessions_path(id)) {
            Ok(f) => f,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(SessionLoad::default()),
            Err(e) => return Err(e.into()),
        };
        let mut out = SessionLoad::default();
        let mut reader = BufReader::new(file);
        let mut buf = String::new();
        let mut line_no = 0;
        loop {
            buf.clear();
            if reader.read_line(&mut buf)? == 0 {
                break;
            }
            line_no += 1;
            let terminated = buf.ends_with('\n');
            let text = buf.trim_end_matches(['\n', '\r']);
            if text.trim().is_empty() {
                continue;
            }
            match SessionRecord::from_line(text) {
                Ok(rec) if rec.patient_id == id => out.records.push(rec),
                Ok(rec) => out.corrupt.push(CorruptLine {
                    line: line_no,
                    message: format!("record belongs to patient `{}`", rec.patient_id),
                }),
                Err(_) if !terminated => {}
                Err(e) => out.corrupt.push(CorruptLine {
                    line: line_no,
                    message: e.to_string(),
                }),
            }
        }
        Ok(out)
    }

    /// Records whose `[start, end]` interval meets the half-open range
    /// `[from, to)`, ordered by start time.
    pub fn load_sessions(
        &self,
        patient_id: &str,
        from: DateTime<Utc>,
        to: DateTime<Utc>,
    ) -> Result<SessionLoad, PersistenceError> {
        let mut all = self.load_all_sessions(patient_id)?;
        if from >= to {
            all.records.clear();
            return Ok(all);
        }
        all.records.retain(|r| r.start_utc < to && r.end_utc >= from);
        all.records.sort_by_key(|r| r.start_utc);
        Ok(all)
    }

    /// Creates the event log for a new session. Fails if it already exists.
    pub fn create_event_log(&self, session_id: &str) -> Result<EventLog, PersistenceError> {
        let id = self.checked_id(session_id)?;
        let path = self.event_log_path(id);
        let file = OpenOptions::new().append(true).create_new(true).open(&path)?;
        Ok(EventLog { path, file })
    }

    pub fn read_event_log(&self, session_id: &str) -> Result<Vec<serde_json::Value>, PersistenceError> {
        let id = self.checked_id(session_id)?;
        let text = fs::read_to_string(self.event_log_path(id))?;
        text.lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| serde_json::from_str(l).map_err(PersistenceError::from))
            .collect()
    }
}

/// Append-only JSON-lines writer for one session's events.
#[derive(Debug)]
pub struct EventLog {
    path: PathBuf,
    file: File,
}

impl EventLog {
    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append<T: Serialize>(&mut self, entry: &T) -> Result<(), PersistenceError> {
        let mut line = serde_json::to_vec(entry)?;
        line.push(b'\n');
        self.file.write_all(&line)?;
        Ok(())
    }

    pub fn flush(&mut self) -> Result<(), PersistenceError> {
        self.file.sync_data()?;
        Ok(())
    }
}
