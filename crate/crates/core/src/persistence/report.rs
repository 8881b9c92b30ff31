use std::collections::BTreeMap;
use std::fmt::Write as _;

use chrono::{NaiveDate, NaiveTime, TimeZone};
use serde::{Deserialize, Serialize};

use super::{PersistenceError, SessionRecord, Store};

/// Minutes of use per local calendar day for one patient.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ComplianceReport {
    pub patient_id: String,
    pub from_date: NaiveDate,
    pub to_date: NaiveDate,
    pub utc_offset_minutes: i32,
    pub per_day_minutes: BTreeMap<NaiveDate, u64>,
    pub total_minutes: u64,
    pub sessions_count: u64,
    /// Sessions whose local end date differs from their start date. Their
    /// whole duration is credited to the start date.
    pub spans_midnight: Vec<String>,
    /// Sessions that were paused. Paused time is included in their minutes.
    pub includes_paused: Vec<String>,
    /// Unreadable session-log lines, by line number.
    pub corrupt_lines: Vec<usize>,
}

/// Whole minutes credited for one session, rounding any partial minute up.
pub fn session_minutes(record: &SessionRecord) -> u64 {
    let ms = record.duration_ms().max(0) as u64;
    ms.div_ceil(60_000)
}

/// Sessions are credited to the local date of their start; `from` and `to`
/// are inclusive local dates.
pub fn compliance_report(
    store: &Store,
    patient_id: &str,
    from: NaiveDate,
    to: NaiveDate,
) -> Result<ComplianceReport, PersistenceError> {
    let offset = store.config().offset();
    let mut report = ComplianceReport {
        patient_id: patient_id.to_string(),
        from_date: from,
        to_date: to,
        utc_offset_minutes: store.config().utc_offset_minutes,
        per_day_minutes: BTreeMap::new(),
        total_minutes: 0,
        sessions_count: 0,
        spans_midnight: Vec::new(),
        includes_paused: Vec::new(),
        corrupt_lines: Vec::new(),
    };
    // Always touch the log so an unknown patient is reported even for an
    // empty range.
    let all = store.load_all_sessions(patient_id)?;
    report.corrupt_lines = all.corrupt.iter().map(|c| c.line).collect();
    if from > to {
        return Ok(report);
    }
    let lo = offset
        .from_local_datetime(&from.and_time(NaiveTime::MIN))
        .single()
        .map(|t| t.to_utc());
    let hi = to
        .succ_opt()
        .and_then(|d| offset.from_local_datetime(&d.and_time(NaiveTime::MIN)).single())
        .map(|t| t.to_utc());
    let mut records = all.records;
    records.sort_by_key(|r| r.start_utc);
    for r in &records {
        if lo.is_some_and(|lo| r.start_utc < lo) || hi.is_some_and(|hi| r.start_utc >= hi) {
            continue;
        }
        let start_day = r.start_utc.with_timezone(&offset).date_naive();
        let minutes = session_minutes(r);
        *report.per_day_minutes.entry(start_day).or_insert(0) += minutes;
        report.total_minutes += minutes;
        report.sessions_count += 1;
        if r.end_utc.with_timezone(&offset).date_naive() != start_day {
            report.spans_midnight.push(r.session_id.clone());
        }
        if r.summary.get("pausedMs").and_then(|v| v.as_u64()).unwrap_or(0) > 0 {
            report.includes_paused.push(r.session_id.clone());
        }
    }
    Ok(report)
}

impl ComplianceReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Plain-text table, one row per day with use.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let sign = if self.utc_offset_minutes < 0 { '-' } else { '+' };
        let off = self.utc_offset_minutes.unsigned_abs();
        let _ = writeln!(
            out,
            "patient {}  {} .. {}  (UTC{sign}{:02}:{:02})",
            self.patient_id,
            self.from_date,
            self.to_date,
            off / 60,
            off % 60
        );
        let _ = writeln!(out, "{:<12} {:>8}", "date", "minutes");
        for (day, mins) in &self.per_day_minutes {
            let _ = writeln!(out, "{:<12} {:>8}", day.to_string(), mins);
        }
        let _ = writeln!(out, "{:<12} {:>8}", "total", self.total_minutes);
        let _ = writeln!(out, "sessions: {}", self.sessions_count);
        if !self.spans_midnight.is_empty() {
            let _ = writeln!(out, "spanning midnight (credited to start day): {}", self.spans_midnight.join(", "));
        }
        if !self.includes_paused.is_empty() {
            let _ = writeln!(out, "paused time included: {}", self.includes_paused.join(", "));
        }
        if !self.corrupt_lines.is_empty() {
            let lines: Vec<String> = self.corrupt_lines.iter().map(|l| l.to_string()).collect();
            let _ = writeln!(out, "unreadable log lines: {}", lines.join(", "));
        }
        out
    }
}
