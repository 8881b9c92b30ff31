use std::collections::BTreeMap;
use std::fmt;

use chrono::{DateTime, SubsecRound, Utc};
use serde::{Deserialize, Serialize};

use super::{is_valid_id, PersistenceError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Activity {
    Invaders,
    Viewer,
    FusionTest,
    Alignment,
    Screening,
}

impl Activity {
    pub const ALL: [Activity; 5] = [
        Activity::Invaders,
        Activity::Viewer,
        Activity::FusionTest,
        Activity::Alignment,
        Activity::Screening,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Activity::Invaders => "invaders",
            Activity::Viewer => "viewer",
            Activity::FusionTest => "fusionTest",
            Activity::Alignment => "alignment",
            Activity::Screening => "screening",
        }
    }

    /// Exact key set of the summary map for this activity, sorted.
    pub fn summary_keys(self) -> &'static [&'static str] {
        match self {
            Activity::Invaders => &["hits", "outcome", "pausedMs", "score", "shotsFired", "speedTrajectory", "ticks"],
            Activity::Viewer => &["clip", "mask", "pausedMs", "ticks"],
            Activity::FusionTest => &["axis", "pausedMs", "recognized", "ticks"],
            Activity::Alignment => &["angleDeg", "confirmed", "offsetPx", "pausedMs", "prismDiopters", "ticks"],
            Activity::Screening => &["classification", "pausedMs", "ticks", "trials"],
        }
    }
}

impl fmt::Display for Activity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Activity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Activity::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| format!("unknown activity `{s}`"))
    }
}

mod rfc3339_millis {
    use chrono::{DateTime, SecondsFormat, Utc};
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(t: &DateTime<Utc>, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&t.to_rfc3339_opts(SecondsFormat::Millis, true))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DateTime<Utc>, D::Error> {
        let s = String::deserialize(d)?;
        DateTime::parse_from_rfc3339(&s)
            .map(|t| t.with_timezone(&Utc))
            .map_err(serde::de::Error::custom)
    }
}

/// One completed activity session.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct SessionRecord {
    pub session_id: String,
    pub patient_id: String,
    pub activity: Activity,
    #[serde(with = "rfc3339_millis")]
    pub start_utc: DateTime<Utc>,
    #[serde(with = "rfc3339_millis")]
    pub end_utc: DateTime<Utc>,
    pub summary: BTreeMap<String, serde_json::Value>,
    /// Event log path relative to the store root.
    pub event_log_ref: String,
}

impl SessionRecord {
    /// Timestamps are truncated to milliseconds, the stored precision.
    pub fn new(
        session_id: impl Into<String>,
        patient_id: impl Into<String>,
        activity: Activity,
        start_utc: DateTime<Utc>,
        end_utc: DateTime<Utc>,
        summary: BTreeMap<String, serde_json::Value>,
    ) -> Self {
        let session_id = session_id.into();
        SessionRecord {
            event_log_ref: format!("events/{session_id}.jsonl"),
            session_id,
            patient_id: patient_id.into(),
            activity,
            start_utc: start_utc.trunc_subsecs(3),
            end_utc: end_utc.trunc_subsecs(3),
            summary,
        }
    }

    pub fn duration_ms(&self) -> i64 {
        (self.end_utc - self.start_utc).num_milliseconds()
    }

    pub fn validate(&self) -> Result<(), PersistenceError> {
        if !is_valid_id(&self.session_id) {
            return Err(PersistenceError::InvalidId(self.session_id.clone()));
        }
        if !is_valid_id(&self.patient_id) {
            return Err(PersistenceError::InvalidId(self.patient_id.clone()));
        }
        if self.end_utc < self.start_utc {
            return Err(PersistenceError::InvalidRecord(format!(
                "session {} ends before it starts",
                self.session_id
            )));
        }
        let expected = self.activity.summary_keys();
        if !self.summary.keys().map(String::as_str).eq(expected.iter().copied()) {
            return Err(PersistenceError::InvalidRecord(format!(
                "{} summary keys {:?}, expected {:?}",
                self.activity,
                self.summary.keys().collect::<Vec<_>>(),
                expected
            )));
        }
        Ok(())
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("record serializes")
    }

    pub fn from_line(line: &str) -> Result<Self, PersistenceError> {
        let rec: SessionRecord = serde_json::from_str(line)?;
        rec.validate()?;
        Ok(rec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;
    use serde_json::json;

    fn summary(a: Activity) -> BTreeMap<String, serde_json::Value> {
        a.summary_keys().iter().map(|k| (k.to_string(), json!(0))).collect()
    }

    #[test]
    fn summary_keys_are_sorted() {
        for a in Activity::ALL {
            let keys = a.summary_keys();
            assert!(keys.windows(2).all(|w| w[0] < w[1]), "{a}");
            assert_eq!(a.as_str().parse::<Activity>().unwrap(), a);
        }
    }

    #[test]
    fn line_round_trip() {
        let start = Utc.with_ymd_and_hms(2024, 3, 1, 17, 0, 0).unwrap();
        let rec = SessionRecord::new(
            "s1",
            "p1",
            Activity::Viewer,
            start,
            start + chrono::Duration::milliseconds(90_123),
            summary(Activity::Viewer),
        );
        let line = rec.to_line();
        assert!(line.contains("\"startUtc\":\"2024-03-01T17:00:00.000Z\""));
        assert!(line.contains("\"eventLogRef\":\"events/s1.jsonl\""));
        let back = SessionRecord::from_line(&line).unwrap();
        assert_eq!(back, rec);
        assert_eq!(back.to_line(), line);
        assert_eq!(back.duration_ms(), 90_123);
    }

    #[test]
    fn validation() {
        let t = Utc.with_ymd_and_hms(2024, 3, 1, 17, 0, 0).unwrap();
        let mut rec = SessionRecord::new("s1", "p1", Activity::Alignment, t, t, summary(Activity::Alignment));
        rec.validate().unwrap();
        rec.end_utc = t - chrono::Duration::seconds(1);
        assert!(rec.validate().is_err());
        let mut rec = SessionRecord::new("s1", "p1", Activity::Alignment, t, t, summary(Activity::Viewer));
        assert!(matches!(rec.validate(), Err(PersistenceError::InvalidRecord(_))));
        rec.summary = summary(Activity::Alignment);
        rec.session_id = "../x".into();
        assert!(matches!(rec.validate(), Err(PersistenceError::InvalidId(_))));
    }
}
