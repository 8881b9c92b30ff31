//! Wire format: one JSON envelope per websocket text frame.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use dichopt_core::Encoding;

pub const PROTO_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub t: String,
    pub seq: u64,
    #[serde(default = "empty_payload")]
    pub payload: Value,
}

fn empty_payload() -> Value {
    Value::Object(Map::new())
}

impl Envelope {
    pub fn new(t: impl Into<String>, seq: u64, payload: impl Serialize) -> Self {
        Envelope {
            t: t.into(),
            seq,
            payload: serde_json::to_value(payload).expect("payload serializes"),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("envelope serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Decodes the payload as `T`.
    pub fn payload_as<T: for<'de> Deserialize<'de>>(&self) -> Result<T, serde_json::Error> {
        serde_json::from_value(self.payload.clone())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Patient,
    Clinician,
}

/// Error codes carried by `error{code, msg}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum ErrorCode {
    BadRole = 1,
    NoSession = 2,
    SessionBusy = 3,
    BadParam = 4,
    UnknownType = 5,
}

impl ErrorCode {
    pub fn code(self) -> u8 {
        self as u8
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorPayload {
    pub code: u8,
    pub msg: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Hello {
    pub role: String,
    pub proto: u32,
    #[serde(default)]
    pub encoding: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Welcome {
    pub conn: u64,
    pub role: Role,
    pub proto: u32,
    pub encoding: Encoding,
    pub tick_hz: u32,
    /// Present when a session is already underway.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub session: Option<SessionHandle>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Start {
    pub activity: String,
    pub patient_id: String,
    #[serde(default)]
    pub params: Map<String, Value>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Key {
    Left,
    Right,
    Fire,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum KeyAction {
    Down,
    Up,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Input {
    pub key: Key,
    pub action: KeyAction,
    #[serde(default)]
    pub client_tick: Option<u64>,
}

/// `cmd{name, ...args}`: the arguments sit next to `name` in the payload.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cmd {
    pub name: String,
    #[serde(flatten)]
    pub args: Map<String, Value>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum SessionState {
    Running,
    Paused,
    Finished,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SessionHandle {
    pub session_id: String,
    pub patient_id: String,
    pub activity: dichopt_core::persistence::Activity,
    pub state: SessionState,
    pub tick: u64,
}

/// One PNG of a `seq`-encoded frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaggedImage {
    pub eye: dichopt_core::EyeSide,
    pub png: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Frame {
    pub tick: u64,
    pub encoding: Encoding,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub png: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub images: Vec<TaggedImage>,
}
