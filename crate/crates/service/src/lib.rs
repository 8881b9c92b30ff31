//! Runs therapy and diagnostic activities as a fixed-rate tick loop and
//! streams stereo frames to browser clients over a websocket.

pub mod activity;
pub mod clock;
pub mod eventlog;
pub mod protocol;
pub mod server;
pub mod service;

pub use crate::activity::{game_config_for, ParamError};
pub use crate::clock::{Clock, ManualClock, SystemClock};
pub use crate::eventlog::{LogBody, LogEntry};
pub use crate::protocol::{Envelope, ErrorCode, Role, SessionHandle, SessionState, PROTO_VERSION};
pub use crate::server::{serve, ServeOptions, DEFAULT_PORT};
pub use crate::service::{encode_frame, ConnId, Outbox, ServiceConfig, SessionService};
