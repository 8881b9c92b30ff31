//! Protocol dispatch and the tick loop. Transport-free: callers feed
//! envelopes in and route the returned envelopes to connections.

use std::collections::BTreeMap;
use std::time::Duration;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine as _;
use chrono::{DateTime, NaiveDate, Utc};
use serde_json::{json, Map, Value};

use dichopt_core::game::GameConfig;
use dichopt_core::persistence::{compliance_report, Activity, EventLog, PatientProfile, SessionRecord, Store};
use dichopt_core::stereo::{encode_anaglyph, encode_side_by_side};
use dichopt_core::{Encoding, EyeSide, StereoPair};

use crate::activity::{Args, Outcome, ParamError, Run};
use crate::clock::Clock;
use crate::eventlog::{HeldKeys, LogBody, LogEntry};
use crate::protocol::{
    Cmd, Envelope, ErrorCode, ErrorPayload, Frame, Hello, Input, Role, SessionHandle, SessionState, Start,
    TaggedImage, Welcome, PROTO_VERSION,
};

pub type ConnId = u64;

/// Outbound envelopes addressed to connections.
pub type Outbox = Vec<(ConnId, Envelope)>;

#[derive(Clone, Debug)]
pub struct ServiceConfig {
    pub tick_hz: u32,
    /// Frames go out on ticks divisible by this; 1 sends every tick.
    pub frame_divisor: u32,
    /// A session with no connections is finalized after this long.
    pub idle_timeout: Duration,
    pub default_encoding: Encoding,
    /// Clinic-wide game defaults, before patient overrides.
    pub base_game: GameConfig,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            tick_hz: 60,
            frame_divisor: 1,
            idle_timeout: Duration::from_secs(30),
            default_encoding: Encoding::Anaglyph,
            base_game: GameConfig::default(),
        }
    }
}

struct Conn {
    role: Option<Role>,
    encoding: Encoding,
    last_seq: Option<u64>,
    out_seq: u64,
}

struct Session {
    id: String,
    patient: PatientProfile,
    activity: Activity,
    run: Run,
    tick: u64,
    paused_at: Option<DateTime<Utc>>,
    paused_ms: i64,
    start: DateTime<Utc>,
    queue: Vec<(ConnId, u64, Input)>,
    held: HeldKeys,
    log: EventLog,
}

impl Session {
    fn state(&self) -> SessionState {
        if self.paused_at.is_some() {
            SessionState::Paused
        } else {
            SessionState::Running
        }
    }

    fn handle(&self) -> SessionHandle {
        SessionHandle {
            session_id: self.id.clone(),
            patient_id: self.patient.id.clone(),
            activity: self.activity,
            state: self.state(),
            tick: self.tick,
        }
    }

    fn log(&mut self, body: LogBody) {
        let entry = LogEntry { tick: self.tick, body };
        if let Err(e) = self.log.append(&entry) {
            tracing::error!(session = %self.id, "event log write failed: {e}");
        }
    }
}

/// Single owner of all session state. Not thread-safe by design: one task
/// drives it and everything else talks to that task.
pub struct SessionService<C: Clock> {
    store: Store,
    clock: C,
    config: ServiceConfig,
    conns: BTreeMap<ConnId, Conn>,
    next_conn: ConnId,
    session: Option<Session>,
    sessions_started: u64,
    idle_since: Option<DateTime<Utc>>,
}

fn error_env(code: ErrorCode, msg: impl Into<String>) -> (&'static str, Value) {
    let p = ErrorPayload { code: code.code(), msg: msg.into() };
    ("error", serde_json::to_value(p).expect("error serializes"))
}

fn bad(e: impl std::fmt::Display) -> (ErrorCode, String) {
    (ErrorCode::BadParam, e.to_string())
}

impl From<ParamError> for (ErrorCode, String) {
    fn from(e: ParamError) -> Self {
        (ErrorCode::BadParam, e.0)
    }
}

fn png_b64(img: &dichopt_core::Image) -> Result<String, String> {
    img.encode_png().map(|b| B64.encode(b)).map_err(|e| e.to_string())
}

/// Encodes one stereo pair for the wire.
pub fn encode_frame(pair: &StereoPair, encoding: Encoding, tick: u64) -> Result<Frame, String> {
    let mut frame = Frame { tick, encoding, png: None, images: Vec::new() };
    match encoding {
        Encoding::Anaglyph => frame.png = Some(png_b64(&encode_anaglyph(pair).map_err(|e| e.to_string())?)?),
        Encoding::SideBySide => frame.png = Some(png_b64(&encode_side_by_side(pair).map_err(|e| e.to_string())?)?),
        Encoding::FrameSequential => {
            for eye in [EyeSide::Left, EyeSide::Right] {
                frame.images.push(TaggedImage { eye, png: png_b64(pair.eye(eye))? });
            }
        }
    }
    Ok(frame)
}

impl<C: Clock> SessionService<C> {
    pub fn new(store: Store, clock: C, config: ServiceConfig) -> Self {
        SessionService {
            store,
            clock,
            config,
            conns: BTreeMap::new(),
            next_conn: 1,
            session: None,
            sessions_started: 0,
            idle_since: None,
        }
    }

    pub fn store(&self) -> &Store {
        &self.store
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.config
    }

    /// The current session, if one is running or paused.
    pub fn handle(&self) -> Option<SessionHandle> {
        self.session.as_ref().map(Session::handle)
    }

    /// Game state of a running invaders session.
    pub fn game_state(&self) -> Option<&dichopt_core::game::GameState> {
        self.session.as_ref().and_then(|s| s.run.game_state())
    }

    pub fn connect(&mut self) -> ConnId {
        let id = self.next_conn;
        self.next_conn += 1;
        self.conns.insert(
            id,
            Conn { role: None, encoding: self.config.default_encoding, last_seq: None, out_seq: 0 },
        );
        self.idle_since = None;
        id
    }

    pub fn disconnect(&mut self, conn: ConnId) {
        self.conns.remove(&conn);
        if self.conns.is_empty() {
            self.idle_since = Some(self.clock.now());
        }
    }

    pub fn connection_count(&self) -> usize {
        self.conns.len()
    }

    fn push(&mut self, out: &mut Outbox, conn: ConnId, t: &str, payload: Value) {
        if let Some(c) = self.conns.get_mut(&conn) {
            c.out_seq += 1;
            out.push((conn, Envelope { t: t.to_string(), seq: c.out_seq, payload }));
        }
    }

    fn broadcast(&mut self, out: &mut Outbox, t: &str, payload: Value) {
        let ids: Vec<ConnId> = self.greeted().collect();
        for id in ids {
            self.push(out, id, t, payload.clone());
        }
    }

    fn greeted(&self) -> impl Iterator<Item = ConnId> + '_ {
        self.conns.iter().filter(|(_, c)| c.role.is_some()).map(|(&id, _)| id)
    }

    /// Parses a text frame and dispatches it.
    pub fn handle_text(&mut self, conn: ConnId, text: &str) -> Outbox {
        let mut out = Vec::new();
        match Envelope::from_json(text) {
            Ok(env) => out = self.handle_message(conn, env),
            Err(e) => {
                let (t, p) = error_env(ErrorCode::BadParam, format!("malformed envelope: {e}"));
                self.push(&mut out, conn, t, p);
            }
        }
        out
    }

    pub fn handle_message(&mut self, conn: ConnId, env: Envelope) -> Outbox {
        let mut out = Vec::new();
        let Some(c) = self.conns.get_mut(&conn) else {
            return out;
        };
        if c.last_seq.is_some_and(|last| env.seq <= last) {
            let msg = format!("seq {} not above {}; message discarded", env.seq, c.last_seq.unwrap_or(0));
            let (t, p) = error_env(ErrorCode::BadParam, msg);
            self.push(&mut out, conn, t, p);
            return out;
        }
        c.last_seq = Some(env.seq);
        let role = c.role;

        let known = matches!(env.t.as_str(), "hello" | "start" | "input" | "cmd" | "stop" | "report");
        let result = match (env.t.as_str(), role) {
            (_, _) if !known => Err((ErrorCode::UnknownType, format!("unknown message type `{}`", env.t))),
            ("hello", None) => self.on_hello(conn, &env, &mut out),
            ("hello", Some(_)) => Err(bad("hello already completed")),
            (_, None) => Err((ErrorCode::BadRole, "send hello first".to_string())),
            ("start", Some(Role::Clinician)) => self.on_start(&env, &mut out),
            ("input", Some(Role::Patient)) => self.on_input(conn, &env),
            ("cmd", Some(Role::Clinician)) => self.on_cmd(conn, &env, &mut out),
            ("stop", Some(Role::Clinician)) => self.on_stop(&env, &mut out),
            ("report", Some(Role::Clinician)) => self.on_report(conn, &env, &mut out),
            (t, Some(r)) => Err((ErrorCode::BadRole, format!("`{t}` is not allowed for role {r:?}"))),
        };
        if let Err((code, msg)) = result {
            let (t, p) = error_env(code, msg);
            self.push(&mut out, conn, t, p);
        }
        out
    }

    fn on_hello(&mut self, conn: ConnId, env: &Envelope, out: &mut Outbox) -> Result<(), (ErrorCode, String)> {
        let hello: Hello = env.payload_as().map_err(bad)?;
        let role = match hello.role.as_str() {
            "patient" => Role::Patient,
            "clinician" => Role::Clinician,
            other => return Err((ErrorCode::BadRole, format!("unknown role `{other}`"))),
        };
        if hello.proto != PROTO_VERSION {
            return Err(bad(format!("unsupported proto {}, expected {PROTO_VERSION}", hello.proto)));
        }
        let encoding = match hello.encoding {
            Some(e) => e.parse::<Encoding>().map_err(bad)?,
            None => self.config.default_encoding,
        };
        let c = self.conns.get_mut(&conn).expect("checked by caller");
        c.role = Some(role);
        c.encoding = encoding;
        let welcome = Welcome {
            conn,
            role,
            proto: PROTO_VERSION,
            encoding,
            tick_hz: self.config.tick_hz,
            session: self.handle(),
        };
        self.push(out, conn, "welcome", serde_json::to_value(welcome).expect("welcome serializes"));
        Ok(())
    }

    fn on_start(&mut self, env: &Envelope, out: &mut Outbox) -> Result<(), (ErrorCode, String)> {
        if let Some(s) = &self.session {
            return Err((ErrorCode::SessionBusy, format!("session {} is still active", s.id)));
        }
        let start: Start = env.payload_as().map_err(bad)?;
        let activity: Activity = start.activity.parse().map_err(bad)?;
        let patient = self.store.load_patient(&start.patient_id).map_err(bad)?;
        let run = Run::start(activity, &patient, start.params.clone(), &self.config.base_game)?;
        let now = self.clock.now();
        let (id, log) = self.open_log(now).map_err(bad)?;
        let mut session = Session {
            id,
            patient,
            activity,
            run,
            tick: 0,
            paused_at: None,
            paused_ms: 0,
            start: now,
            queue: Vec::new(),
            held: HeldKeys::default(),
            log,
        };
        let game = session.run.game_config();
        session.log(LogBody::Start { activity, patient_id: start.patient_id, params: start.params, game });
        tracing::info!(session = %session.id, %activity, "session started");
        let handle = session.handle();
        self.session = Some(session);
        self.broadcast(out, "started", serde_json::to_value(handle).expect("handle serializes"));
        self.broadcast_frame(out);
        Ok(())
    }

    fn open_log(&mut self, now: DateTime<Utc>) -> Result<(String, EventLog), dichopt_core::persistence::PersistenceError> {
        loop {
            self.sessions_started += 1;
            let id = format!("s{}Z-{}", now.format("%Y%m%dT%H%M%S%3f"), self.sessions_started);
            match self.store.create_event_log(&id) {
                Ok(log) => return Ok((id, log)),
                Err(dichopt_core::persistence::PersistenceError::Io(e))
                    if e.kind() == std::io::ErrorKind::AlreadyExists => {}
                Err(e) => return Err(e),
            }
        }
    }

    fn on_input(&mut self, conn: ConnId, env: &Envelope) -> Result<(), (ErrorCode, String)> {
        let input: Input = env.payload_as().map_err(bad)?;
        let s = self.session.as_mut().ok_or((ErrorCode::NoSession, "no active session".to_string()))?;
        s.queue.push((conn, env.seq, input));
        Ok(())
    }

    fn on_cmd(&mut self, conn: ConnId, env: &Envelope, out: &mut Outbox) -> Result<(), (ErrorCode, String)> {
        let cmd: Cmd = env.payload_as().map_err(bad)?;
        let now = self.clock.now();
        let s = self.session.as_mut().ok_or((ErrorCode::NoSession, "no active session".to_string()))?;
        let outcome = match cmd.name.as_str() {
            "pause" | "resume" => {
                Args::new(cmd.args.clone(), "cmd").finish()?;
                let pause = cmd.name == "pause";
                match (pause, s.paused_at) {
                    (true, None) => {
                        s.paused_at = Some(now);
                        s.log(LogBody::Pause);
                    }
                    (false, Some(at)) => {
                        s.paused_ms += (now - at).num_milliseconds();
                        s.paused_at = None;
                        s.log(LogBody::Resume);
                    }
                    _ => return Err(bad(format!("session is already {:?}", s.state()).to_lowercase())),
                }
                let handle = s.handle();
                self.broadcast(out, "session", serde_json::to_value(handle).expect("handle serializes"));
                return Ok(());
            }
            _ => {
                let outcome = s.run.command(&cmd.name, cmd.args.clone())?;
                s.log(LogBody::Cmd { name: cmd.name.clone(), args: cmd.args });
                outcome
            }
        };
        let Outcome { log, finished, reply } = outcome;
        for body in log {
            s.log(body);
        }
        let paused = s.paused_at.is_some();
        let mut ack = Map::new();
        ack.insert("name".into(), json!(cmd.name));
        ack.insert("result".into(), reply);
        self.push(out, conn, "ack", Value::Object(ack));
        match finished {
            Some(reason) => out.extend(self.finalize(&reason)),
            None if paused => self.broadcast_frame(out),
            None => {}
        }
        Ok(())
    }

    fn on_stop(&mut self, env: &Envelope, out: &mut Outbox) -> Result<(), (ErrorCode, String)> {
        if !env.payload.as_object().is_none_or(Map::is_empty) {
            return Err(bad("stop takes no arguments"));
        }
        if self.session.is_none() {
            return Err((ErrorCode::NoSession, "no active session".to_string()));
        }
        out.extend(self.finalize("stopped"));
        Ok(())
    }

    fn on_report(&mut self, conn: ConnId, env: &Envelope, out: &mut Outbox) -> Result<(), (ErrorCode, String)> {
        let map = match &env.payload {
            Value::Object(m) => m.clone(),
            _ => return Err(bad("report payload must be an object")),
        };
        let mut args = Args::new(map, "report");
        let pid = args.string("patientId")?.ok_or_else(|| bad("report needs `patientId`"))?;
        let date = |s: Option<String>, key: &str| -> Result<NaiveDate, (ErrorCode, String)> {
            let s = s.ok_or_else(|| bad(format!("report needs `{key}`")))?;
            s.parse().map_err(|e| bad(format!("{key}: {e}")))
        };
        let from = date(args.string("from")?, "from")?;
        let to = date(args.string("to")?, "to")?;
        args.finish()?;
        if !self.store.has_patient(&pid) {
            return Err(bad(format!("unknown patient `{pid}`")));
        }
        let report = compliance_report(&self.store, &pid, from, to).map_err(bad)?;
        self.push(out, conn, "report", serde_json::to_value(report).expect("report serializes"));
        Ok(())
    }

    /// Renders the current session once per negotiated encoding and sends it
    /// to every greeted connection.
    fn broadcast_frame(&mut self, out: &mut Outbox) {
        let Some(s) = &self.session else { return };
        let pair = match s.run.render() {
            Ok(p) => p,
            Err(e) => {
                tracing::warn!(session = %s.id, tick = s.tick, "frame skipped: {}", e.0);
                return;
            }
        };
        let tick = s.tick;
        let mut encoded: BTreeMap<&'static str, Value> = BTreeMap::new();
        let targets: Vec<(ConnId, Encoding)> = self
            .conns
            .iter()
            .filter(|(_, c)| c.role.is_some())
            .map(|(&id, c)| (id, c.encoding))
            .collect();
        for (id, enc) in targets {
            let payload = match encoded.get(enc.as_str()) {
                Some(p) => p.clone(),
                None => match encode_frame(&pair, enc, tick) {
                    Ok(f) => {
                        let v = serde_json::to_value(f).expect("frame serializes");
                        encoded.insert(enc.as_str(), v.clone());
                        v
                    }
                    Err(e) => {
                        tracing::warn!(tick, "encoding {enc} failed: {e}");
                        continue;
                    }
                },
            };
            self.push(out, id, "frame", payload);
        }
    }

    /// Advances the session by one tick if it is running. Also finalizes a
    /// session whose clients have all been gone past the idle timeout.
    pub fn tick(&mut self) -> Outbox {
        let mut out = Vec::new();
        let now = self.clock.now();
        if let (Some(since), Some(_)) = (self.idle_since, &self.session) {
            let idle = (now - since).to_std().unwrap_or_default();
            if self.conns.is_empty() && idle >= self.config.idle_timeout {
                return self.finalize("disconnected");
            }
        }
        let Some(s) = self.session.as_mut() else { return out };
        if s.paused_at.is_some() {
            return out;
        }
        let batch = std::mem::take(&mut s.queue);
        for &(conn, seq, input) in &batch {
            s.log(LogBody::Input { key: input.key, action: input.action, conn, seq, client_tick: input.client_tick });
        }
        let input = s.held.apply(batch.iter().map(|(_, _, i)| (i.key, i.action)));
        let Outcome { log, finished, .. } = s.run.step(input);
        for body in log {
            s.log(body);
        }
        s.tick += 1;
        if s.tick % u64::from(self.config.frame_divisor.max(1)) == 0 || finished.is_some() {
            self.broadcast_frame(&mut out);
        }
        if let Some(reason) = finished {
            out.extend(self.finalize(&reason));
        }
        out
    }

    /// Finalizes any active session, e.g. when the server stops.
    pub fn shutdown(&mut self) -> Outbox {
        self.finalize("shutdown")
    }

    /// Ends the session: persists its record and tells every client.
    fn finalize(&mut self, reason: &str) -> Outbox {
        let mut out = Vec::new();
        let Some(mut s) = self.session.take() else { return out };
        let end = self.clock.now();
        if let Some(at) = s.paused_at.take() {
            s.paused_ms += (end - at).num_milliseconds();
        }
        s.log(LogBody::Finish { reason: reason.to_string() });
        if let Err(e) = s.log.flush() {
            tracing::error!(session = %s.id, "event log flush failed: {e}");
        }
        let summary = s.run.summary(s.tick, s.paused_ms);
        let record = SessionRecord::new(&s.id, &s.patient.id, s.activity, s.start, end, summary);
        let (persisted, error) = match self.store.append_session(&record) {
            Ok(_) => (true, None),
            Err(e) => {
                tracing::error!(session = %s.id, "session record not persisted: {e}");
                (false, Some(e.to_string()))
            }
        };
        if let Some(m) = s.run.confirmed_squint() {
            let mut p = s.patient.clone();
            p.squint_calibration = Some(m);
            if let Err(e) = self.store.update_patient(&p) {
                tracing::error!(patient = %p.id, "squint calibration not saved: {e}");
            }
        }
        tracing::info!(session = %s.id, reason, ticks = s.tick, "session finished");
        let mut handle = s.handle();
        handle.state = SessionState::Finished;
        let payload = json!({
            "session": handle,
            "reason": reason,
            "record": record,
            "persisted": persisted,
            "error": error,
        });
        self.broadcast(&mut out, "summary", payload);
        out
    }
}
