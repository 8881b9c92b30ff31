//! Per-session event log entries and input reconstruction for replay.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use dichopt_core::game::{GameConfig, GameEvent, GameInput};
use dichopt_core::persistence::Activity;

use crate::protocol::{Key, KeyAction};

/// One line of `events/<session>.jsonl`. `tick` is the step an entry
/// belongs to: inputs logged at tick `n` were applied by step `n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub tick: u64,
    #[serde(flatten)]
    pub body: LogBody,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum LogBody {
    #[serde(rename_all = "camelCase")]
    Start {
        activity: Activity,
        patient_id: String,
        params: Map<String, Value>,
        /// Full game configuration, so the log replays on its own.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        game: Option<GameConfig>,
    },
    #[serde(rename_all = "camelCase")]
    Input {
        key: Key,
        action: KeyAction,
        conn: u64,
        seq: u64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        client_tick: Option<u64>,
    },
    Game { event: GameEvent },
    Cmd { name: String, args: Map<String, Value> },
    /// Activity-specific happenings such as a recorded screening trial.
    Note { data: Value },
    Pause,
    Resume,
    Finish { reason: String },
}

/// Key state that persists across ticks. Fire is an edge: it triggers on
/// `down` and is cleared after the tick that consumed it.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct HeldKeys {
    pub left: bool,
    pub right: bool,
}

impl HeldKeys {
    /// Applies one tick's inputs in arrival order and returns the game input.
    pub fn apply<'a>(&mut self, inputs: impl IntoIterator<Item = (Key, KeyAction)> + 'a) -> GameInput {
        let mut fire = false;
        for (key, action) in inputs {
            let down = action == KeyAction::Down;
            match key {
                Key::Left => self.left = down,
                Key::Right => self.right = down,
                Key::Fire => fire |= down,
            }
        }
        GameInput {
            left: self.left,
            right: self.right,
            fire,
        }
    }
}

/// Per-tick game inputs recorded in a log, covering ticks `0..ticks`.
pub fn inputs_from_log(entries: &[LogEntry], ticks: u64) -> Vec<GameInput> {
    let mut held = HeldKeys::default();
    let mut out = Vec::with_capacity(ticks as usize);
    let mut i = 0;
    for tick in 0..ticks {
        let mut batch = Vec::new();
        while i < entries.len() && entries[i].tick <= tick {
            if let (true, LogBody::Input { key, action, .. }) = (entries[i].tick == tick, &entries[i].body) {
                batch.push((*key, *action));
            }
            i += 1;
        }
        out.push(held.apply(batch));
    }
    out
}

/// Game configuration from a log's start entry.
pub fn game_config_from_log(entries: &[LogEntry]) -> Option<GameConfig> {
    entries.iter().find_map(|e| match &e.body {
        LogBody::Start { game, .. } => game.clone(),
        _ => None,
    })
}

/// Number of steps the session advanced, from the finish entry.
pub fn steps_from_log(entries: &[LogEntry]) -> Option<u64> {
    entries.iter().rev().find_map(|e| match e.body {
        LogBody::Finish { .. } => Some(e.tick),
        _ => None,
    })
}

/// Game events in `(tick, event)` form, as produced by a direct replay.
pub fn game_events_from_log(entries: &[LogEntry]) -> Vec<(u64, GameEvent)> {
    entries
        .iter()
        .filter_map(|e| match &e.body {
            LogBody::Game { event } => Some((e.tick, event.clone())),
            _ => None,
        })
        .collect()
}

pub fn parse_log(text: &str) -> Result<Vec<LogEntry>, serde_json::Error> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn held_keys_persist_and_fire_is_an_edge() {
        let entries = vec![
            LogEntry {
                tick: 1,
                body: LogBody::Input { key: Key::Left, action: KeyAction::Down, conn: 1, seq: 3, client_tick: None },
            },
            LogEntry {
                tick: 1,
                body: LogBody::Input { key: Key::Fire, action: KeyAction::Down, conn: 1, seq: 4, client_tick: None },
            },
            LogEntry {
                tick: 3,
                body: LogBody::Input { key: Key::Left, action: KeyAction::Up, conn: 1, seq: 5, client_tick: Some(2) },
            },
        ];
        let inputs = inputs_from_log(&entries, 5);
        let left: Vec<bool> = inputs.iter().map(|i| i.left).collect();
        let fire: Vec<bool> = inputs.iter().map(|i| i.fire).collect();
        assert_eq!(left, [false, true, true, false, false]);
        assert_eq!(fire, [false, true, false, false, false]);
    }

    #[test]
    fn entries_serialize_flat() {
        let e = LogEntry { tick: 7, body: LogBody::Pause };
        assert_eq!(serde_json::to_string(&e).unwrap(), r#"{"tick":7,"kind":"pause"}"#);
        let g = LogEntry { tick: 2, body: LogBody::Game { event: GameEvent::Won } };
        let text = serde_json::to_string(&g).unwrap();
        assert_eq!(text, r#"{"tick":2,"kind":"game","event":{"type":"won"}}"#);
        assert_eq!(serde_json::from_str::<LogEntry>(&text).unwrap(), g);
    }
}
