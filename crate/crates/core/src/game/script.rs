//! JSON-lines input scripts and event logs for replay.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{GameError, GameEvent, GameInput};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
struct InputLine {
    tick: u64,
    #[serde(flatten)]
    input: GameInput,
}

/// One event as logged: `{"tick":n,"event":{...}}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TickEvent {
    pub tick: u64,
    pub event: GameEvent,
}

/// Writes one `{"tick":n,"left":..,"right":..,"fire":..}` line per tick.
pub fn write_input_script(mut out: impl Write, inputs: &[GameInput]) -> Result<(), GameError> {
    for (tick, &input) in inputs.iter().enumerate() {
        let line = serde_json::to_string(&InputLine {
            tick: tick as u64,
            input,
        })
        .expect("input serializes");
        writeln!(out, "{line}")?;
    }
    Ok(())
}

/// Reads an input script. Ticks missing from the script are idle; blank lines are skipped.
pub fn read_input_script(input: impl BufRead) -> Result<Vec<GameInput>, GameError> {
    let mut inputs = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: InputLine =
            serde_json::from_str(&line).map_err(|source| GameError::Script { line: i + 1, source })?;
        let tick = parsed.tick as usize;
        if inputs.len() <= tick {
            inputs.resize(tick + 1, GameInput::IDLE);
        }
        inputs[tick] = parsed.input;
    }
    Ok(inputs)
}

pub fn write_event_log(mut out: impl Write, events: &[(u64, GameEvent)]) -> Result<(), GameError> {
    for (tick, event) in events {
        let line = serde_json::to_string(&TickEvent {
            tick: *tick,
            event: event.clone(),
        })
        .expect("event serializes");
        writeln!(out, "{line}")?;
    }
    Ok(())
}

pub fn read_event_log(input: impl BufRead) -> Result<Vec<(u64, GameEvent)>, GameError> {
    let mut events = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let e: TickEvent =
            serde_json::from_str(&line).map_err(|source| GameError::Script { line: i + 1, source })?;
        events.push((e.tick, e.event));
    }
    Ok(events)
}
