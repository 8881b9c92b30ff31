//! Deterministic space-invaders game for dichoptic play.
//!
//! The state machine uses integer field units; the invader speed is a
//! fixed-point value with 8 fractional bits so difficulty scaling stays
//! exact across platforms. The craft and its shots are drawn for the lazy
//! eye only, invaders and background anchors for both eyes.

mod config;
mod difficulty;
mod render;
mod script;
mod state;

use thiserror::Error;

pub use config::{GameConfig, LayerAssignments, Palette};
pub use difficulty::{
    adjust_difficulty, fixed_to_speed, speed_to_fixed, Adjustment, DifficultyController,
    DifficultyParams, SPEED_FRAC_BITS,
};
pub use render::{render_frame, render_layers};
pub use script::{read_event_log, read_input_script, write_event_log, write_input_script, TickEvent};
pub use state::{
    new_game, replay, step, success_rate, Direction, GameEvent, GameInput, GameOutcome, GameState,
    Shot,
};

#[derive(Debug, Error)]
pub enum GameError {
    #[error("invalid game config: {0}")]
    InvalidConfig(String),
    #[error("the game is already over")]
    SteppedFinishedGame,
    #[error("only {available} resolved shots, need {window}")]
    NotEnoughData { available: usize, window: usize },
    #[error("window must be positive")]
    ZeroWindow,
    #[error("line {line}: {source}")]
    Script {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}
