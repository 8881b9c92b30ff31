use serde::{Deserialize, Serialize};

use crate::image::Rgba;
use crate::stereo::EyeAssignment;

use super::{DifficultyParams, GameError};

/// Which eye sees each group of game elements.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct LayerAssignments {
    pub background: EyeAssignment,
    pub invaders: EyeAssignment,
    pub craft: EyeAssignment,
    pub shots: EyeAssignment,
}

impl Default for LayerAssignments {
    fn default() -> Self {
        LayerAssignments {
            background: EyeAssignment::Both,
            invaders: EyeAssignment::Both,
            craft: EyeAssignment::LazyOnly,
            shots: EyeAssignment::LazyOnly,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct Palette {
    pub anchors: Rgba,
    pub invader: Rgba,
    pub craft: Rgba,
    pub shot: Rgba,
}

impl Default for Palette {
    fn default() -> Self {
        Palette {
            anchors: Rgba::rgb(96, 96, 192),
            invader: Rgba::rgb(0, 200, 0),
            craft: Rgba::rgb(220, 0, 0),
            shot: Rgba::rgb(255, 255, 0),
        }
    }
}

/// Geometry, speeds and therapy knobs. Overrides load from `game.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct GameConfig {
    pub field_w: u32,
    pub field_h: u32,
    pub invader_rows: u32,
    pub invader_cols: u32,
    pub invader_size: (u32, u32),
    pub invader_gap: (u32, u32),
    /// y of the top invader row at start.
    pub grid_top: u32,
    pub craft_size: (u32, u32),
    /// Gap between the craft and the bottom of the field.
    pub craft_margin: u32,
    pub shot_size: (u32, u32),
    /// Units/tick; stored in the state as fixed point.
    pub base_invader_speed: f64,
    pub shot_speed: u32,
    pub craft_speed: u32,
    pub max_active_shots: u32,
    pub tick_hz: u32,
    pub seed: u64,
    pub difficulty: DifficultyParams,
    pub adaptive: bool,
    /// Resolved shots kept for success-rate queries.
    pub outcome_history: u32,
    pub assignments: LayerAssignments,
    pub palette: Palette,
}

impl Default for GameConfig {
    fn default() -> Self {
        GameConfig {
            field_w: 320,
            field_h: 240,
            invader_rows: 5,
            invader_cols: 8,
            invader_size: (16, 12),
            invader_gap: (8, 8),
            grid_top: 24,
            craft_size: (20, 10),
            craft_margin: 6,
            shot_size: (2, 6),
            base_invader_speed: 1.0,
            shot_speed: 4,
            craft_speed: 2,
            max_active_shots: 3,
            tick_hz: 60,
            seed: 0,
            difficulty: DifficultyParams::default(),
            adaptive: true,
            outcome_history: 64,
            assignments: LayerAssignments::default(),
            palette: Palette::default(),
        }
    }
}

impl GameConfig {
    pub fn craft_y(&self) -> i32 {
        self.field_h as i32 - self.craft_size.1 as i32 - self.craft_margin as i32
    }

    pub fn grid_width(&self) -> u32 {
        self.invader_cols * self.invader_size.0 + (self.invader_cols.saturating_sub(1)) * self.invader_gap.0
    }

    pub fn grid_height(&self) -> u32 {
        self.invader_rows * self.invader_size.1 + (self.invader_rows.saturating_sub(1)) * self.invader_gap.1
    }

    pub fn invader_count(&self) -> usize {
        (self.invader_rows * self.invader_cols) as usize
    }

    pub fn validate(&self) -> Result<(), GameError> {
        let bad = |m: String| Err(GameError::InvalidConfig(m));
        if self.field_w == 0 || self.field_h == 0 {
            return bad("field must be non-empty".into());
        }
        if self.invader_rows == 0 || self.invader_cols == 0 {
            return bad("invader grid must be non-empty".into());
        }
        let sizes = [self.invader_size, self.craft_size, self.shot_size];
        if sizes.iter().any(|&(w, h)| w == 0 || h == 0) {
            return bad("sprite sizes must be positive".into());
        }
        if self.shot_speed == 0 || self.craft_speed == 0 || self.tick_hz == 0 {
            return bad("speeds and tick rate must be positive".into());
        }
        if !self.base_invader_speed.is_finite() || self.base_invader_speed <= 0.0 {
            return bad("base invader speed must be positive".into());
        }
        if self.max_active_shots == 0 {
            return bad("at least one active shot must be allowed".into());
        }
        if self.grid_width() > self.field_w {
            return bad(format!(
                "invader grid is {} wide but the field is {}",
                self.grid_width(),
                self.field_w
            ));
        }
        if self.craft_size.0 > self.field_w || self.craft_y() < 0 {
            return bad("craft does not fit the field".into());
        }
        if self.grid_top as i32 + self.grid_height() as i32 >= self.craft_y() {
            return bad("invader grid starts at or below the craft".into());
        }
        self.difficulty.validate()?;
        let speed = self.base_invader_speed;
        if speed < self.difficulty.speed_min || speed > self.difficulty.speed_max {
            return bad(format!(
                "base speed {speed} outside [{}, {}]",
                self.difficulty.speed_min, self.difficulty.speed_max
            ));
        }
        Ok(())
    }
}
