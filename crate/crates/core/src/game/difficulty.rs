use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::GameError;

pub const SPEED_FRAC_BITS: u32 = 8;
const SPEED_ONE: f64 = (1u32 << SPEED_FRAC_BITS) as f64;

/// Units/tick to fixed point, rounding half up.
pub fn speed_to_fixed(speed: f64) -> u32 {
    (speed * SPEED_ONE + 0.5).floor() as u32
}

pub fn fixed_to_speed(fixed: u32) -> f64 {
    fixed as f64 / SPEED_ONE
}

/// Success-rate band controller settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct DifficultyParams {
    pub window_shots: u32,
    pub hi_rate: f64,
    pub lo_rate: f64,
    pub up_factor: f64,
    pub down_factor: f64,
    pub speed_min: f64,
    pub speed_max: f64,
}

impl Default for DifficultyParams {
    fn default() -> Self {
        DifficultyParams {
            window_shots: 10,
            hi_rate: 0.7,
            lo_rate: 0.3,
            up_factor: 1.25,
            down_factor: 0.8,
            speed_min: 0.5,
            speed_max: 4.0,
        }
    }
}

impl DifficultyParams {
    pub fn validate(&self) -> Result<(), GameError> {
        let bad = |m: &str| Err(GameError::InvalidConfig(format!("difficulty: {m}")));
        if self.window_shots == 0 {
            return bad("window must be positive");
        }
        if !(0.0 <= self.lo_rate && self.lo_rate < self.hi_rate && self.hi_rate <= 1.0) {
            return bad("need 0 <= loRate < hiRate <= 1");
        }
        if !(self.down_factor > 0.0 && self.down_factor < 1.0 && 1.0 < self.up_factor) {
            return bad("need 0 < downFactor < 1 < upFactor");
        }
        if !(self.speed_min > 0.0 && self.speed_min <= self.speed_max && self.speed_max.is_finite()) {
            return bad("need 0 < speedMin <= speedMax");
        }
        Ok(())
    }
}

/// Raises the speed above the success band, lowers it below, holds it inside.
pub fn adjust_difficulty(speed: f64, rate: f64, p: &DifficultyParams) -> f64 {
    if rate > p.hi_rate {
        (speed * p.up_factor).min(p.speed_max)
    } else if rate < p.lo_rate {
        (speed * p.down_factor).max(p.speed_min)
    } else {
        speed
    }
}

/// Result of one completed window.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Adjustment {
    pub hits: u32,
    pub window: u32,
    pub from_fixed: u32,
    pub to_fixed: u32,
}

/// Tracks resolved shots and applies [`adjust_difficulty`] once per full window.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DifficultyController {
    speed_fixed: u32,
    min_fixed: u32,
    max_fixed: u32,
    window: u32,
    /// Most recent outcomes, newest last; true = hit.
    outcomes: VecDeque<bool>,
    capacity: usize,
    since_adjust: u32,
    adaptive: bool,
}

impl DifficultyController {
    pub fn new(initial_speed: f64, params: &DifficultyParams, history: usize, adaptive: bool) -> Self {
        DifficultyController {
            speed_fixed: speed_to_fixed(initial_speed),
            min_fixed: speed_to_fixed(params.speed_min),
            max_fixed: speed_to_fixed(params.speed_max),
            window: params.window_shots,
            outcomes: VecDeque::with_capacity(history),
            capacity: history.max(params.window_shots as usize),
            since_adjust: 0,
            adaptive,
        }
    }

    pub fn speed_fixed(&self) -> u32 {
        self.speed_fixed
    }

    pub fn speed(&self) -> f64 {
        fixed_to_speed(self.speed_fixed)
    }

    /// Overrides the current speed (clinician command), clamped to the bounds.
    pub fn set_speed(&mut self, speed: f64) {
        self.speed_fixed = speed_to_fixed(speed).clamp(self.min_fixed, self.max_fixed);
    }

    pub fn set_adaptive(&mut self, adaptive: bool) {
        self.adaptive = adaptive;
    }

    pub fn resolved(&self) -> usize {
        self.outcomes.len()
    }

    /// Hit fraction over the last `window` resolved shots.
    pub fn success_rate(&self, window: usize) -> Result<f64, GameError> {
        if window == 0 {
            return Err(GameError::ZeroWindow);
        }
        if self.outcomes.len() < window {
            return Err(GameError::NotEnoughData {
                available: self.outcomes.len(),
                window,
            });
        }
        let hits = self.outcomes.iter().rev().take(window).filter(|&&h| h).count();
        Ok(hits as f64 / window as f64)
    }

    /// Records one resolved shot; returns the adjustment when a window completes.
    pub fn record(&mut self, hit: bool, params: &DifficultyParams) -> Option<Adjustment> {
        if self.outcomes.len() == self.capacity {
            self.outcomes.pop_front();
        }
        self.outcomes.push_back(hit);
        self.since_adjust += 1;
        if self.since_adjust < self.window {
            return None;
        }
        self.since_adjust = 0;
        let window = self.window as usize;
        let hits = self.outcomes.iter().rev().take(window).filter(|&&h| h).count() as u32;
        let from = self.speed_fixed;
        if self.adaptive {
            let rate = hits as f64 / self.window as f64;
            let next = adjust_difficulty(fixed_to_speed(from), rate, params);
            self.speed_fixed = speed_to_fixed(next).clamp(self.min_fixed, self.max_fixed);
        }
        Some(Adjustment {
            hits,
            window: self.window,
            from_fixed: from,
            to_fixed: self.speed_fixed,
        })
    }
}
