use serde::{Deserialize, Serialize};

use crate::digest::sha256_hex;

use super::{Adjustment, DifficultyController, GameConfig, GameError, SPEED_FRAC_BITS};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Direction {
    LeftWard,
    RightWard,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum GameOutcome {
    Won,
    Lost,
}

/// Top-left corner of a shot, in field units.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Shot {
    pub x: i32,
    pub y: i32,
}

/// Held keys plus the fire edge, for one tick.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(default)]
pub struct GameInput {
    pub left: bool,
    pub right: bool,
    pub fire: bool,
}

impl GameInput {
    pub const IDLE: GameInput = GameInput {
        left: false,
        right: false,
        fire: false,
    };
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "camelCase")]
pub enum GameEvent {
    ShotFired { x: i32, y: i32 },
    /// A shot left the field without hitting anything.
    ShotMissed { x: i32 },
    Hit { row: u32, col: u32 },
    Reversed { direction: Direction },
    /// Emitted at the end of each success-rate window.
    #[serde(rename_all = "camelCase")]
    DifficultyWindow { hits: u32, window: u32, from_fixed: u32, to_fixed: u32 },
    Won,
    Lost,
}

/// Complete game state. Everything the next tick depends on lives here.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GameState {
    pub config: GameConfig,
    pub tick: u64,
    /// Row-major, `rows * cols`.
    pub alive: Vec<bool>,
    /// Grid origin x in fixed point (8 fractional bits).
    pub origin_x_fixed: i64,
    pub origin_y: i32,
    pub direction: Direction,
    pub craft_x: i32,
    pub shots: Vec<Shot>,
    pub score: u64,
    pub shots_fired: u64,
    pub hits: u64,
    pub difficulty: DifficultyController,
    pub over: bool,
    pub outcome: Option<GameOutcome>,
}

impl GameState {
    /// Integer grid origin: the fixed-point x rounded half up.
    pub fn origin(&self) -> (i32, i32) {
        let half = 1i64 << (SPEED_FRAC_BITS - 1);
        (((self.origin_x_fixed + half) >> SPEED_FRAC_BITS) as i32, self.origin_y)
    }

    pub fn alive_count(&self) -> usize {
        self.alive.iter().filter(|&&a| a).count()
    }

    /// Current invader speed in units/tick.
    pub fn speed(&self) -> f64 {
        self.difficulty.speed()
    }

    /// Top-left corner of the invader at (`row`, `col`).
    pub fn invader_pos(&self, cfg: &GameConfig, row: u32, col: u32) -> (i32, i32) {
        let (ox, oy) = self.origin();
        (
            ox + (col * (cfg.invader_size.0 + cfg.invader_gap.0)) as i32,
            oy + (row * (cfg.invader_size.1 + cfg.invader_gap.1)) as i32,
        )
    }

    /// SHA-256 over the canonical JSON form.
    pub fn digest(&self) -> String {
        sha256_hex(&serde_json::to_vec(self).expect("state serializes"))
    }
}

pub fn new_game(config: &GameConfig) -> Result<GameState, GameError> {
    config.validate()?;
    let origin_x = (config.field_w - config.grid_width()) / 2;
    Ok(GameState {
        config: config.clone(),
        tick: 0,
        alive: vec![true; config.invader_count()],
        origin_x_fixed: (origin_x as i64) << SPEED_FRAC_BITS,
        origin_y: config.grid_top as i32,
        direction: Direction::RightWard,
        craft_x: ((config.field_w - config.craft_size.0) / 2) as i32,
        shots: Vec::new(),
        score: 0,
        shots_fired: 0,
        hits: 0,
        difficulty: DifficultyController::new(
            config.base_invader_speed,
            &config.difficulty,
            config.outcome_history as usize,
            config.adaptive,
        ),
        over: false,
        outcome: None,
    })
}

fn overlaps(a: (i32, i32, u32, u32), b: (i32, i32, u32, u32)) -> bool {
    a.0 < b.0 + b.2 as i32 && b.0 < a.0 + a.2 as i32 && a.1 < b.1 + b.3 as i32 && b.1 < a.1 + a.3 as i32
}

/// Advances one tick. Sub-steps run in a fixed order: craft movement, fire,
/// shot advance, invader advance, collisions, game-over check, difficulty.
pub fn step(state: &GameState, input: GameInput) -> Result<(GameState, Vec<GameEvent>), GameError> {
    if state.over {
        return Err(GameError::SteppedFinishedGame);
    }
    let cfg = &state.config;
    let mut s = state.clone();
    let mut events = Vec::new();
    let mut resolved = Vec::new();

    let craft_w = cfg.craft_size.0 as i32;
    let (shot_w, shot_h) = (cfg.shot_size.0 as i32, cfg.shot_size.1 as i32);
    let craft_y = cfg.craft_y();

    // 1. craft
    let dir = input.right as i32 - input.left as i32;
    s.craft_x = (s.craft_x + dir * cfg.craft_speed as i32).clamp(0, cfg.field_w as i32 - craft_w);

    // 2. fire
    if input.fire && s.shots.len() < cfg.max_active_shots as usize {
        let shot = Shot {
            x: s.craft_x + craft_w / 2 - shot_w / 2,
            y: craft_y - shot_h,
        };
        s.shots.push(shot);
        s.shots_fired += 1;
        events.push(GameEvent::ShotFired { x: shot.x, y: shot.y });
    }

    // 3. shots
    s.shots.retain_mut(|shot| {
        shot.y -= cfg.shot_speed as i32;
        if shot.y + shot_h <= 0 {
            events.push(GameEvent::ShotMissed { x: shot.x });
            resolved.push(false);
            false
        } else {
            true
        }
    });

    // 4. invaders
    let alive_cols: Vec<u32> = (0..cfg.invader_cols)
        .filter(|&c| (0..cfg.invader_rows).any(|r| s.alive[(r * cfg.invader_cols + c) as usize]))
        .collect();
    if let (Some(&first), Some(&last)) = (alive_cols.first(), alive_cols.last()) {
        let pitch = (cfg.invader_size.0 + cfg.invader_gap.0) as i32;
        let speed = s.difficulty.speed_fixed() as i64;
        s.origin_x_fixed += match s.direction {
            Direction::RightWard => speed,
            Direction::LeftWard => -speed,
        };
        let ox = s.origin().0;
        let left_edge = ox + first as i32 * pitch;
        let right_edge = ox + last as i32 * pitch + cfg.invader_size.0 as i32;
        let bounce = match s.direction {
            Direction::RightWard if right_edge >= cfg.field_w as i32 => {
                let clamped = cfg.field_w as i32 - (last as i32 * pitch + cfg.invader_size.0 as i32);
                Some((clamped, Direction::LeftWard))
            }
            Direction::LeftWard if left_edge <= 0 => Some((-(first as i32) * pitch, Direction::RightWard)),
            _ => None,
        };
        if let Some((x, next)) = bounce {
            s.origin_x_fixed = (x as i64) << SPEED_FRAC_BITS;
            s.origin_y += cfg.invader_size.1 as i32;
            s.direction = next;
            events.push(GameEvent::Reversed { direction: next });
        }
    }

    // 5. collisions; the lowest invader in the shot's path is hit first
    let (inv_w, inv_h) = cfg.invader_size;
    let mut remaining = Vec::with_capacity(s.shots.len());
    for shot in std::mem::take(&mut s.shots) {
        let shot_box = (shot.x, shot.y, cfg.shot_size.0, cfg.shot_size.1);
        let mut hit = None;
        'search: for row in (0..cfg.invader_rows).rev() {
            for col in 0..cfg.invader_cols {
                if !s.alive[(row * cfg.invader_cols + col) as usize] {
                    continue;
                }
                let (x, y) = s.invader_pos(cfg, row, col);
                if overlaps(shot_box, (x, y, inv_w, inv_h)) {
                    hit = Some((row, col));
                    break 'search;
                }
            }
        }
        match hit {
            Some((row, col)) => {
                s.alive[(row * cfg.invader_cols + col) as usize] = false;
                s.hits += 1;
                s.score += 10;
                events.push(GameEvent::Hit { row, col });
                resolved.push(true);
            }
            None => remaining.push(shot),
        }
    }
    s.shots = remaining;

    // 6. game over
    if s.alive.iter().all(|&a| !a) {
        s.over = true;
        s.outcome = Some(GameOutcome::Won);
        events.push(GameEvent::Won);
    } else {
        let lowest_row = (0..cfg.invader_rows)
            .rev()
            .find(|&r| (0..cfg.invader_cols).any(|c| s.alive[(r * cfg.invader_cols + c) as usize]))
            .expect("some invader is alive");
        let bottom = s.invader_pos(cfg, lowest_row, 0).1 + inv_h as i32;
        if bottom >= craft_y {
            s.over = true;
            s.outcome = Some(GameOutcome::Lost);
            events.push(GameEvent::Lost);
        }
    }

    // 7. difficulty, once per completed window of resolved shots
    for hit in resolved {
        if let Some(Adjustment {
            hits,
            window,
            from_fixed,
            to_fixed,
        }) = s.difficulty.record(hit, &cfg.difficulty)
        {
            events.push(GameEvent::DifficultyWindow {
                hits,
                window,
                from_fixed,
                to_fixed,
            });
        }
    }

    s.tick += 1;
    Ok((s, events))
}

/// Hit fraction over the last `window` resolved shots.
pub fn success_rate(state: &GameState, window: usize) -> Result<f64, GameError> {
    state.difficulty.success_rate(window)
}

/// Runs `inputs` from a fresh game, stopping early if the game ends.
/// Returns the final state and the `(tick, event)` log.
pub fn replay(
    config: &GameConfig,
    inputs: impl IntoIterator<Item = GameInput>,
) -> Result<(GameState, Vec<(u64, GameEvent)>), GameError> {
    let mut state = new_game(config)?;
    let mut log = Vec::new();
    for input in inputs {
        if state.over {
            break;
        }
        let tick = state.tick;
        let (next, events) = step(&state, input)?;
        log.extend(events.into_iter().map(|e| (tick, e)));
        state = next;
    }
    Ok((state, log))
}
