use crate::image::{Image, Rgba};
use crate::stereo::{compose, ComposePolicy, SceneLayer, StereoError, StereoPair};

use super::{GameConfig, GameState};

/// Width of the field border drawn as the shared fusion anchor.
const ANCHOR_BORDER: u32 = 2;

fn anchors(cfg: &GameConfig) -> Image {
    let (w, h) = (cfg.field_w, cfg.field_h);
    Image::from_fn(w, h, |x, y| {
        let border = x < ANCHOR_BORDER || y < ANCHOR_BORDER || x + ANCHOR_BORDER >= w || y + ANCHOR_BORDER >= h;
        if border {
            cfg.palette.anchors
        } else {
            Rgba::TRANSPARENT
        }
    })
    .expect("validated field size")
}

fn rect(size: (u32, u32), color: Rgba) -> Image {
    Image::filled(size.0, size.1, color).expect("validated sprite size")
}

/// Scene layers for one game frame: the anchor border (z=0), one layer per
/// live invader (z=1), the craft and one layer per shot (z=2).
pub fn render_layers(state: &GameState) -> Vec<SceneLayer> {
    let cfg = &state.config;
    let a = cfg.assignments;
    let mut layers = Vec::with_capacity(2 + state.alive.len() + state.shots.len());
    layers.push(SceneLayer::new("background", anchors(cfg), (0, 0), a.background, 0));
    let invader = rect(cfg.invader_size, cfg.palette.invader);
    for row in 0..cfg.invader_rows {
        for col in 0..cfg.invader_cols {
            if state.alive[(row * cfg.invader_cols + col) as usize] {
                layers.push(SceneLayer::new(
                    format!("invader-{row}-{col}"),
                    invader.clone(),
                    state.invader_pos(cfg, row, col),
                    a.invaders,
                    1,
                ));
            }
        }
    }
    layers.push(SceneLayer::new(
        "craft",
        rect(cfg.craft_size, cfg.palette.craft),
        (state.craft_x, cfg.craft_y()),
        a.craft,
        2,
    ));
    let shot = rect(cfg.shot_size, cfg.palette.shot);
    for (i, s) in state.shots.iter().enumerate() {
        layers.push(SceneLayer::new(format!("shot-{i}"), shot.clone(), (s.x, s.y), a.shots, 2));
    }
    layers
}

pub fn render_frame(state: &GameState, policy: &ComposePolicy) -> Result<StereoPair, StereoError> {
    let cfg = &state.config;
    compose(&render_layers(state), policy, (cfg.field_w, cfg.field_h))
}
