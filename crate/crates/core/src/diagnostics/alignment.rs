use serde::{Deserialize, Serialize};

use crate::image::{Image, Rgba};
use crate::stereo::{ComposePolicy, StereoPair};

use super::DiagnosticsError;

pub const DEFAULT_CIRCLE_RADIUS: u32 = 40;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "lowercase")]
pub enum AlignmentCommand {
    Translate { dx: i32, dy: i32 },
    Confirm,
}

/// Two equal circles, the fixed one shown to the fellow eye and the movable
/// one to the lazy eye. The patient steers the movable circle until only one
/// circle is perceived.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AlignmentState {
    pub fixed_circle: (i32, i32),
    pub movable_circle: (i32, i32),
    pub radius: u32,
    pub confirmed: bool,
    pub history: Vec<AlignmentCommand>,
}

impl AlignmentState {
    /// Both circles start concentric at `center`.
    pub fn centered(center: (i32, i32), radius: u32) -> Self {
        AlignmentState {
            fixed_circle: center,
            movable_circle: center,
            radius,
            confirmed: false,
            history: Vec::new(),
        }
    }

    /// Movable minus fixed center.
    pub fn offset(&self) -> (i32, i32) {
        (
            self.movable_circle.0 - self.fixed_circle.0,
            self.movable_circle.1 - self.fixed_circle.1,
        )
    }
}

pub fn alignment_step(
    state: &AlignmentState,
    cmd: AlignmentCommand,
) -> Result<AlignmentState, DiagnosticsError> {
    if state.confirmed {
        return Err(DiagnosticsError::AlreadyConfirmed);
    }
    let mut next = state.clone();
    match cmd {
        AlignmentCommand::Translate { dx, dy } => {
            next.movable_circle.0 += dx;
            next.movable_circle.1 += dy;
        }
        AlignmentCommand::Confirm => next.confirmed = true,
    }
    next.history.push(cmd);
    Ok(next)
}

pub fn replay_alignment(
    initial: &AlignmentState,
    script: &[AlignmentCommand],
) -> Result<AlignmentState, DiagnosticsError> {
    script
        .iter()
        .try_fold(initial.clone(), |s, &cmd| alignment_step(&s, cmd))
}

/// One-pixel midpoint circle, clipped to the image.
pub fn draw_circle(img: &mut Image, center: (i32, i32), radius: u32, color: Rgba) {
    let (cx, cy) = center;
    let r = radius as i32;
    let mut plot = |x: i32, y: i32| {
        if x >= 0 && y >= 0 && (x as u32) < img.width() && (y as u32) < img.height() {
            img.put(x as u32, y as u32, color);
        }
    };
    let (mut x, mut y) = (r, 0);
    let mut err = 1 - r;
    while x >= y {
        for (px, py) in [
            (x, y),
            (y, x),
            (-y, x),
            (-x, y),
            (-x, -y),
            (-y, -x),
            (y, -x),
            (x, -y),
        ] {
            plot(cx + px, cy + py);
        }
        y += 1;
        if err < 0 {
            err += 2 * y + 1;
        } else {
            x -= 1;
            err += 2 * (y - x) + 1;
        }
    }
}

/// Draws the movable circle for the lazy eye and the fixed circle for the
/// fellow eye, both in `color`.
pub fn render_alignment(
    state: &AlignmentState,
    frame: (u32, u32),
    policy: &ComposePolicy,
    color: Rgba,
) -> Result<StereoPair, DiagnosticsError> {
    let mut lazy = Image::filled(frame.0, frame.1, policy.clear_color)?;
    let mut fellow = lazy.clone();
    draw_circle(&mut lazy, state.movable_circle, state.radius, color);
    draw_circle(&mut fellow, state.fixed_circle, state.radius, color);
    Ok(StereoPair::from_eyes(lazy, fellow, policy.lazy_eye)?)
}
