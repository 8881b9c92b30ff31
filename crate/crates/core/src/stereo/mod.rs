//! Per-eye scene composition and stereo frame encodings.
//!
//! A frame is described as a list of [`SceneLayer`]s, each tagged with an
//! [`EyeAssignment`]. [`compose`] paints them into a [`StereoPair`] with the
//! lazy-eye canvas on the side named by the [`ComposePolicy`]. Layers shown to
//! both eyes act as fusion anchors; a mixed frame whose shared content falls
//! under `min_shared_ratio` is rejected.

mod compose;
mod encode;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::image::{Image, ImageError, Rgba};

pub use compose::{attenuate, compose, overlay, paint_sprite, shared_content_ratio};
pub use encode::{
    decode_anaglyph, encode_anaglyph, encode_frame_sequential, encode_side_by_side,
    read_frame_sequence, split_side_by_side, write_frame_sequence, FrameStream, FrameTag,
    DEFAULT_REFRESH_HZ,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EyeSide {
    Left,
    Right,
}

impl EyeSide {
    pub fn other(self) -> EyeSide {
        match self {
            EyeSide::Left => EyeSide::Right,
            EyeSide::Right => EyeSide::Left,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EyeSide::Left => "left",
            EyeSide::Right => "right",
        }
    }

    /// Single-letter tag used in frame file names.
    pub fn letter(self) -> char {
        match self {
            EyeSide::Left => 'L',
            EyeSide::Right => 'R',
        }
    }
}

impl fmt::Display for EyeSide {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EyeSide {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "left" | "l" => Ok(EyeSide::Left),
            "right" | "r" => Ok(EyeSide::Right),
            other => Err(format!("unknown eye side `{other}`")),
        }
    }
}

/// Which eye(s) a layer is shown to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EyeAssignment {
    #[serde(rename = "lazy")]
    LazyOnly,
    #[serde(rename = "fellow")]
    FellowOnly,
    #[serde(rename = "both")]
    Both,
}

impl EyeAssignment {
    pub fn shows_lazy(self) -> bool {
        matches!(self, EyeAssignment::LazyOnly | EyeAssignment::Both)
    }

    pub fn shows_fellow(self) -> bool {
        matches!(self, EyeAssignment::FellowOnly | EyeAssignment::Both)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EyeAssignment::LazyOnly => "lazy",
            EyeAssignment::FellowOnly => "fellow",
            EyeAssignment::Both => "both",
        }
    }
}

impl FromStr for EyeAssignment {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "lazy" => Ok(EyeAssignment::LazyOnly),
            "fellow" => Ok(EyeAssignment::FellowOnly),
            "both" => Ok(EyeAssignment::Both),
            other => Err(format!("unknown eye assignment `{other}`")),
        }
    }
}

/// Drawable content placed in frame coordinates. Parts outside the frame are clipped.
#[derive(Clone, Debug, PartialEq)]
pub struct SceneLayer {
    pub id: String,
    pub sprite: Image,
    pub position: (i32, i32),
    pub assignment: EyeAssignment,
    /// Draw order, higher is painted later. Ties keep list order.
    pub z: i32,
}

impl SceneLayer {
    pub fn new(
        id: impl Into<String>,
        sprite: Image,
        position: (i32, i32),
        assignment: EyeAssignment,
        z: i32,
    ) -> Self {
        SceneLayer {
            id: id.into(),
            sprite,
            position,
            assignment,
            z,
        }
    }
}

/// A left/right image pair of identical dimensions.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct StereoPair {
    left: Image,
    right: Image,
}

impl StereoPair {
    pub fn new(left: Image, right: Image) -> Result<Self, StereoError> {
        if left.dimensions() != right.dimensions() {
            return Err(StereoError::DimensionMismatch {
                left: left.dimensions(),
                right: right.dimensions(),
            });
        }
        Ok(StereoPair { left, right })
    }

    /// Places `lazy` on `lazy_side` and `fellow` on the other side.
    pub fn from_eyes(lazy: Image, fellow: Image, lazy_side: EyeSide) -> Result<Self, StereoError> {
        match lazy_side {
            EyeSide::Left => StereoPair::new(lazy, fellow),
            EyeSide::Right => StereoPair::new(fellow, lazy),
        }
    }

    pub fn left(&self) -> &Image {
        &self.left
    }

    pub fn right(&self) -> &Image {
        &self.right
    }

    pub fn eye(&self, side: EyeSide) -> &Image {
        match side {
            EyeSide::Left => &self.left,
            EyeSide::Right => &self.right,
        }
    }

    pub fn dimensions(&self) -> (u32, u32) {
        self.left.dimensions()
    }

    pub fn into_parts(self) -> (Image, Image) {
        (self.left, self.right)
    }
}

/// Parameters controlling [`compose`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct ComposePolicy {
    pub lazy_eye: EyeSide,
    /// Multiplier applied to the fellow eye's RGB; 1.0 leaves it untouched.
    pub fellow_attenuation: f64,
    /// Canvas color. Must be opaque.
    pub clear_color: Rgba,
    pub min_shared_ratio: f64,
}

pub const DEFAULT_MIN_SHARED_RATIO: f64 = 0.10;

impl Default for ComposePolicy {
    fn default() -> Self {
        ComposePolicy {
            lazy_eye: EyeSide::Right,
            fellow_attenuation: 1.0,
            clear_color: Rgba::BLACK,
            min_shared_ratio: DEFAULT_MIN_SHARED_RATIO,
        }
    }
}

impl ComposePolicy {
    pub fn with_lazy_eye(lazy_eye: EyeSide) -> Self {
        ComposePolicy {
            lazy_eye,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), StereoError> {
        if !(0.0..=1.0).contains(&self.fellow_attenuation) {
            return Err(StereoError::FactorOutOfRange(self.fellow_attenuation));
        }
        if !(0.0..=1.0).contains(&self.min_shared_ratio) {
            return Err(StereoError::InvalidPolicy(format!(
                "min shared ratio {} outside [0, 1]",
                self.min_shared_ratio
            )));
        }
        if self.clear_color.a() != 255 {
            return Err(StereoError::InvalidPolicy(format!(
                "clear color {} is not opaque",
                self.clear_color
            )));
        }
        Ok(())
    }
}

/// Presentation encoding for a [`StereoPair`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Encoding {
    #[serde(rename = "anaglyph")]
    Anaglyph,
    #[serde(rename = "sbs")]
    SideBySide,
    #[serde(rename = "seq")]
    FrameSequential,
}

impl Encoding {
    pub fn as_str(self) -> &'static str {
        match self {
            Encoding::Anaglyph => "anaglyph",
            Encoding::SideBySide => "sbs",
            Encoding::FrameSequential => "seq",
        }
    }
}

impl fmt::Display for Encoding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Encoding {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "anaglyph" => Ok(Encoding::Anaglyph),
            "sbs" => Ok(Encoding::SideBySide),
            "seq" => Ok(Encoding::FrameSequential),
            other => Err(format!("unknown encoding `{other}` (anaglyph|sbs|seq)")),
        }
    }
}

#[derive(Debug, Error)]
pub enum StereoError {
    #[error("frame size must be positive, got {0}x{1}")]
    EmptyFrameSize(u32, u32),
    #[error("shared content ratio {ratio:.4} is below the required {min:.4}")]
    SharedContentTooLow { ratio: f64, min: f64 },
    #[error("no pixel differs from the clear color in either eye")]
    EmptyFrame,
    #[error("attenuation factor {0} outside [0, 1]")]
    FactorOutOfRange(f64),
    #[error("invalid compose policy: {0}")]
    InvalidPolicy(String),
    #[error("image dimensions differ: left {left:?}, right {right:?}")]
    DimensionMismatch { left: (u32, u32), right: (u32, u32) },
    #[error("refresh rate must be even and positive, got {0}")]
    OddRefreshRate(u32),
    #[error("bad frame file name `{0}`")]
    BadFrameName(String),
    #[error("frame sequence is inconsistent: {0}")]
    BadSequence(String),
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}
