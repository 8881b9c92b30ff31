//! Dichoptic rendering and binocular vision therapy engine.
//!
//! Scene content is split between the amblyopic ("lazy") eye and the fellow
//! eye, encoded for stereo presentation and driven by diagnostic procedures,
//! a passive viewer or an adaptive game. Sessions are recorded per patient
//! for compliance review.

pub mod diagnostics;
pub mod digest;
pub mod game;
pub mod image;
pub mod persistence;
pub mod prng;
pub mod stereo;
pub mod viewer;

pub use crate::image::{Image, ImageError, Rgba};
pub use crate::stereo::{
    ComposePolicy, Encoding, EyeAssignment, EyeSide, SceneLayer, StereoError, StereoPair,
};
