//! Diagnostic stimuli and measurements: fusion split, asymmetric noise
//! screening, alignment circles and squint-angle estimation.
//!
//! Stimuli here are deliberately single-eye per element, so they are built
//! directly rather than through the fusion-gated [`crate::stereo::compose`].

mod alignment;
mod fusion;
mod noise;
mod screening;
mod squint;

use thiserror::Error;

pub use alignment::{
    alignment_step, draw_circle, render_alignment, replay_alignment, AlignmentCommand,
    AlignmentState, DEFAULT_CIRCLE_RADIUS,
};
pub use fusion::{box_outline, make_fusion_stimulus, FusionStimulus, SplitAxis};
pub use noise::{make_noise_stimulus, NoiseStimulus, DEFAULT_DENSITY_HIGH, DEFAULT_DENSITY_LOW};
pub use screening::{
    classify_screening, screening_schedule, ScreeningClass, ScreeningOutcome, ScreeningTrial,
};
pub use squint::{squint_offset_to_angle, SquintMeasurement};

use crate::image::ImageError;
use crate::stereo::{EyeSide, StereoError};

#[derive(Debug, Error)]
pub enum DiagnosticsError {
    #[error("shape of {width}x{height} cannot be split along the {axis:?} axis")]
    DegenerateShape {
        width: u32,
        height: u32,
        axis: SplitAxis,
    },
    #[error("noise densities must satisfy 0 <= low <= high <= 1, got low={low} high={high}")]
    DensityOrderViolation { low: f64, high: f64 },
    #[error("alignment already confirmed")]
    AlreadyConfirmed,
    #[error("pixel pitch and viewing distance must be positive, got {pitch_mm} mm/px and {distance_mm} mm")]
    NonPositiveGeometry { pitch_mm: f64, distance_mm: f64 },
    #[error("no screening trials")]
    EmptyTrials,
    #[error("no screening trial with the high-noise image on the {0} eye")]
    MissingDirection(EyeSide),
    #[error(transparent)]
    Stereo(#[from] StereoError),
    #[error(transparent)]
    Image(#[from] ImageError),
}
