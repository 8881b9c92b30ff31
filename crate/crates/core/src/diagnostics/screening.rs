use serde::{Deserialize, Serialize};

use crate::stereo::EyeSide;

use super::DiagnosticsError;

/// Patient's report for one noise-asymmetry trial. Entered by a person; the
/// engine never infers recognition from pixels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum ScreeningOutcome {
    RecognizedHighNoiseTrial,
    NotRecognized,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ScreeningTrial {
    pub high_eye: EyeSide,
    pub density_high: f64,
    pub density_low: f64,
    pub seed: u64,
    pub outcome: ScreeningOutcome,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "class", content = "eye", rename_all = "camelCase")]
pub enum ScreeningClass {
    SuspectLazy(EyeSide),
    NoSuspicion,
    Inconclusive,
}

/// Recognition despite heavy noise on eye `e` suggests that eye is being
/// suppressed, so the eye with the strict majority of recognitions is the
/// suspect. No recognitions at all means fusion is intact.
pub fn classify_screening(trials: &[ScreeningTrial]) -> Result<ScreeningClass, DiagnosticsError> {
    if trials.is_empty() {
        return Err(DiagnosticsError::EmptyTrials);
    }
    for eye in [EyeSide::Left, EyeSide::Right] {
        if !trials.iter().any(|t| t.high_eye == eye) {
            return Err(DiagnosticsError::MissingDirection(eye));
        }
    }
    let recognized = |eye| {
        trials
            .iter()
            .filter(|t| t.high_eye == eye && t.outcome == ScreeningOutcome::RecognizedHighNoiseTrial)
            .count()
    };
    let (left, right) = (recognized(EyeSide::Left), recognized(EyeSide::Right));
    Ok(match (left, right) {
        (0, 0) => ScreeningClass::NoSuspicion,
        (l, r) if l > r => ScreeningClass::SuspectLazy(EyeSide::Left),
        (l, r) if r > l => ScreeningClass::SuspectLazy(EyeSide::Right),
        _ => ScreeningClass::Inconclusive,
    })
}

/// High-noise eye and noise seed for each of `n` trials: directions
/// alternate starting with the left eye, seeds count up from `seed`.
pub fn screening_schedule(n: usize, seed: u64) -> Vec<(EyeSide, u64)> {
    (0..n)
        .map(|i| {
            let eye = if i % 2 == 0 { EyeSide::Left } else { EyeSide::Right };
            (eye, seed.wrapping_add(i as u64))
        })
        .collect()
}
