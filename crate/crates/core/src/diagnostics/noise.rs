use crate::image::{Image, Rgba};
use crate::prng::SplitMix64;
use crate::stereo::{EyeSide, StereoPair};

use super::DiagnosticsError;

pub const DEFAULT_DENSITY_HIGH: f64 = 0.6;
pub const DEFAULT_DENSITY_LOW: f64 = 0.05;

/// The same base image shown to both eyes under unequal salt-and-pepper noise.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseStimulus {
    pub base: Image,
    pub density_high: f64,
    pub density_low: f64,
    pub high_eye: EyeSide,
    pub seed: u64,
    pub pair: StereoPair,
}

/// Each pixel independently becomes black with probability `d/2`, white with
/// probability `d/2`, and keeps its base value otherwise. One draw per pixel:
/// the high-noise eye consumes the first `w*h` draws (row-major), the
/// low-noise eye the next `w*h`.
pub fn make_noise_stimulus(
    base: &Image,
    density_high: f64,
    density_low: f64,
    high_eye: EyeSide,
    seed: u64,
) -> Result<NoiseStimulus, DiagnosticsError> {
    if !(0.0 <= density_low && density_low <= density_high && density_high <= 1.0) {
        return Err(DiagnosticsError::DensityOrderViolation {
            low: density_low,
            high: density_high,
        });
    }
    let mut rng = SplitMix64::new(seed);
    let high = salt_and_pepper(base, density_high, &mut rng);
    let low = salt_and_pepper(base, density_low, &mut rng);
    let pair = match high_eye {
        EyeSide::Left => StereoPair::new(high, low)?,
        EyeSide::Right => StereoPair::new(low, high)?,
    };
    Ok(NoiseStimulus {
        base: base.clone(),
        density_high,
        density_low,
        high_eye,
        seed,
        pair,
    })
}

fn salt_and_pepper(base: &Image, density: f64, rng: &mut SplitMix64) -> Image {
    let half = density / 2.0;
    let mut out = base.clone();
    for px in out.pixels_mut() {
        let u = rng.next_f64();
        if u < half {
            px.copy_from_slice(&Rgba::BLACK.0);
        } else if u < density {
            px.copy_from_slice(&Rgba::WHITE.0);
        }
    }
    out
}
