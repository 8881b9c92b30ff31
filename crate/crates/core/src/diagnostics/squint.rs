use serde::{Deserialize, Serialize};

use super::DiagnosticsError;

/// Angular deviation derived from an on-screen alignment offset.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SquintMeasurement {
    /// Movable circle minus fixed circle; +x is rightward on screen.
    pub offset_px: (i32, i32),
    pub pixel_pitch_mm: f64,
    pub viewing_distance_mm: f64,
    /// Unsigned total deviation.
    pub angle_deg: f64,
    pub prism_diopters: f64,
    /// Signed horizontal component.
    pub angle_x_deg: f64,
    /// Signed vertical component.
    pub angle_y_deg: f64,
}

fn angle_for(mm: f64, distance_mm: f64) -> f64 {
    (mm / distance_mm).atan().to_degrees()
}

pub fn squint_offset_to_angle(
    offset_px: (i32, i32),
    pixel_pitch_mm: f64,
    viewing_distance_mm: f64,
) -> Result<SquintMeasurement, DiagnosticsError> {
    // Also rejects NaN.
    if !(pixel_pitch_mm > 0.0 && viewing_distance_mm > 0.0)
        || !pixel_pitch_mm.is_finite()
        || !viewing_distance_mm.is_finite()
    {
        return Err(DiagnosticsError::NonPositiveGeometry {
            pitch_mm: pixel_pitch_mm,
            distance_mm: viewing_distance_mm,
        });
    }
    let (dx, dy) = (offset_px.0 as f64, offset_px.1 as f64);
    let norm_mm = dx.hypot(dy) * pixel_pitch_mm;
    let angle_deg = angle_for(norm_mm, viewing_distance_mm);
    Ok(SquintMeasurement {
        offset_px,
        pixel_pitch_mm,
        viewing_distance_mm,
        angle_deg,
        prism_diopters: 100.0 * angle_deg.to_radians().tan(),
        angle_x_deg: angle_for(dx * pixel_pitch_mm, viewing_distance_mm),
        angle_y_deg: angle_for(dy * pixel_pitch_mm, viewing_distance_mm),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_offset() {
        let m = squint_offset_to_angle((0, 0), 0.25, 500.0).unwrap();
        assert_eq!(m.angle_deg, 0.0);
        assert_eq!(m.prism_diopters, 0.0);
    }

    #[test]
    fn geometry_must_be_positive() {
        for (p, d) in [(0.0, 500.0), (0.25, 0.0), (-1.0, 10.0), (f64::NAN, 1.0)] {
            assert!(matches!(
                squint_offset_to_angle((1, 0), p, d),
                Err(DiagnosticsError::NonPositiveGeometry { .. })
            ));
        }
    }

    #[test]
    fn components_are_signed() {
        let m = squint_offset_to_angle((-10, 4), 0.25, 500.0).unwrap();
        assert!(m.angle_x_deg < 0.0 && m.angle_y_deg > 0.0 && m.angle_deg > 0.0);
    }
}
