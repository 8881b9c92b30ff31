use serde::{Deserialize, Serialize};

use crate::image::{Image, Rgba};
use crate::stereo::{ComposePolicy, StereoPair};

use super::DiagnosticsError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitAxis {
    /// Left columns to one eye, right columns to the other.
    Vertical,
    /// Top rows to one eye, bottom rows to the other.
    Horizontal,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FusionStimulus {
    pub shape: Image,
    pub split_axis: SplitAxis,
    pub pair: StereoPair,
}

/// Splits `shape` into two halves, one per eye, each kept at its original
/// coordinates on a clear canvas. The first half (left or top) goes to the
/// lazy eye. Overlaying the two eyes reconstructs `shape`.
pub fn make_fusion_stimulus(
    shape: &Image,
    axis: SplitAxis,
    policy: &ComposePolicy,
) -> Result<FusionStimulus, DiagnosticsError> {
    let (w, h) = shape.dimensions();
    let degenerate = match axis {
        SplitAxis::Vertical => w < 2,
        SplitAxis::Horizontal => h < 2,
    };
    if degenerate {
        return Err(DiagnosticsError::DegenerateShape {
            width: w,
            height: h,
            axis,
        });
    }
    let mut first = Image::filled(w, h, policy.clear_color)?;
    let mut second = first.clone();
    for y in 0..h {
        for x in 0..w {
            let in_first = match axis {
                SplitAxis::Vertical => x < w / 2,
                SplitAxis::Horizontal => y < h / 2,
            };
            let target = if in_first { &mut first } else { &mut second };
            target.put(x, y, shape.get(x, y));
        }
    }
    let pair = StereoPair::from_eyes(first, second, policy.lazy_eye)?;
    Ok(FusionStimulus {
        shape: shape.clone(),
        split_axis: axis,
        pair,
    })
}

/// Opaque `w`×`h` image: a `thickness`-pixel outline in `stroke` over `fill`.
pub fn box_outline(w: u32, h: u32, thickness: u32, stroke: Rgba, fill: Rgba) -> Result<Image, DiagnosticsError> {
    Ok(Image::from_fn(w, h, |x, y| {
        let edge = x < thickness || y < thickness || x + thickness >= w || y + thickness >= h;
        if edge {
            stroke
        } else {
            fill
        }
    })?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stereo::{overlay, EyeSide};

    #[test]
    fn two_pixel_vertical_split() {
        let a = Rgba::rgb(10, 0, 0);
        let b = Rgba::rgb(0, 20, 0);
        let shape = Image::from_fn(2, 1, |x, _| if x == 0 { a } else { b }).unwrap();
        let policy = ComposePolicy::with_lazy_eye(EyeSide::Left);
        let s = make_fusion_stimulus(&shape, SplitAxis::Vertical, &policy).unwrap();
        assert_eq!(s.pair.left().get(0, 0), a);
        assert_eq!(s.pair.left().get(1, 0), Rgba::BLACK);
        assert_eq!(s.pair.right().get(0, 0), Rgba::BLACK);
        assert_eq!(s.pair.right().get(1, 0), b);
    }

    #[test]
    fn degenerate_shapes() {
        let col = Image::filled(1, 5, Rgba::WHITE).unwrap();
        let p = ComposePolicy::default();
        assert!(matches!(
            make_fusion_stimulus(&col, SplitAxis::Vertical, &p),
            Err(DiagnosticsError::DegenerateShape { .. })
        ));
        make_fusion_stimulus(&col, SplitAxis::Horizontal, &p).unwrap();
        let row = Image::filled(5, 1, Rgba::WHITE).unwrap();
        assert!(make_fusion_stimulus(&row, SplitAxis::Horizontal, &p).is_err());
    }

    #[test]
    fn box_splits_into_half_boxes() {
        let shape = box_outline(40, 30, 2, Rgba::WHITE, Rgba::BLACK).unwrap();
        let policy = ComposePolicy::with_lazy_eye(EyeSide::Right);
        let s = make_fusion_stimulus(&shape, SplitAxis::Vertical, &policy).unwrap();
        let lazy = s.pair.eye(EyeSide::Right);
        let fellow = s.pair.eye(EyeSide::Left);
        // Each eye sees exactly half of the outline: its own vertical edge plus
        // half of the top and bottom edges.
        let total = shape.count_color(Rgba::WHITE);
        assert_eq!(lazy.count_color(Rgba::WHITE) + fellow.count_color(Rgba::WHITE), total);
        assert_eq!(lazy.count_color(Rgba::WHITE), total / 2);
        assert!((0..30).all(|y| lazy.get(0, y) == Rgba::WHITE && fellow.get(0, y) == Rgba::BLACK));
        assert!((0..30).all(|y| fellow.get(39, y) == Rgba::WHITE && lazy.get(39, y) == Rgba::BLACK));
        assert_eq!(overlay(lazy, fellow, Rgba::BLACK).unwrap(), shape);
    }
}
