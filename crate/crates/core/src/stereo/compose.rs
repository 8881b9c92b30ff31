use crate::image::{round_half_up_u8, Image, Rgba};

use super::{ComposePolicy, EyeAssignment, SceneLayer, StereoError, StereoPair};

/// Source-over blend of one channel, rounded half up.
#[inline]
fn blend(src: u8, dst: u8, alpha: u8) -> u8 {
    let a = alpha as u32;
    let num = src as u32 * a + dst as u32 * (255 - a);
    ((2 * num + 255) / 510) as u8
}

/// Paints `sprite` with its top-left corner at `pos`, clipping to the canvas.
/// Fully transparent sprite pixels are skipped and the canvas alpha stays 255.
/// Returns whether any pixel was touched.
pub fn paint_sprite(canvas: &mut Image, sprite: &Image, pos: (i32, i32)) -> bool {
    let (cw, ch) = (canvas.width() as i64, canvas.height() as i64);
    let (x0, y0) = (pos.0 as i64, pos.1 as i64);
    let sx_start = (-x0).max(0);
    let sy_start = (-y0).max(0);
    let sx_end = (cw - x0).min(sprite.width() as i64);
    let sy_end = (ch - y0).min(sprite.height() as i64);
    let mut touched = false;
    for sy in sy_start..sy_end {
        for sx in sx_start..sx_end {
            let src = sprite.get(sx as u32, sy as u32);
            if src.a() == 0 {
                continue;
            }
            let (cx, cy) = ((x0 + sx) as u32, (y0 + sy) as u32);
            let out = if src.a() == 255 {
                Rgba([src.r(), src.g(), src.b(), 255])
            } else {
                let dst = canvas.get(cx, cy);
                Rgba([
                    blend(src.r(), dst.r(), src.a()),
                    blend(src.g(), dst.g(), src.a()),
                    blend(src.b(), dst.b(), src.a()),
                    255,
                ])
            };
            canvas.put(cx, cy, out);
            touched = true;
        }
    }
    touched
}

/// Composes eye-assigned layers into a stereo pair.
///
/// The lazy canvas receives `LazyOnly` and `Both` layers, the fellow canvas
/// `FellowOnly` and `Both` layers, each painted in ascending `z`. The fellow
/// canvas is then attenuated. The fusion gate is evaluated on the
/// un-attenuated canvases and only for frames where layers of more than one
/// assignment actually reach the frame.
pub fn compose(
    layers: &[SceneLayer],
    policy: &ComposePolicy,
    frame_size: (u32, u32),
) -> Result<StereoPair, StereoError> {
    let (w, h) = frame_size;
    if w == 0 || h == 0 {
        return Err(StereoError::EmptyFrameSize(w, h));
    }
    policy.validate()?;

    let mut lazy = Image::filled(w, h, policy.clear_color)?;
    let mut fellow = lazy.clone();

    let mut order: Vec<&SceneLayer> = layers.iter().collect();
    order.sort_by_key(|l| l.z);

    let mut seen = [false; 3];
    for layer in order {
        let mut touched = false;
        if layer.assignment.shows_lazy() {
            touched |= paint_sprite(&mut lazy, &layer.sprite, layer.position);
        }
        if layer.assignment.shows_fellow() {
            touched |= paint_sprite(&mut fellow, &layer.sprite, layer.position);
        }
        if touched {
            seen[assignment_slot(layer.assignment)] = true;
        }
    }

    let mixed = seen.iter().filter(|&&s| s).count() > 1;
    if mixed {
        let pair = StereoPair::new(lazy, fellow)?;
        match shared_content_ratio(&pair, policy.clear_color) {
            Ok(ratio) if ratio < policy.min_shared_ratio => {
                return Err(StereoError::SharedContentTooLow {
                    ratio,
                    min: policy.min_shared_ratio,
                });
            }
            Ok(_) | Err(StereoError::EmptyFrame) => {}
            Err(e) => return Err(e),
        }
        let (l, f) = pair.into_parts();
        lazy = l;
        fellow = f;
    }

    if policy.fellow_attenuation < 1.0 {
        fellow = attenuate(&fellow, policy.fellow_attenuation)?;
    }
    StereoPair::from_eyes(lazy, fellow, policy.lazy_eye)
}

fn assignment_slot(a: EyeAssignment) -> usize {
    match a {
        EyeAssignment::LazyOnly => 0,
        EyeAssignment::FellowOnly => 1,
        EyeAssignment::Both => 2,
    }
}

/// Fraction of non-clear pixels that are identical in both eyes.
pub fn shared_content_ratio(pair: &StereoPair, clear: Rgba) -> Result<f64, StereoError> {
    let mut shared = 0usize;
    let mut occupied = 0usize;
    for (l, r) in pair.left().pixels().zip(pair.right().pixels()) {
        let l_set = l != clear;
        if l_set || r != clear {
            occupied += 1;
            if l_set && l == r {
                shared += 1;
            }
        }
    }
    if occupied == 0 {
        return Err(StereoError::EmptyFrame);
    }
    Ok(shared as f64 / occupied as f64)
}

/// Scales RGB by `factor`, rounding half up. Alpha is unchanged.
pub fn attenuate(img: &Image, factor: f64) -> Result<Image, StereoError> {
    if !(0.0..=1.0).contains(&factor) {
        return Err(StereoError::FactorOutOfRange(factor));
    }
    let mut out = img.clone();
    if factor == 1.0 {
        return Ok(out);
    }
    for px in out.pixels_mut() {
        for c in &mut px[..3] {
            *c = round_half_up_u8(*c as f64 * factor);
        }
    }
    Ok(out)
}

/// Per-pixel union: `top` wherever it differs from `clear`, otherwise `bottom`.
pub fn overlay(top: &Image, bottom: &Image, clear: Rgba) -> Result<Image, StereoError> {
    if top.dimensions() != bottom.dimensions() {
        return Err(StereoError::DimensionMismatch {
            left: top.dimensions(),
            right: bottom.dimensions(),
        });
    }
    let mut out = bottom.clone();
    for y in 0..top.height() {
        for x in 0..top.width() {
            let p = top.get(x, y);
            if p != clear {
                out.put(x, y, p);
            }
        }
    }
    Ok(out)
}
