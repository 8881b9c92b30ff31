use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::image::Image;

use super::{EyeSide, StereoError, StereoPair};

pub const DEFAULT_REFRESH_HZ: u32 = 120;

/// Channel-pass red/cyan anaglyph: red from the left eye, green and blue from the right.
pub fn encode_anaglyph(pair: &StereoPair) -> Result<Image, StereoError> {
    let (l, r) = (pair.left(), pair.right());
    if l.dimensions() != r.dimensions() {
        return Err(StereoError::DimensionMismatch {
            left: l.dimensions(),
            right: r.dimensions(),
        });
    }
    let mut out = r.clone();
    for (dst, src) in out.pixels_mut().zip(l.pixels()) {
        dst[0] = src.r();
        dst[3] = 255;
    }
    Ok(out)
}

/// Splits an anaglyph back into grey-level eye views: the left eye from red,
/// the right eye from green and blue with red filled by their mean.
pub fn decode_anaglyph(img: &Image) -> StereoPair {
    let mut left = img.clone();
    let mut right = img.clone();
    for (l, r) in left.pixels_mut().zip(right.pixels_mut()) {
        let red = l[0];
        l.copy_from_slice(&[red, red, red, 255]);
        let mean = (r[1] as u16 + r[2] as u16).div_ceil(2) as u8;
        r[0] = mean;
        r[3] = 255;
    }
    StereoPair::new(left, right).expect("decoded eyes share dimensions")
}

/// Places the left eye in columns `[0, w)` and the right eye in `[w, 2w)`.
pub fn encode_side_by_side(pair: &StereoPair) -> Result<Image, StereoError> {
    let (l, r) = (pair.left(), pair.right());
    if l.dimensions() != r.dimensions() {
        return Err(StereoError::DimensionMismatch {
            left: l.dimensions(),
            right: r.dimensions(),
        });
    }
    let (w, h) = l.dimensions();
    let row = w as usize * 4;
    let mut buf = Vec::with_capacity(row * 2 * h as usize);
    for y in 0..h as usize {
        buf.extend_from_slice(&l.as_raw()[y * row..(y + 1) * row]);
        buf.extend_from_slice(&r.as_raw()[y * row..(y + 1) * row]);
    }
    Ok(Image::from_raw(w * 2, h, buf)?)
}

/// Inverse of [`encode_side_by_side`]. The width must be even.
pub fn split_side_by_side(img: &Image) -> Result<StereoPair, StereoError> {
    let (w2, h) = img.dimensions();
    if w2 % 2 != 0 {
        return Err(StereoError::DimensionMismatch {
            left: (w2 / 2, h),
            right: (w2 - w2 / 2, h),
        });
    }
    let w = w2 / 2;
    StereoPair::new(img.crop(0, 0, w, h)?, img.crop(w, 0, w, h)?)
}

/// Position of one frame in a frame-sequential stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FrameTag {
    pub index: u64,
    pub eye: EyeSide,
}

impl FrameTag {
    /// Left on even indices, right on odd.
    pub fn for_index(index: u64) -> FrameTag {
        let eye = if index.is_multiple_of(2) {
            EyeSide::Left
        } else {
            EyeSide::Right
        };
        FrameTag { index, eye }
    }

    pub fn file_name(&self) -> String {
        format!("frame_{:06}_{}.png", self.index, self.eye.letter())
    }

    pub fn parse_file_name(name: &str) -> Option<FrameTag> {
        let stem = name.strip_prefix("frame_")?.strip_suffix(".png")?;
        let (digits, eye) = stem.split_once('_')?;
        if digits.len() < 6 || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        let index = digits.parse().ok()?;
        let eye = match eye {
            "L" => EyeSide::Left,
            "R" => EyeSide::Right,
            _ => return None,
        };
        Some(FrameTag { index, eye })
    }
}

/// Alternating left/right frames at a fixed display refresh rate.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameStream {
    refresh_hz: u32,
    frames: Vec<(FrameTag, Image)>,
}

impl FrameStream {
    pub fn refresh_hz(&self) -> u32 {
        self.refresh_hz
    }

    /// Rate at which each eye receives a new image.
    pub fn per_eye_hz(&self) -> u32 {
        self.refresh_hz / 2
    }

    pub fn frames(&self) -> &[(FrameTag, Image)] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn into_frames(self) -> Vec<(FrameTag, Image)> {
        self.frames
    }

    /// Display time of frame `index` relative to the first frame.
    pub fn presentation_time(&self, index: u64) -> Duration {
        let nanos = index as u128 * 1_000_000_000 / self.refresh_hz as u128;
        Duration::from_nanos(nanos as u64)
    }

    /// Images shown to `eye`, in display order.
    pub fn eye_stream(&self, eye: EyeSide) -> Vec<&Image> {
        self.frames
            .iter()
            .filter(|(t, _)| t.eye == eye)
            .map(|(_, img)| img)
            .collect()
    }

    /// Frames shown to `eye` whose display time falls in second `[s, s + 1)`.
    pub fn eye_frames_in_second(&self, eye: EyeSide, s: u64) -> usize {
        let lo = s * self.refresh_hz as u64;
        let hi = lo + self.refresh_hz as u64;
        self.frames
            .iter()
            .filter(|(t, _)| t.eye == eye && t.index >= lo && t.index < hi)
            .count()
    }

    pub fn to_pairs(&self) -> Result<Vec<StereoPair>, StereoError> {
        self.frames
            .chunks(2)
            .map(|chunk| match chunk {
                [(a, l), (b, r)] if a.eye == EyeSide::Left && b.eye == EyeSide::Right => {
                    StereoPair::new(l.clone(), r.clone())
                }
                _ => Err(StereoError::BadSequence(
                    "frames do not form left/right pairs".into(),
                )),
            })
            .collect()
    }
}

/// Interleaves pairs as `L0 R0 L1 R1 ...` for active-shutter presentation.
pub fn encode_frame_sequential(
    pairs: &[StereoPair],
    refresh_hz: u32,
) -> Result<FrameStream, StereoError> {
    if refresh_hz == 0 || !refresh_hz.is_multiple_of(2) {
        return Err(StereoError::OddRefreshRate(refresh_hz));
    }
    let mut frames = Vec::with_capacity(pairs.len() * 2);
    for (k, pair) in pairs.iter().enumerate() {
        let base = 2 * k as u64;
        frames.push((FrameTag::for_index(base), pair.left().clone()));
        frames.push((FrameTag::for_index(base + 1), pair.right().clone()));
    }
    Ok(FrameStream { refresh_hz, frames })
}

/// Writes each frame as `frame_%06d_{L|R}.png` under `dir`.
pub fn write_frame_sequence(stream: &FrameStream, dir: &Path) -> Result<Vec<PathBuf>, StereoError> {
    std::fs::create_dir_all(dir)?;
    stream
        .frames
        .iter()
        .map(|(tag, img)| {
            let path = dir.join(tag.file_name());
            img.save_png(&path)?;
            Ok(path)
        })
        .collect()
}

/// Reads a directory written by [`write_frame_sequence`]. Indices must be
/// contiguous from zero with the left eye on even indices.
pub fn read_frame_sequence(dir: &Path, refresh_hz: u32) -> Result<FrameStream, StereoError> {
    if refresh_hz == 0 || !refresh_hz.is_multiple_of(2) {
        return Err(StereoError::OddRefreshRate(refresh_hz));
    }
    let mut tagged = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let name = entry?.file_name();
        let Some(name) = name.to_str() else { continue };
        if !name.starts_with("frame_") {
            continue;
        }
        let tag = FrameTag::parse_file_name(name)
            .ok_or_else(|| StereoError::BadFrameName(name.to_string()))?;
        tagged.push(tag);
    }
    tagged.sort_by_key(|t| t.index);
    let mut frames = Vec::with_capacity(tagged.len());
    for (i, tag) in tagged.into_iter().enumerate() {
        if tag != FrameTag::for_index(i as u64) {
            return Err(StereoError::BadSequence(format!(
                "expected {}, found {}",
                FrameTag::for_index(i as u64).file_name(),
                tag.file_name()
            )));
        }
        frames.push((tag, Image::load_png(dir.join(tag.file_name()))?));
    }
    Ok(FrameStream { refresh_hz, frames })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::Rgba;

    fn solid(c: Rgba) -> Image {
        Image::filled(3, 2, c).unwrap()
    }

    #[test]
    fn anaglyph_red_plus_cyan_is_white() {
        let pair = StereoPair::new(solid(Rgba::rgb(255, 0, 0)), solid(Rgba::rgb(0, 255, 255))).unwrap();
        let out = encode_anaglyph(&pair).unwrap();
        assert!(out.pixels().all(|p| p == Rgba::WHITE));
    }

    #[test]
    fn anaglyph_of_equal_eyes_is_opaque_copy() {
        let img = Image::from_fn(3, 3, |x, y| Rgba([x as u8 * 9, y as u8 * 7, 3, 40])).unwrap();
        let out = encode_anaglyph(&StereoPair::new(img.clone(), img.clone()).unwrap()).unwrap();
        for (o, i) in out.pixels().zip(img.pixels()) {
            assert_eq!(o, Rgba([i.r(), i.g(), i.b(), 255]));
        }
    }

    #[test]
    fn decode_anaglyph_extremes() {
        let white = decode_anaglyph(&solid(Rgba::WHITE));
        assert!(white.left().pixels().all(|p| p == Rgba::WHITE));
        assert!(white.right().pixels().all(|p| p == Rgba::WHITE));
        let black = decode_anaglyph(&solid(Rgba::BLACK));
        assert!(black.left().pixels().all(|p| p == Rgba::BLACK));
        assert!(black.right().pixels().all(|p| p == Rgba::BLACK));
        let mixed = decode_anaglyph(&solid(Rgba::rgb(9, 10, 11)));
        assert_eq!(mixed.right().get(0, 0), Rgba::rgb(11, 10, 11));
    }

    #[test]
    fn side_by_side_1x1() {
        let pair = StereoPair::new(
            Image::filled(1, 1, Rgba::WHITE).unwrap(),
            Image::filled(1, 1, Rgba::BLACK).unwrap(),
        )
        .unwrap();
        let out = encode_side_by_side(&pair).unwrap();
        assert_eq!(out.dimensions(), (2, 1));
        assert_eq!(out.get(0, 0), Rgba::WHITE);
        assert_eq!(out.get(1, 0), Rgba::BLACK);
    }

    #[test]
    fn side_by_side_equal_eyes_tiles() {
        let img = Image::from_fn(2, 2, |x, y| Rgba::rgb(x as u8, y as u8, 5)).unwrap();
        let out = encode_side_by_side(&StereoPair::new(img.clone(), img.clone()).unwrap()).unwrap();
        for y in 0..2 {
            for x in 0..4 {
                assert_eq!(out.get(x, y), img.get(x % 2, y));
            }
        }
        assert!(split_side_by_side(&Image::filled(3, 1, Rgba::BLACK).unwrap()).is_err());
    }

    #[test]
    fn frame_sequential_single_pair() {
        let pair = StereoPair::new(solid(Rgba::WHITE), solid(Rgba::BLACK)).unwrap();
        let s = encode_frame_sequential(&[pair], 120).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.frames()[0].0, FrameTag { index: 0, eye: EyeSide::Left });
        assert_eq!(s.frames()[1].0, FrameTag { index: 1, eye: EyeSide::Right });
        assert_eq!(s.per_eye_hz(), 60);
        assert_eq!(s.presentation_time(1), Duration::from_nanos(8_333_333));
    }

    #[test]
    fn odd_refresh_rejected() {
        assert!(matches!(encode_frame_sequential(&[], 59), Err(StereoError::OddRefreshRate(59))));
        assert!(matches!(encode_frame_sequential(&[], 0), Err(StereoError::OddRefreshRate(0))));
    }

    #[test]
    fn frame_names() {
        let t = FrameTag::for_index(13);
        assert_eq!(t.file_name(), "frame_000013_R.png");
        assert_eq!(FrameTag::parse_file_name(&t.file_name()), Some(t));
        assert_eq!(FrameTag::parse_file_name("frame_13_R.png"), None);
        assert_eq!(FrameTag::parse_file_name("frame_000013_X.png"), None);
    }
}
