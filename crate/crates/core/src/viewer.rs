//! Passive image and clip viewing.
//!
//! The lazy eye receives each whole frame while the fellow eye only receives
//! the parts outside an operator-drawn interest mask.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::image::{Image, ImageError, Rgba};
use crate::stereo::{compose, ComposePolicy, EyeAssignment, SceneLayer, StereoError, StereoPair};

#[derive(Debug, Error)]
pub enum ViewerError {
    #[error("mask is {mask:?} but frame is {frame:?}")]
    DimensionMismatch { mask: (u32, u32), frame: (u32, u32) },
    #[error("frame {index} could not be loaded from {path}: {source}")]
    FrameLoadError {
        index: usize,
        path: PathBuf,
        #[source]
        source: ImageError,
    },
    #[error("clip directory {0} contains no frame_NNNNNN.png files")]
    EmptyClip(PathBuf),
    #[error("mask: {0}")]
    Mask(#[source] ImageError),
    #[error("plan.json: {0}")]
    PlanFile(#[from] serde_json::Error),
    #[error(transparent)]
    Stereo(#[from] StereoError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// One bit per pixel, set where the frame content is interesting.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct InterestMask {
    width: u32,
    height: u32,
    words: Vec<u64>,
}

impl InterestMask {
    pub fn new(width: u32, height: u32) -> Self {
        let n = width as usize * height as usize;
        InterestMask {
            width,
            height,
            words: vec![0; n.div_ceil(64)],
        }
    }

    pub fn from_fn(width: u32, height: u32, f: impl Fn(u32, u32) -> bool) -> Self {
        let mut m = InterestMask::new(width, height);
        for y in 0..height {
            for x in 0..width {
                m.set(x, y, f(x, y));
            }
        }
        m
    }

    /// White-ish opaque pixels (mean RGB >= 128) are interesting.
    pub fn from_image(img: &Image) -> Self {
        InterestMask::from_fn(img.width(), img.height(), |x, y| {
            let p = img.get(x, y);
            p.a() > 0 && (p.r() as u16 + p.g() as u16 + p.b() as u16) >= 3 * 128
        })
    }

    pub fn load_png(path: &Path) -> Result<Self, ViewerError> {
        Image::load_png(path)
            .map(|img| InterestMask::from_image(&img))
            .map_err(ViewerError::Mask)
    }

    pub fn to_image(&self) -> Image {
        Image::from_fn(self.width, self.height, |x, y| {
            if self.get(x, y) {
                Rgba::WHITE
            } else {
                Rgba::BLACK
            }
        })
        .expect("mask dimensions are positive")
    }

    pub fn dimensions(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    fn bit(&self, x: u32, y: u32) -> usize {
        y as usize * self.width as usize + x as usize
    }

    pub fn get(&self, x: u32, y: u32) -> bool {
        let i = self.bit(x, y);
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn set(&mut self, x: u32, y: u32, value: bool) {
        let i = self.bit(x, y);
        if value {
            self.words[i / 64] |= 1 << (i % 64);
        } else {
            self.words[i / 64] &= !(1 << (i % 64));
        }
    }

    pub fn count_set(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// All-zero or all-one masks split nothing between the eyes.
    pub fn is_degenerate(&self) -> bool {
        let set = self.count_set();
        set == 0 || set == self.width as usize * self.height as usize
    }
}

/// Background (mask 0) as a `Both` layer at z=0 and the interesting pixels
/// (mask 1) as a `LazyOnly` layer at z=1. Pixels left out of a layer are
/// transparent, so they show the clear canvas.
pub fn viewing_layers(frame: &Image, mask: &InterestMask) -> Result<Vec<SceneLayer>, ViewerError> {
    if frame.dimensions() != mask.dimensions() {
        return Err(ViewerError::DimensionMismatch {
            mask: mask.dimensions(),
            frame: frame.dimensions(),
        });
    }
    let mut background = frame.clone();
    let mut interesting = frame.clone();
    for y in 0..frame.height() {
        for x in 0..frame.width() {
            if mask.get(x, y) {
                background.put(x, y, Rgba::TRANSPARENT);
            } else {
                interesting.put(x, y, Rgba::TRANSPARENT);
            }
        }
    }
    Ok(vec![
        SceneLayer::new("background", background, (0, 0), EyeAssignment::Both, 0),
        SceneLayer::new("interest", interesting, (0, 0), EyeAssignment::LazyOnly, 1),
    ])
}

/// Where a plan's frames come from.
#[derive(Clone, Debug, PartialEq)]
pub enum ClipSource {
    Frames(Vec<Image>),
    /// Paths in playback order.
    Files(Vec<PathBuf>),
}

impl ClipSource {
    pub fn len(&self) -> usize {
        match self {
            ClipSource::Frames(f) => f.len(),
            ClipSource::Files(f) => f.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn frame(&self, index: usize) -> Result<Image, ViewerError> {
        match self {
            ClipSource::Frames(f) => Ok(f[index].clone()),
            ClipSource::Files(paths) => {
                Image::load_png(&paths[index]).map_err(|source| ViewerError::FrameLoadError {
                    index,
                    path: paths[index].clone(),
                    source,
                })
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ViewingPlan {
    pub source: ClipSource,
    pub mask: InterestMask,
    pub policy: ComposePolicy,
}

/// Contents of `plan.json`: compose policy fields plus an optional mask file name.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PlanFile {
    #[serde(flatten)]
    pub policy: ComposePolicy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask: Option<String>,
}

pub const DEFAULT_MASK_FILE: &str = "mask.png";

/// Sorted `frame_NNNNNN.png` files of a clip directory.
pub fn list_clip_frames(dir: &Path) -> Result<Vec<PathBuf>, ViewerError> {
    let mut frames: Vec<(u64, PathBuf)> = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        let Some(name) = path.file_name().and_then(|n| n.to_str()) else {
            continue;
        };
        let Some(digits) = name.strip_prefix("frame_").and_then(|s| s.strip_suffix(".png")) else {
            continue;
        };
        if digits.len() >= 6 && digits.bytes().all(|b| b.is_ascii_digit()) {
            frames.push((digits.parse().unwrap_or(u64::MAX), path));
        }
    }
    frames.sort();
    Ok(frames.into_iter().map(|(_, p)| p).collect())
}

impl ViewingPlan {
    /// Loads `frame_%06d.png`, the mask and `plan.json` from a clip directory.
    /// `mask_override` replaces the mask file named in `plan.json`.
    pub fn load_dir(dir: &Path, mask_override: Option<&str>) -> Result<Self, ViewerError> {
        let plan_path = dir.join("plan.json");
        let plan: PlanFile = if plan_path.exists() {
            serde_json::from_slice(&std::fs::read(&plan_path)?)?
        } else {
            PlanFile::default()
        };
        plan.policy.validate()?;
        let frames = list_clip_frames(dir)?;
        if frames.is_empty() {
            return Err(ViewerError::EmptyClip(dir.to_path_buf()));
        }
        let mask_name = mask_override
            .or(plan.mask.as_deref())
            .unwrap_or(DEFAULT_MASK_FILE);
        let mask = InterestMask::load_png(&dir.join(mask_name))?;
        Ok(ViewingPlan {
            source: ClipSource::Files(frames),
            mask,
            policy: plan.policy,
        })
    }

    pub fn render_frame(&self, index: usize) -> Result<StereoPair, ViewerError> {
        let frame = self.source.frame(index)?;
        let layers = viewing_layers(&frame, &self.mask)?;
        Ok(compose(&layers, &self.policy, frame.dimensions())?)
    }
}

/// Renders every frame of the plan, in order.
pub fn play_plan(plan: &ViewingPlan) -> Result<Vec<StereoPair>, ViewerError> {
    (0..plan.source.len()).map(|i| plan.render_frame(i)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stereo::EyeSide;

    fn frame() -> Image {
        Image::from_fn(6, 4, |x, y| Rgba::rgb(10 + x as u8, 20 + y as u8, 30)).unwrap()
    }

    fn policy() -> ComposePolicy {
        ComposePolicy::with_lazy_eye(EyeSide::Left)
    }

    fn play_one(mask: &InterestMask) -> StereoPair {
        let layers = viewing_layers(&frame(), mask).unwrap();
        compose(&layers, &policy(), (6, 4)).unwrap()
    }

    #[test]
    fn all_zero_mask_shows_everything_to_both() {
        let pair = play_one(&InterestMask::new(6, 4));
        assert_eq!(pair.left(), &frame());
        assert_eq!(pair.right(), &frame());
    }

    #[test]
    fn all_one_mask_blanks_fellow() {
        let mask = InterestMask::from_fn(6, 4, |_, _| true);
        assert!(mask.is_degenerate());
        let pair = play_one(&mask);
        assert_eq!(pair.left(), &frame());
        assert!(pair.right().pixels().all(|p| p == Rgba::BLACK));
    }

    #[test]
    fn mask_bits_round_trip_through_png_image() {
        let mask = InterestMask::from_fn(13, 7, |x, y| (x * 3 + y) % 5 == 0);
        assert_eq!(InterestMask::from_image(&mask.to_image()), mask);
        assert!(!mask.is_degenerate());
    }

    #[test]
    fn dimension_mismatch() {
        assert!(matches!(
            viewing_layers(&frame(), &InterestMask::new(5, 4)),
            Err(ViewerError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn layer_shape() {
        let mask = InterestMask::from_fn(6, 4, |x, _| x > 3);
        let layers = viewing_layers(&frame(), &mask).unwrap();
        assert_eq!(layers.len(), 2);
        assert_eq!((layers[0].assignment, layers[0].z), (EyeAssignment::Both, 0));
        assert_eq!((layers[1].assignment, layers[1].z), (EyeAssignment::LazyOnly, 1));
    }
}
