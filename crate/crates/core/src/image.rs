//! RGBA8 raster images and PNG I/O.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// One RGBA8 pixel.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rgba(pub [u8; 4]);

impl Rgba {
    pub const BLACK: Rgba = Rgba([0, 0, 0, 255]);
    pub const WHITE: Rgba = Rgba([255, 255, 255, 255]);
    pub const TRANSPARENT: Rgba = Rgba([0, 0, 0, 0]);

    pub const fn rgb(r: u8, g: u8, b: u8) -> Self {
        Rgba([r, g, b, 255])
    }

    pub const fn r(self) -> u8 {
        self.0[0]
    }
    pub const fn g(self) -> u8 {
        self.0[1]
    }
    pub const fn b(self) -> u8 {
        self.0[2]
    }
    pub const fn a(self) -> u8 {
        self.0[3]
    }
}

impl fmt::Display for Rgba {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [r, g, b, a] = self.0;
        write!(f, "#{r:02x}{g:02x}{b:02x}{a:02x}")
    }
}

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("image dimensions must be positive, got {width}x{height}")]
    ZeroSize { width: u32, height: u32 },
    #[error("pixel buffer has {actual} bytes, expected {expected}")]
    BufferLength { expected: usize, actual: usize },
    #[error("png: {0}")]
    Png(#[from] image::ImageError),
}

/// Row-major RGBA8 raster. Width and height are always positive.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Image {
    width: u32,
    height: u32,
    pixels: Vec<u8>,
}

impl fmt::Debug for Image {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Image")
            .field("width", &self.width)
            .field("height", &self.height)
            .finish_non_exhaustive()
    }
}

impl Image {
    /// A `width`×`height` canvas filled with `fill`.
    pub fn filled(width: u32, height: u32, fill: Rgba) -> Result<Self, ImageError> {
        if width == 0 || height == 0 {
            return Err(ImageError::ZeroSize { width, height });
        }
        let n = width as usize * height as usize;
        let mut pixels = Vec::with_capacity(n * 4);
        for _ in 0..n {
            pixels.extend_from_slice(&fill.0);
        }
        Ok(Image {
            width,
            height,
            pixels,
        })
    }

    pub fn from_raw(width: u32, height: u32, pixels: Vec<u8>) -> Result<Self, ImageError> {
        if width == 0 || height == 0 {
            return Err(ImageError::ZeroSize { width, height });
        }
        let expected = width as usize * height as usize * 4;
        if pixels.len() != expected {
            return Err(ImageError::BufferLength {
                expected,
                actual: pixels.len(),
            });
        }
        Ok(Image {
            width,
            height,
            pixels,
        })
    }

    /// Builds an image by evaluating `f(x, y)` for every pixel.
    pub fn from_fn(
        width: u32,
        height: u32,
        mut f: impl FnMut(u32, u32) -> Rgba,
    ) -> Result<Self, ImageError> {
        let mut img = Image::filled(width, height, Rgba::TRANSPARENT)?;
        for y in 0..height {
            for x in 0..width {
                img.put(x, y, f(x, y));
            }
        }
        Ok(img)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dimensions(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }

    pub fn as_raw(&self) -> &[u8] {
        &self.pixels
    }

    pub fn into_raw(self) -> Vec<u8> {
        self.pixels
    }

    #[inline]
    fn offset(&self, x: u32, y: u32) -> usize {
        debug_assert!(x < self.width && y < self.height);
        (y as usize * self.width as usize + x as usize) * 4
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> Rgba {
        let o = self.offset(x, y);
        Rgba([
            self.pixels[o],
            self.pixels[o + 1],
            self.pixels[o + 2],
            self.pixels[o + 3],
        ])
    }

    #[inline]
    pub fn put(&mut self, x: u32, y: u32, px: Rgba) {
        let o = self.offset(x, y);
        self.pixels[o..o + 4].copy_from_slice(&px.0);
    }

    /// Iterates pixels in row-major order.
    pub fn pixels(&self) -> impl Iterator<Item = Rgba> + '_ {
        self.pixels
            .chunks_exact(4)
            .map(|c| Rgba([c[0], c[1], c[2], c[3]]))
    }

    pub fn pixels_mut(&mut self) -> impl Iterator<Item = &mut [u8]> + '_ {
        self.pixels.chunks_exact_mut(4)
    }

    /// Number of pixels exactly equal to `color`.
    pub fn count_color(&self, color: Rgba) -> usize {
        self.pixels().filter(|&p| p == color).count()
    }

    /// Copies the `w`×`h` rectangle at (`x`, `y`). The rectangle must lie inside the image.
    pub fn crop(&self, x: u32, y: u32, w: u32, h: u32) -> Result<Image, ImageError> {
        assert!(
            x + w <= self.width && y + h <= self.height,
            "crop rectangle outside image"
        );
        let mut out = Image::filled(w, h, Rgba::TRANSPARENT)?;
        for row in 0..h {
            let src = self.offset(x, y + row);
            let dst = out.offset(0, row);
            let len = w as usize * 4;
            out.pixels[dst..dst + len].copy_from_slice(&self.pixels[src..src + len]);
        }
        Ok(out)
    }

    pub fn decode_png(bytes: &[u8]) -> Result<Image, ImageError> {
        let decoded = image::load_from_memory_with_format(bytes, image::ImageFormat::Png)?;
        Self::from_dynamic(decoded)
    }

    pub fn load_png(path: impl AsRef<Path>) -> Result<Image, ImageError> {
        let decoded = image::ImageReader::open(path.as_ref())
            .map_err(image::ImageError::IoError)?
            .with_guessed_format()
            .map_err(image::ImageError::IoError)?
            .decode()?;
        Self::from_dynamic(decoded)
    }

    fn from_dynamic(decoded: image::DynamicImage) -> Result<Image, ImageError> {
        let rgba = decoded.into_rgba8();
        let (w, h) = rgba.dimensions();
        Image::from_raw(w, h, rgba.into_raw())
    }

    /// Non-interlaced RGBA8 PNG.
    pub fn encode_png(&self) -> Result<Vec<u8>, ImageError> {
        let mut out = Vec::new();
        let encoder = image::codecs::png::PngEncoder::new(&mut out);
        image::ImageEncoder::write_image(
            encoder,
            &self.pixels,
            self.width,
            self.height,
            image::ExtendedColorType::Rgba8,
        )?;
        Ok(out)
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<(), ImageError> {
        let bytes = self.encode_png()?;
        std::fs::write(path.as_ref(), bytes)
            .map_err(|e| ImageError::Png(image::ImageError::IoError(e)))
    }
}

/// Rounds half up and saturates to the u8 range.
#[inline]
pub(crate) fn round_half_up_u8(x: f64) -> u8 {
    (x + 0.5).floor().clamp(0.0, 255.0) as u8
}
