use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use image::codecs::gif::GifDecoder;
use image::codecs::png::PngDecoder;
use image::imageops::FilterType;
use image::{AnimationDecoder, ImageFormat, ImageReader, RgbImage};

/// Side length of every normalized image.
pub const IMAGE_SIDE: usize = 256;
const BYTES: usize = IMAGE_SIDE * IMAGE_SIDE * 3;

/// A 256x256 RGB8 image, row-major.
#[derive(Clone, PartialEq, Eq)]
pub struct NormalizedImage {
    pixels: Vec<u8>,
}

impl std::fmt::Debug for NormalizedImage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "NormalizedImage({}x{})", IMAGE_SIDE, IMAGE_SIDE)
    }
}

impl NormalizedImage {
    /// Wraps an exact 256x256x3 buffer.
    pub fn from_raw(pixels: Vec<u8>) -> Option<Self> {
        (pixels.len() == BYTES).then_some(Self { pixels })
    }

    /// Builds an image by evaluating `f(x, y)` for every pixel.
    pub fn from_fn(mut f: impl FnMut(usize, usize) -> [u8; 3]) -> Self {
        let mut pixels = Vec::with_capacity(BYTES);
        for y in 0..IMAGE_SIDE {
            for x in 0..IMAGE_SIDE {
                pixels.extend_from_slice(&f(x, y));
            }
        }
        Self { pixels }
    }

    pub fn filled(rgb: [u8; 3]) -> Self {
        Self::from_fn(|_, _| rgb)
    }

    /// Resamples any RGB image to 256x256 with bilinear filtering.
    pub fn from_rgb(img: &RgbImage) -> Self {
        let side = IMAGE_SIDE as u32;
        let resized = if img.dimensions() == (side, side) {
            img.clone()
        } else {
            image::imageops::resize(img, side, side, FilterType::Triangle)
        };
        Self { pixels: resized.into_raw() }
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let o = (y * IMAGE_SIDE + x) * 3;
        [self.pixels[o], self.pixels[o + 1], self.pixels[o + 2]]
    }

    /// Luma with weights 0.299/0.587/0.114, row-major.
    pub fn grayscale(&self) -> Vec<f64> {
        self.pixels
            .chunks_exact(3)
            .map(|p| 0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64)
            .collect()
    }

    pub fn to_rgb_image(&self) -> RgbImage {
        RgbImage::from_raw(IMAGE_SIDE as u32, IMAGE_SIDE as u32, self.pixels.clone()).expect("exact buffer")
    }
}

/// Why an image file was dropped during ingestion.
#[derive(Debug, thiserror::Error)]
pub enum ImageRejection {
    #[error("cannot open {0}")]
    Unreadable(String),
    #[error("corrupt or undecodable: {0}")]
    Corrupt(String),
    #[error("animated image ({0} frames)")]
    Animated(usize),
}

/// Loads a PNG/JPEG (GIF accepted when single-frame) and normalizes it.
pub fn load_image(path: &Path) -> Result<NormalizedImage, ImageRejection> {
    let reader = ImageReader::open(path)
        .and_then(|r| r.with_guessed_format())
        .map_err(|e| ImageRejection::Unreadable(format!("{}: {e}", path.display())))?;
    match reader.format() {
        Some(ImageFormat::Gif) => {
            let file = File::open(path).map_err(|e| ImageRejection::Unreadable(e.to_string()))?;
            let frames = GifDecoder::new(BufReader::new(file))
                .map_err(|e| ImageRejection::Corrupt(e.to_string()))?
                .into_frames()
                .take(2)
                .count();
            if frames > 1 {
                return Err(ImageRejection::Animated(frames));
            }
        }
        Some(ImageFormat::Png) => {
            let file = File::open(path).map_err(|e| ImageRejection::Unreadable(e.to_string()))?;
            let decoder = PngDecoder::new(BufReader::new(file)).map_err(|e| ImageRejection::Corrupt(e.to_string()))?;
            if decoder.is_apng().unwrap_or(false) {
                return Err(ImageRejection::Animated(2));
            }
        }
        _ => {}
    }
    let decoded = reader.decode().map_err(|e| ImageRejection::Corrupt(e.to_string()))?;
    Ok(NormalizedImage::from_rgb(&decoded.to_rgb8()))
}
