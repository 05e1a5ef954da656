//! Optical density conversion, stain estimation and normalization, and
//! tiling of region images into 224×224 patches.

mod stain;
mod tile;

use std::path::Path;

use thiserror::Error;

pub use stain::{
    estimate_stains, estimate_stains_image, normalize_to_reference, StainParams, StainProfile, REFERENCE_PROFILE,
};
pub use tile::{extract_patch, tile, tile_grid, Mask, PatchGrid, TileManifest, PATCH_SIZE};

#[derive(Debug, Error)]
pub enum ImagePrepError {
    #[error("only {found} pixels exceed the OD floor; need at least {needed}")]
    InsufficientTissue { found: usize, needed: usize },
    #[error("optical density cloud is rank-deficient")]
    DegenerateCloud,
    #[error("image {width}×{height} is smaller than one {patch}-pixel patch")]
    ImageTooSmall { width: usize, height: usize, patch: usize },
    #[error("invalid stain profile: {0}")]
    InvalidProfile(String),
    #[error("mask is {mask_w}×{mask_h} but image is {width}×{height}")]
    MaskMismatch { mask_w: usize, mask_h: usize, width: usize, height: usize },
    #[error("invalid image: {0}")]
    InvalidImage(String),
    #[error("cannot decode image: {0}")]
    Decode(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, ImagePrepError>;

/// 8-bit RGB image, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    pixels: Vec<[u8; 3]>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, pixels: Vec<[u8; 3]>) -> Result<Self> {
        if width == 0 || height == 0 || pixels.len() != width * height {
            return Err(ImagePrepError::InvalidImage(format!(
                "{} pixels for {width}×{height}",
                pixels.len()
            )));
        }
        Ok(Self { width, height, pixels })
    }

    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Result<Self> {
        Self::new(width, height, vec![rgb; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[[u8; 3]] {
        &self.pixels
    }

    pub fn pixel(&self, row: usize, col: usize) -> [u8; 3] {
        self.pixels[row * self.width + col]
    }

    pub fn set_pixel(&mut self, row: usize, col: usize, rgb: [u8; 3]) {
        self.pixels[row * self.width + col] = rgb;
    }

    /// Reads PNG or binary PPM, by content.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        Self::decode(&bytes)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let img = image::load_from_memory(bytes).map_err(|e| ImagePrepError::Decode(e.to_string()))?;
        let rgb = img.to_rgb8();
        let (w, h) = (rgb.width() as usize, rgb.height() as usize);
        let pixels = rgb.pixels().map(|p| p.0).collect();
        Self::new(w, h, pixels)
    }

    fn to_buffer(&self) -> image::RgbImage {
        let raw: Vec<u8> = self.pixels.iter().flatten().copied().collect();
        image::RgbImage::from_raw(self.width as u32, self.height as u32, raw).expect("dimensions match")
    }

    pub fn encode_png(&self) -> Result<Vec<u8>> {
        let mut out = std::io::Cursor::new(Vec::new());
        self.to_buffer()
            .write_to(&mut out, image::ImageFormat::Png)
            .map_err(|e| ImagePrepError::Decode(e.to_string()))?;
        Ok(out.into_inner())
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.encode_png()?)?;
        Ok(())
    }

    /// Binary `P6` PPM.
    pub fn encode_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend(self.pixels.iter().flatten());
        out
    }
}

/// `−log10((I + 1) / 256)`.
pub fn od_of(intensity: u8) -> f64 {
    -((f64::from(intensity) + 1.0) / 256.0).log10()
}

/// Inverse of [`od_of`], rounded and clamped to `[0, 255]`.
pub fn intensity_of(od: f64) -> u8 {
    (256.0 * 10f64.powf(-od) - 1.0).round().clamp(0.0, 255.0) as u8
}

pub fn rgb_to_od(image: &RgbImage) -> Vec<[f64; 3]> {
    let table: Vec<f64> = (0..=255u8).map(od_of).collect();
    image
        .pixels
        .iter()
        .map(|p| [table[p[0] as usize], table[p[1] as usize], table[p[2] as usize]])
        .collect()
}

pub fn od_to_rgb(od: &[f64; 3]) -> [u8; 3] {
    [intensity_of(od[0]), intensity_of(od[1]), intensity_of(od[2])]
}

/// Rec. 601 luminance.
pub fn luminance(p: [u8; 3]) -> f64 {
    0.299 * f64::from(p[0]) + 0.587 * f64::from(p[1]) + 0.114 * f64::from(p[2])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn od_examples() {
        assert!(od_of(255).abs() < 1e-3);
        assert_eq!(od_of(255), 0.0);
        assert!((od_of(0) - 2.408_239_965_311_849).abs() < 1e-12);
        assert!(od_of(127) > od_of(200));
    }

    #[test]
    fn od_round_trip_every_level() {
        for v in 0..=255u8 {
            assert_eq!(intensity_of(od_of(v)), v);
        }
        assert_eq!(intensity_of(-1.0), 255);
        assert_eq!(intensity_of(10.0), 0);
    }

    #[test]
    fn od_is_monotone_decreasing() {
        for v in 0..255u8 {
            assert!(od_of(v) > od_of(v + 1));
        }
    }

    #[test]
    fn png_and_ppm_round_trip() {
        let px: Vec<[u8; 3]> = (0..12).map(|i| [i as u8 * 20, 255 - i as u8, 7]).collect();
        let img = RgbImage::new(4, 3, px).unwrap();
        assert_eq!(RgbImage::decode(&img.encode_png().unwrap()).unwrap(), img);
        assert_eq!(RgbImage::decode(&img.encode_ppm()).unwrap(), img);
        assert!(matches!(RgbImage::decode(b"not an image"), Err(ImagePrepError::Decode(_))));
    }
}
