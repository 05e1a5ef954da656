use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{luminance, ImagePrepError, Result, RgbImage, StainProfile};

pub const PATCH_SIZE: usize = 224;

/// Pixels with luminance below this count as tissue when no mask is given.
const BACKGROUND_LUMINANCE: f64 = 220.0;

/// Binary tissue mask, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    width: usize,
    height: usize,
    data: Vec<bool>,
}

impl Mask {
    pub fn new(width: usize, height: usize, data: Vec<bool>) -> Result<Self> {
        if data.len() != width * height {
            return Err(ImagePrepError::InvalidImage(format!("{} mask cells for {width}×{height}", data.len())));
        }
        Ok(Self { width, height, data })
    }

    /// Non-zero pixels of any channel are tissue.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let img = RgbImage::load(path)?;
        let data = img.pixels().iter().map(|p| p.iter().any(|&c| c != 0)).collect();
        Self::new(img.width(), img.height(), data)
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.data[row * self.width + col]
    }
}

/// Origins `(row, col)` of retained patches, in row-major order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchGrid {
    pub patch_size: usize,
    pub tissue_fraction_threshold: f64,
    pub origins: Vec<(usize, usize)>,
    /// Grid cells considered before the tissue test.
    pub total_candidates: usize,
}

/// Grid-aligned, non-overlapping patch origins whose tissue fraction meets
/// `threshold`. Right and bottom remainders are dropped.
pub fn tile_grid(image: &RgbImage, mask: Option<&Mask>, threshold: f64) -> Result<PatchGrid> {
    let (w, h) = (image.width(), image.height());
    if w < PATCH_SIZE || h < PATCH_SIZE {
        return Err(ImagePrepError::ImageTooSmall { width: w, height: h, patch: PATCH_SIZE });
    }
    if let Some(m) = mask {
        if m.width != w || m.height != h {
            return Err(ImagePrepError::MaskMismatch { mask_w: m.width, mask_h: m.height, width: w, height: h });
        }
    }
    let is_tissue = |r: usize, c: usize| match mask {
        Some(m) => m.get(r, c),
        None => luminance(image.pixel(r, c)) < BACKGROUND_LUMINANCE,
    };
    let (rows, cols) = (h / PATCH_SIZE, w / PATCH_SIZE);
    let area = (PATCH_SIZE * PATCH_SIZE) as f64;
    let mut origins = Vec::new();
    for gr in 0..rows {
        for gc in 0..cols {
            let (r0, c0) = (gr * PATCH_SIZE, gc * PATCH_SIZE);
            let mut count = 0usize;
            for r in r0..r0 + PATCH_SIZE {
                for c in c0..c0 + PATCH_SIZE {
                    count += usize::from(is_tissue(r, c));
                }
            }
            if count as f64 / area >= threshold {
                origins.push((r0, c0));
            }
        }
    }
    Ok(PatchGrid { patch_size: PATCH_SIZE, tissue_fraction_threshold: threshold, origins, total_candidates: rows * cols })
}

pub fn extract_patch(image: &RgbImage, origin: (usize, usize)) -> RgbImage {
    let (r0, c0) = origin;
    let mut px = Vec::with_capacity(PATCH_SIZE * PATCH_SIZE);
    for r in r0..r0 + PATCH_SIZE {
        let start = r * image.width() + c0;
        px.extend_from_slice(&image.pixels()[start..start + PATCH_SIZE]);
    }
    RgbImage::new(PATCH_SIZE, PATCH_SIZE, px).expect("patch inside image")
}

/// Grid plus the patch images, in grid order.
pub fn tile(image: &RgbImage, mask: Option<&Mask>, threshold: f64) -> Result<(PatchGrid, Vec<RgbImage>)> {
    let grid = tile_grid(image, mask, threshold)?;
    let patches = grid.origins.iter().map(|&o| extract_patch(image, o)).collect();
    Ok((grid, patches))
}

/// Per-image record written next to the patch files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TileManifest {
    pub patient_id: String,
    pub source_image: String,
    pub width: usize,
    pub height: usize,
    pub patch_size: usize,
    pub tissue_fraction_threshold: f64,
    pub total_candidates: usize,
    pub retained: usize,
    pub origins: Vec<(usize, usize)>,
    pub patch_files: Vec<String>,
    pub source_profile: StainProfile,
    pub reference_profile: StainProfile,
}

impl TileManifest {
    pub fn patch_file_name(patient_id: &str, origin: (usize, usize)) -> String {
        format!("{patient_id}_{}_{}.png", origin.0, origin.1)
    }
}
