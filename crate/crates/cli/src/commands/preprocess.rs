use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use histexpr::imageprep::{
    estimate_stains_image, normalize_to_reference, tile, Mask, RgbImage, StainParams, StainProfile, TileManifest,
    REFERENCE_PROFILE,
};
use serde::Serialize;

use super::{optional_input, Env};
use crate::error::{CliError, Context, Result};

pub const SUMMARY: &str = "preprocess_summary.json";
const IMAGE_EXTENSIONS: [&str; 3] = ["png", "ppm", "pnm"];

#[derive(Debug, Args)]
pub struct PreprocessArgs {
    /// Directory of PNG or binary PPM region images. The file stem is the
    /// patient id.
    #[arg(long)]
    pub images: PathBuf,
    /// Optional directory of PNG tissue masks named `<stem>.png`.
    #[arg(long)]
    pub masks: Option<PathBuf>,
    /// Angular percentile for stain estimation.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Optical density floor for stain estimation.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Minimum tissue fraction of a retained patch.
    #[arg(long)]
    pub tissue_threshold: Option<f64>,
    /// JSON stain profile to normalize to.
    #[arg(long)]
    pub reference_profile: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct Summary {
    params: StainParams,
    tissue_threshold: f64,
    reference_profile: StainProfile,
    processed: usize,
    failed: usize,
    images: Vec<ImageRecord>,
}

#[derive(Debug, Serialize)]
struct ImageRecord {
    file: String,
    patient_id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    retained: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    total_candidates: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

fn image_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .context(format!("listing {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && p.extension()
                    .and_then(|e| e.to_str())
                    .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
        })
        .collect();
    files.sort();
    Ok(files)
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

struct Settings<'a> {
    params: StainParams,
    threshold: f64,
    reference: &'a StainProfile,
    masks: Option<&'a Path>,
}

fn process(env: &Env, path: &Path, s: &Settings) -> Result<TileManifest> {
    let id = stem(path);
    let image = RgbImage::load(path)?;
    let source = estimate_stains_image(&image, s.params)?;
    let normalized = normalize_to_reference(&image, &source, s.reference)?;
    let mask = match s.masks.map(|d| d.join(format!("{id}.png"))) {
        Some(m) if m.exists() => Some(Mask::load(&m)?),
        _ => None,
    };
    let (grid, patches) = tile(&normalized, mask.as_ref(), s.threshold)?;
    let mut patch_files = Vec::with_capacity(patches.len());
    for (origin, patch) in grid.origins.iter().zip(&patches) {
        let name = TileManifest::patch_file_name(&id, *origin);
        env.write(&format!("patches/{id}/{name}"), patch.encode_png()?)?;
        patch_files.push(name);
    }
    let manifest = TileManifest {
        patient_id: id.clone(),
        source_image: path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default(),
        width: image.width(),
        height: image.height(),
        patch_size: grid.patch_size,
        tissue_fraction_threshold: grid.tissue_fraction_threshold,
        total_candidates: grid.total_candidates,
        retained: grid.origins.len(),
        origins: grid.origins,
        patch_files,
        source_profile: source,
        reference_profile: *s.reference,
    };
    env.write_json(&format!("manifests/{id}.json"), &manifest)?;
    Ok(manifest)
}

pub fn run(env: &Env, args: &PreprocessArgs) -> Result<()> {
    if !args.images.is_dir() {
        return Err(CliError::io(format!("image directory {} does not exist", args.images.display())));
    }
    if let Some(m) = &args.masks {
        if !m.is_dir() {
            return Err(CliError::io(format!("mask directory {} does not exist", m.display())));
        }
    }
    let cfg = env.config.imageprep;
    let params = StainParams { alpha: args.alpha.unwrap_or(cfg.alpha), beta: args.beta.unwrap_or(cfg.beta) };
    if !(params.alpha > 0.0 && params.alpha < 50.0) {
        return Err(CliError::invalid(format!("alpha must lie in (0, 50), got {}", params.alpha)));
    }
    if !(params.beta > 0.0 && params.beta.is_finite()) {
        return Err(CliError::invalid(format!("beta must be positive, got {}", params.beta)));
    }
    let threshold = args.tissue_threshold.unwrap_or(cfg.tissue_threshold);
    if !(0.0..=1.0).contains(&threshold) {
        return Err(CliError::invalid(format!("tissue threshold must lie in [0, 1], got {threshold}")));
    }
    let reference = match optional_input(&args.reference_profile, &env.config.paths.reference_profile)? {
        Some(p) => StainProfile::load(&p).context(format!("reading reference profile {}", p.display()))?,
        None => REFERENCE_PROFILE,
    };

    let files = image_files(&args.images)?;
    if files.is_empty() {
        return Err(CliError::invalid(format!("no PNG or PPM images in {}", args.images.display())));
    }
    env.create_output_dir()?;
    let settings = Settings { params, threshold, reference: &reference, masks: args.masks.as_deref() };
    let mut records = Vec::with_capacity(files.len());
    for f in &files {
        let file = f.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        let record = match process(env, f, &settings) {
            Ok(m) => ImageRecord {
                file,
                patient_id: m.patient_id,
                retained: Some(m.retained),
                total_candidates: Some(m.total_candidates),
                error: None,
            },
            Err(e) => {
                eprintln!("warning: {}: {e}", f.display());
                ImageRecord { file, patient_id: stem(f), retained: None, total_candidates: None, error: Some(e.message) }
            }
        };
        records.push(record);
    }
    let failed = records.iter().filter(|r| r.error.is_some()).count();
    let summary = Summary {
        params,
        tissue_threshold: threshold,
        reference_profile: reference,
        processed: records.len() - failed,
        failed,
        images: records,
    };
    env.write_json(SUMMARY, &summary)?;
    if failed == files.len() {
        return Err(CliError::invalid(format!("none of the {failed} images could be processed")));
    }
    if failed > 0 && env.strict {
        return Err(CliError::invalid(format!("{failed} of {} images failed (--strict)", files.len())));
    }
    Ok(())
}
