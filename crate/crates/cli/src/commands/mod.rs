pub mod aggregate;
pub mod benchmark;
pub mod evaluate;
pub mod preprocess;
pub mod subtype;
pub mod survival;
pub mod train;

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use histexpr::expression::{load_expression, load_transformed_expression, ExpressionMatrix, GenePanel};
use histexpr::features::{aggregate, feature_files, read_slide_features, PatchFeatureSet, SlideFeature};
use serde::Serialize;

use crate::config::PipelineConfig;
use crate::error::{CliError, Context, Result};

/// Resolved global settings shared by every subcommand.
pub struct Env {
    pub seed: u64,
    pub strict: bool,
    pub output_dir: PathBuf,
    pub config: PipelineConfig,
}

impl Env {
    pub fn output(&self, name: &str) -> PathBuf {
        self.output_dir.join(name)
    }

    pub fn create_output_dir(&self) -> Result<()> {
        fs::create_dir_all(&self.output_dir).context(format!("creating {}", self.output_dir.display()))
    }

    pub fn write(&self, name: &str, contents: impl AsRef<[u8]>) -> Result<PathBuf> {
        let path = self.output(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).context(format!("creating {}", parent.display()))?;
        }
        fs::write(&path, contents).context(format!("writing {}", path.display()))?;
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, text)
    }

    /// Emits a warning, or fails under `--strict`.
    pub fn warn(&self, message: String) -> Result<()> {
        if self.strict {
            return Err(CliError::invalid(format!("{message} (--strict)")));
        }
        eprintln!("warning: {message}");
        Ok(())
    }
}

/// The flag if given, else the config entry; the path must exist.
pub fn input(flag: &Option<PathBuf>, configured: &Option<PathBuf>, name: &str) -> Result<PathBuf> {
    let path = flag
        .clone()
        .or_else(|| configured.clone())
        .ok_or_else(|| CliError::io(format!("no {name} given (use --{name} or the config file)")))?;
    if !path.exists() {
        return Err(CliError::missing(&path));
    }
    Ok(path)
}

pub fn optional_input(flag: &Option<PathBuf>, configured: &Option<PathBuf>) -> Result<Option<PathBuf>> {
    match flag.clone().or_else(|| configured.clone()) {
        Some(p) if !p.exists() => Err(CliError::missing(&p)),
        other => Ok(other),
    }
}

pub fn load_panel(env: &Env, flag: &Option<PathBuf>) -> Result<GenePanel> {
    match optional_input(flag, &env.config.paths.panel)? {
        Some(p) => GenePanel::load(&p).context(format!("reading panel {}", p.display())),
        None => Ok(GenePanel::default_panel()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ExpressionScale {
    /// Raw values, transformed with `log2(1+x)` on load.
    Raw,
    /// Values already on the `log2(1+x)` scale.
    Log2,
}

/// Expression in panel order on the `log2(1+x)` scale.
pub fn read_expression(env: &Env, path: &Path, scale: ExpressionScale, panel: &GenePanel) -> Result<ExpressionMatrix> {
    let what = format!("reading expression {}", path.display());
    let file = fs::File::open(path).context(&what)?;
    let loaded = match scale {
        ExpressionScale::Raw => load_expression(file, panel),
        ExpressionScale::Log2 => load_transformed_expression(file, panel),
    }
    .context(&what)?;
    for r in &loaded.rejected {
        env.warn(format!("{}: patient {} lacks {} (line {})", path.display(), r.patient_id, r.missing_gene, r.line))?;
    }
    match scale {
        ExpressionScale::Raw => loaded.matrix.log_transform().context(&what),
        ExpressionScale::Log2 => Ok(loaded.matrix),
    }
}

/// Reads every `.h2rf` file in `dir`. Unreadable files are skipped with a
/// warning, or fail under `--strict`.
pub fn read_patch_sets(env: &Env, dir: &Path) -> Result<Vec<PatchFeatureSet>> {
    if !dir.is_dir() {
        return Err(CliError::io(format!("{} is not a directory", dir.display())));
    }
    let files = feature_files(dir).context(format!("listing {}", dir.display()))?;
    if files.is_empty() {
        return Err(CliError::invalid(format!("no .h2rf files in {}", dir.display())));
    }
    let mut sets = Vec::with_capacity(files.len());
    let mut seen = HashSet::new();
    for f in &files {
        match PatchFeatureSet::load(f) {
            Ok(s) => {
                if !seen.insert(s.patient_id.clone()) {
                    return Err(CliError::invalid(format!("duplicate patient id {} in {}", s.patient_id, f.display())));
                }
                sets.push(s);
            }
            Err(e) => env.warn(format!("skipping {}: {e}", f.display()))?,
        }
    }
    if sets.is_empty() {
        return Err(CliError::invalid(format!("no readable .h2rf files in {}", dir.display())));
    }
    sets.sort_by(|a, b| a.patient_id.cmp(&b.patient_id));
    Ok(sets)
}

/// Slide features from a directory of `.h2rf` files or a slide-feature CSV,
/// sorted by patient id.
pub fn read_features(env: &Env, path: &Path) -> Result<Vec<SlideFeature>> {
    let mut out = if path.is_dir() {
        read_patch_sets(env, path)?.iter().map(aggregate).collect()
    } else {
        let file = fs::File::open(path).context(format!("reading {}", path.display()))?;
        read_slide_features(file).context(format!("reading {}", path.display()))?
    };
    out.sort_by(|a, b| a.patient_id.cmp(&b.patient_id));
    Ok(out)
}

pub fn hex(v: u64) -> String {
    format!("{v:016x}")
}
