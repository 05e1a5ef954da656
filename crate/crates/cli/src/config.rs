use std::path::{Path, PathBuf};

use histexpr::imageprep::StainParams;
use histexpr::regressor::TrainConfig;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// Settings read from `--config`. Command-line flags take precedence.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: Option<u64>,
    pub strict: Option<bool>,
    pub paths: Paths,
    pub train: TrainConfig,
    pub imageprep: ImagePrepConfig,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub panel: Option<PathBuf>,
    pub features: Option<PathBuf>,
    pub expression: Option<PathBuf>,
    pub clinical: Option<PathBuf>,
    pub reference_profile: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImagePrepConfig {
    pub alpha: f64,
    pub beta: f64,
    pub tissue_threshold: f64,
}

impl Default for ImagePrepConfig {
    fn default() -> Self {
        let s = StainParams::default();
        Self { alpha: s.alpha, beta: s.beta, tissue_threshold: 0.5 }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| CliError::io(format!("invalid config: {e}")))
    }

    /// Reads a config file. Relative paths are taken from the file's
    /// directory, and every input path must exist.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        let p = &mut cfg.paths;
        for slot in [&mut p.panel, &mut p.features, &mut p.expression, &mut p.clinical, &mut p.reference_profile, &mut p.output_dir] {
            if let Some(v) = slot.as_mut() {
                if v.is_relative() {
                    *v = base.join(&*v);
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let p = &self.paths;
        for path in [&p.panel, &p.features, &p.expression, &p.clinical, &p.reference_profile].into_iter().flatten() {
            if !path.exists() {
                return Err(CliError::missing(path));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections() {
        let cfg = PipelineConfig::from_toml(
            "seed = 7\n[train]\nmax_epochs = 3\n[train.head]\nconv1_filters = 4\nkernel = 5\nconv2_channels = 3\nconv3_channels = 2\nactivation = \"relu\"\n[imageprep]\ntissue_threshold = 0.25\n",
        )
        .unwrap();
        assert_eq!(cfg.seed, Some(7));
        assert_eq!(cfg.train.max_epochs, 3);
        assert_eq!(cfg.train.head.conv1_filters, 4);
        assert_eq!(cfg.train.batch_size, 12);
        assert_eq!(cfg.imageprep.tissue_threshold, 0.25);
        assert_eq!(cfg.imageprep.alpha, 1.0);
    }

    #[test]
    fn rejects_unknown_keys() {
        assert!(PipelineConfig::from_toml("sede = 1\n").is_err());
    }

    #[test]
    fn missing_paths_fail_validation() {
        let dir = std::env::temp_dir().join("histexpr-config-test-missing");
        let cfg = PipelineConfig {
            paths: Paths { clinical: Some(dir.join("nope.csv")), ..Default::default() },
            ..Default::default()
        };
        assert_eq!(cfg.validate().unwrap_err().code, crate::error::EXIT_IO);
    }
}
