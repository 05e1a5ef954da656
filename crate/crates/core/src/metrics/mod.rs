//! Evaluation statistics: correlation, multiple-testing correction, R²,
//! group tests, AUROC and the per-gene / per-patient evaluation report.

mod auroc;
mod correlation;
pub mod distributions;
mod fdr;
mod hypothesis;
mod report;

pub use auroc::auroc;
pub use correlation::{average_ranks, pearson, r2, spearman, CorrelationResult};
pub use fdr::bh_fdr;
pub use hypothesis::{anova_oneway, pooled_t, welch_t, AnovaResult, TTestResult};
pub use report::{evaluate, EvalReport, GeneStat, PatientStat, EVAL_FDR_LEVEL};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("need at least {min} samples, got {n}")]
    TooFewSamples { n: usize, min: usize },
    #[error("input has zero variance")]
    ConstantInput,
    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },
    #[error("p-value {value} at index {index} outside [0, 1]")]
    OutOfRange { index: usize, value: f64 },
    #[error("truth vector is constant; R² undefined")]
    ConstantTruth,
    #[error("group {group} has {n} observations, need at least 2")]
    GroupTooSmall { group: usize, n: usize },
    #[error("need at least 2 groups, got {0}")]
    TooFewGroups(usize),
    #[error("all observations are equal; statistic undefined")]
    AllEqual,
    #[error("both groups have zero variance")]
    ZeroVariance,
    #[error("labels contain a single class")]
    SingleClass,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
}

pub type Result<T> = std::result::Result<T, MetricsError>;

pub(crate) fn check_finite(x: &[f64]) -> Result<()> {
    match x.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(MetricsError::NonFinite { index }),
        None => Ok(()),
    }
}
