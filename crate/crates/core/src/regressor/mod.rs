//! The slide-level regression head: three convolution blocks over the
//! aggregated feature vector, a linear pointwise output conv to G channels,
//! and global average pooling over the feature axis.

mod adam;
mod gradcheck;
mod io;
mod model;
mod train;

pub use adam::Adam;
pub use gradcheck::{finite_difference_check, GradientComparison};
pub use io::{load_model, model_digest, read_model, save_model, write_model, MODEL_MAGIC, MODEL_VERSION};
pub use model::{loss, Activation, HeadShape, Layout, RegressorModel};
pub use train::{
    predict_patchwise, train, train_patchwise, write_history, EarlyStopping, EpochRecord, StopDecision,
    TrainConfig, TrainOutcome,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum RegressorError {
    #[error("feature vector of length {f} is shorter than the kernel ({kernel})")]
    FeatureTooShort { f: usize, kernel: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("prediction and target lengths differ")]
    LengthMismatch,
    #[error("non-finite parameter")]
    NonFiniteParameter,
    #[error("dataset has {n} rows; need at least {min}")]
    DatasetTooSmall { n: usize, min: usize },
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("loss became non-finite at epoch {0}")]
    Diverged(usize),
    #[error("bad model magic {0:?}")]
    BadMagic([u8; 4]),
    #[error("unsupported model version {0}")]
    UnsupportedVersion(u32),
    #[error("model was trained on panel {expected:016x}, got {found:016x}")]
    PanelMismatch { expected: u64, found: u64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, RegressorError>;
