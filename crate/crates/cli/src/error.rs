use std::fmt;
use std::path::Path;

use histexpr::expression::ExpressionError;
use histexpr::features::FeatureError;
use histexpr::imageprep::ImagePrepError;
use histexpr::metrics::MetricsError;
use histexpr::regressor::RegressorError;
use histexpr::subtype::SubtypeError;
use histexpr::survival::SurvivalError;

/// Validation or statistical failure.
pub const EXIT_INVALID: u8 = 1;
/// I/O or usage error.
pub const EXIT_IO: u8 = 2;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn invalid(message: impl Into<String>) -> Self {
        Self { code: EXIT_INVALID, message: message.into() }
    }

    pub fn io(message: impl Into<String>) -> Self {
        Self { code: EXIT_IO, message: message.into() }
    }

    pub fn missing(path: &Path) -> Self {
        Self::io(format!("{} does not exist", path.display()))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::io(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        Self::invalid(e.to_string())
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        Self::invalid(e.to_string())
    }
}

macro_rules! classify {
    ($($ty:ty => |$e:ident| $io:expr;)*) => {$(
        impl From<$ty> for CliError {
            fn from($e: $ty) -> Self {
                let code = if $io { EXIT_IO } else { EXIT_INVALID };
                Self { code, message: $e.to_string() }
            }
        }
    )*};
}

classify! {
    ExpressionError => |e| matches!(e, ExpressionError::Io(_));
    FeatureError => |e| matches!(e, FeatureError::Io(_));
    ImagePrepError => |e| matches!(e, ImagePrepError::Io(_));
    RegressorError => |e| matches!(e, RegressorError::Io(_) | RegressorError::DatasetTooSmall { .. });
    SubtypeError => |e| matches!(e, SubtypeError::Io(_));
    SurvivalError => |e| matches!(e, SurvivalError::Io(_));
}

pub type Result<T> = std::result::Result<T, CliError>;

pub trait Context<T> {
    fn context(self, what: impl fmt::Display) -> Result<T>;
}

impl<T, E: Into<CliError>> Context<T> for std::result::Result<T, E> {
    fn context(self, what: impl fmt::Display) -> Result<T> {
        self.map_err(|e| {
            let e = e.into();
            CliError { code: e.code, message: format!("{what}: {}", e.message) }
        })
    }
}
