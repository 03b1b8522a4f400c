use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by estimators, fitting routines and file handling.
#[derive(Debug, Error)]
pub enum Error {
    #[error("test set is empty")]
    EmptyTestSet,

    #[error("calibration set is empty")]
    EmptyCalibrationSet,

    #[error("calibration set has no observations with {missing}")]
    DegenerateCalibrationClass { missing: &'static str },

    #[error("misclassification correction is near singular: q0 + q1 - 1 = {kappa:e}")]
    NearSingularCorrection { kappa: f64 },

    #[error("surrogate labels are constant on the calibration set")]
    ConstantSurrogate,

    #[error("calibration set has no observations with y_hat = {level}")]
    DegenerateSurrogateCell { level: u8 },

    #[error("surrogate marginal p = {p} leaves p(1-p) = 0")]
    DegenerateSurrogateDistribution { p: f64 },

    #[error("information matrix is singular")]
    SingularInformation,

    #[error("invalid parameter {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("invalid label {value} at position {index}: expected 0 or 1")]
    InvalidLabel { index: usize, value: f64 },

    #[error("surrogate level {level} was not observed in the calibration set")]
    UnseenLevel { level: f64 },

    #[error("surrogate value {value} is not integral; declare categorical levels explicitly")]
    NonIntegralLevel { value: f64 },

    #[error("{family} design matrix is rank deficient")]
    RankDeficient { family: &'static str },

    #[error("need at least {needed} observations, have {have}")]
    InsufficientData { needed: usize, have: usize },

    #[error("malformed row at line {line}: {reason}")]
    MalformedRow { line: u64, reason: String },

    #[error("value out of domain at line {line}: {reason}")]
    DomainError { line: u64, reason: String },

    #[error("split left the {side} side empty")]
    EmptySplitSide { side: &'static str },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {reason}")]
    Format { path: PathBuf, reason: String },
}

impl Error {
    /// Stable machine-readable identifier, used for CLI exit messages.
    pub fn code(&self) -> &'static str {
        match self {
            Error::EmptyTestSet => "EmptyTestSet",
            Error::EmptyCalibrationSet => "EmptyCalibrationSet",
            Error::DegenerateCalibrationClass { .. } => "DegenerateCalibrationClass",
            Error::NearSingularCorrection { .. } => "NearSingularCorrection",
            Error::ConstantSurrogate => "ConstantSurrogate",
            Error::DegenerateSurrogateCell { .. } => "DegenerateSurrogateCell",
            Error::DegenerateSurrogateDistribution { .. } => "DegenerateSurrogateDistribution",
            Error::SingularInformation => "SingularInformation",
            Error::InvalidParameter { .. } => "InvalidParameter",
            Error::InvalidLabel { .. } => "InvalidLabel",
            Error::UnseenLevel { .. } => "UnseenLevel",
            Error::NonIntegralLevel { .. } => "NonIntegralLevel",
            Error::RankDeficient { .. } => "RankDeficient",
            Error::InsufficientData { .. } => "InsufficientData",
            Error::MalformedRow { .. } => "MalformedRow",
            Error::DomainError { .. } => "DomainError",
            Error::EmptySplitSide { .. } => "EmptySplitSide",
            Error::Io { .. } => "Io",
            Error::Format { .. } => "Format",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
