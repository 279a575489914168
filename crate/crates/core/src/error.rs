use std::path::PathBuf;

use crate::matrix::ClassId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid expansion size: E = {expansion} must exceed input dimension d = {dim}")]
    InvalidExpansionSize { dim: usize, expansion: usize },

    #[error("invalid dimension: feature dimension must be at least 1")]
    InvalidDimension,

    #[error("shape error: {0}")]
    Shape(String),

    #[error("invalid regularizer: gamma = {0} must be positive and finite")]
    InvalidRegularizer(f64),

    #[error("class collision: class id {0} is already registered")]
    ClassCollision(ClassId),

    #[error("invalid labels: {0}")]
    InvalidLabels(String),

    #[error("classifier has no classes registered")]
    UntrainedClassifier,

    #[error("matrix is not positive definite ({0})")]
    NotPositiveDefinite(&'static str),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("pretraining set must contain at least two classes, found {0}")]
    InvalidPretrainSet(usize),

    #[error("invalid learning rate {0}: must be positive and finite")]
    InvalidLearningRate(f64),

    #[error("invalid training configuration: {0}")]
    InvalidTrainingConfig(String),

    #[error("extractor must be frozen before extraction")]
    ExtractorNotFrozen,

    #[error("invalid synthetic spec: {0}")]
    InvalidSynthSpec(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("data error at line {line}: {message}")]
    Data { line: u64, message: String },

    #[error("invalid split: {0}")]
    InvalidSplit(String),

    #[error("task {task} has an empty {set} set")]
    EmptyTask { task: usize, set: &'static str },

    #[error("metric undefined: {0}")]
    MetricUndefined(&'static str),

    #[error("snapshot format error: {0}")]
    Snapshot(String),

    #[error("manifest error: {0}")]
    Manifest(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
