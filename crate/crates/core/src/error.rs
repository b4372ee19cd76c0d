use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("file not found: {0}")]
    NotFound(PathBuf),

    #[error("cannot decode image {path}: {reason}")]
    Decode { path: PathBuf, reason: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed document {path}: {reason}")]
    Document { path: PathBuf, reason: String },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("legend does not fit: {0}")]
    Layout(String),

    #[error("degenerate series: {0}")]
    DegenerateSeries(&'static str),

    #[error("correlation {0} is outside [-1, 1]")]
    OutOfRange(f64),

    #[error("need at least {needed} pixels for k-means, got {got}")]
    TooFewPixels { needed: usize, got: usize },

    #[error("knee detection needs at least 3 points, got {0}")]
    CurveTooShort(usize),

    #[error("no clusters to separate")]
    NoClusters,

    #[error("mask is empty after filtering ({pixels} pixels, minimum {minimum})")]
    EmptyMask { pixels: usize, minimum: usize },

    #[error("segmentation produced no series masks")]
    SegmentationEmpty,

    #[error("no legend region or legend entries available")]
    NoLegend,

    #[error("legend entry {0} cannot be assigned to any series")]
    UnassignableEntry(usize),

    #[error("corpus is empty")]
    EmptyCorpus,
}

impl Error {
    /// Stable one-word code used by the command line front end.
    pub fn code(&self) -> &'static str {
        match self {
            Error::NotFound(_) => "not-found",
            Error::Decode { .. } => "decode",
            Error::Io { .. } => "io",
            Error::Document { .. } => "document",
            Error::InvalidParams(_) => "invalid-params",
            Error::Layout(_) => "layout",
            Error::DegenerateSeries(_) => "degenerate-series",
            Error::OutOfRange(_) => "out-of-range",
            Error::TooFewPixels { .. } => "too-few-pixels",
            Error::CurveTooShort(_) => "curve-too-short",
            Error::NoClusters => "no-clusters",
            Error::EmptyMask { .. } => "empty-mask",
            Error::SegmentationEmpty => "segmentation-empty",
            Error::NoLegend => "no-legend",
            Error::UnassignableEntry(_) => "unassignable-entry",
            Error::EmptyCorpus => "empty-corpus",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            Error::NotFound(path)
        } else {
            Error::Io { path, source }
        }
    }
}
