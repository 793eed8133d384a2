use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {lhs:?} vs {rhs:?}")]
    Shape {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unsupported grid {rows}x{cols}: {reason}")]
    UnsupportedGrid {
        rows: usize,
        cols: usize,
        reason: &'static str,
    },

    #[error("light field {field:?} is missing view {index} ({path})")]
    MissingView {
        field: String,
        index: usize,
        path: PathBuf,
    },

    #[error("view {index} of {field:?}: {reason}")]
    BadView {
        field: String,
        index: usize,
        reason: String,
    },

    #[error("image {height}x{width} is smaller than the {window}x{window} SSIM window; use views of at least {window}x{window}")]
    WindowTooLarge {
        height: usize,
        width: usize,
        window: usize,
    },

    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),

    #[error("truncated stream: {what} (expected {expected} bytes, got {actual})")]
    Truncated {
        what: String,
        expected: u64,
        actual: u64,
    },

    #[error("corrupt stream: {0}")]
    Corrupt(String),

    #[error("encoding fingerprint {found:016x} does not match model fingerprint {expected:016x}")]
    IncompatibleEncoding { expected: u64, found: u64 },

    #[error("stream I/O: {0}")]
    Stream(#[source] std::io::Error),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {source}", path.display())]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
}

impl Error {
    pub(crate) fn shape(op: &'static str, lhs: &[usize], rhs: &[usize]) -> Self {
        Error::Shape {
            op,
            lhs: lhs.to_vec(),
            rhs: rhs.to_vec(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short stable tag for the error class, used as a diagnostic prefix.
    pub fn class(&self) -> &'static str {
        match self {
            Error::Shape { .. } => "shape",
            Error::Config(_) => "config",
            Error::UnsupportedGrid { .. } => "grid",
            Error::MissingView { .. } | Error::BadView { .. } => "dataset",
            Error::WindowTooLarge { .. } => "metric",
            Error::UnsupportedFormat(_) => "format",
            Error::Truncated { .. } | Error::Corrupt(_) => "corrupt",
            Error::IncompatibleEncoding { .. } => "incompatible",
            Error::Stream(_) | Error::Io { .. } | Error::Image { .. } => "io",
        }
    }
}
