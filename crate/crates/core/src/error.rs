//! Error type shared across the crate.

use std::fmt;
use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug)]
pub enum Error {
    /// Tensor shapes incompatible for an operation; names the offender.
    ShapeMismatch {
        op: &'static str,
        expected: String,
        actual: String,
    },
    /// An argument violates an operation's contract (negative sigma,
    /// even kernel size, degenerate spatial extent, ...).
    InvalidArgument { op: &'static str, msg: String },
    /// A negative soft-threshold reached an operator that requires
    /// lambda >= 0.
    NegativeThreshold { value: f64 },
    /// Operation not defined for this model configuration
    /// (e.g. threshold adaptation of a LISTA head).
    Unsupported(String),
    /// Training aborted on a non-finite loss; carries a diagnostic dump
    /// of the offending batch.
    NanLoss {
        epoch: usize,
        step: usize,
        diagnostics: String,
    },
    /// File could not be parsed as a supported image.
    ImageFormat { path: PathBuf, reason: String },
    /// No loadable images at the given path.
    EmptyDataset(PathBuf),
    Io { path: PathBuf, source: std::io::Error },

    // Checkpoint-specific failures, each distinct per the file contract.
    CheckpointBadMagic,
    CheckpointVersion(u32),
    CheckpointChecksum { stored: u64, computed: u64 },
    CheckpointTruncated,
    CheckpointInvalid(String),
    /// Loaded model's denoiser head differs from what the caller requires.
    HeadKindMismatch { expected: String, actual: String },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::ShapeMismatch { op, expected, actual } => {
                write!(f, "{op}: shape mismatch, expected {expected}, got {actual}")
            }
            Error::InvalidArgument { op, msg } => write!(f, "{op}: {msg}"),
            Error::NegativeThreshold { value } => {
                write!(f, "soft_threshold: negative threshold {value}")
            }
            Error::Unsupported(msg) => write!(f, "unsupported operation: {msg}"),
            Error::NanLoss { epoch, step, diagnostics } => {
                write!(f, "non-finite loss at epoch {epoch} step {step}: {diagnostics}")
            }
            Error::ImageFormat { path, reason } => {
                write!(f, "{}: {reason}", path.display())
            }
            Error::EmptyDataset(path) => {
                write!(f, "no images found at {}", path.display())
            }
            Error::Io { path, source } => write!(f, "{}: {source}", path.display()),
            Error::CheckpointBadMagic => write!(f, "checkpoint: bad magic bytes"),
            Error::CheckpointVersion(v) => write!(f, "checkpoint: unsupported version {v}"),
            Error::CheckpointChecksum { stored, computed } => write!(
                f,
                "checkpoint: checksum mismatch (stored {stored:#018x}, computed {computed:#018x})"
            ),
            Error::CheckpointTruncated => write!(f, "checkpoint: file truncated"),
            Error::CheckpointInvalid(msg) => write!(f, "checkpoint: {msg}"),
            Error::HeadKindMismatch { expected, actual } => {
                write!(f, "denoiser head mismatch: expected {expected}, checkpoint has {actual}")
            }
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io { source, .. } => Some(source),
            _ => None,
        }
    }
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn shape(op: &'static str, expected: impl Into<String>, actual: impl Into<String>) -> Self {
        Error::ShapeMismatch { op, expected: expected.into(), actual: actual.into() }
    }

    pub(crate) fn invalid(op: &'static str, msg: impl Into<String>) -> Self {
        Error::InvalidArgument { op, msg: msg.into() }
    }
}
