use std::path::PathBuf;

use crate::goat::GoatTrace;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed {format} data: {reason}")]
    Format {
        format: &'static str,
        reason: String,
    },

    #[error("shape mismatch: {left_w}x{left_h} vs {right_w}x{right_h}")]
    ShapeMismatch {
        left_w: usize,
        left_h: usize,
        right_w: usize,
        right_h: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("every pixel is masked out; the masked mean is undefined")]
    DegenerateMask,

    #[error("no valid pixels in the evaluation region")]
    EmptyRegion,

    #[error("loss became non-finite at epoch {epoch}, step {step}")]
    Diverged {
        epoch: usize,
        step: usize,
        trace: Box<GoatTrace>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(format: &'static str, reason: impl Into<String>) -> Self {
        Error::Format {
            format,
            reason: reason.into(),
        }
    }

    pub(crate) fn shape(a: (usize, usize), b: (usize, usize)) -> Self {
        Error::ShapeMismatch {
            left_w: a.0,
            left_h: a.1,
            right_w: b.0,
            right_h: b.1,
        }
    }
}

/// Fails with [`Error::ShapeMismatch`] unless both `(width, height)` pairs agree.
pub(crate) fn ensure_same_shape(a: (usize, usize), b: (usize, usize)) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::shape(a, b))
    }
}
