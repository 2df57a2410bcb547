use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Error, Debug)]
pub enum Error {
    #[error("bit length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("codeword mask is empty; masked Hamming distance is undefined")]
    ZeroMask,

    #[error("dimension mismatch: expected {expected:?}, found {found:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("{}line {line}: {message}", source_prefix(.source_name))]
    Parse {
        source_name: Option<PathBuf>,
        line: usize,
        message: String,
    },

    #[error("keypoint ({u}, {v}) is closer than {margin} px to the image border")]
    MarginViolation { u: u32, v: u32, margin: u32 },

    #[error("image {width}x{height} is too small (minimum {min}x{min})")]
    ImageTooSmall { width: u32, height: u32, min: u32 },

    #[error("frame {got} arrived after frame {previous}; ids must be strictly increasing")]
    OutOfOrderFrame { previous: usize, got: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),
}

fn source_prefix(source_name: &Option<PathBuf>) -> String {
    match source_name {
        Some(p) => format!("{}: ", p.display()),
        None => String::new(),
    }
}

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            source_name: None,
            line,
            message: message.into(),
        }
    }

    /// Attach a file name to a parse error produced while reading `path`.
    pub(crate) fn in_file(self, path: &std::path::Path) -> Self {
        match self {
            Error::Parse { line, message, .. } => Error::Parse {
                source_name: Some(path.to_path_buf()),
                line,
                message,
            },
            other => other,
        }
    }
}
