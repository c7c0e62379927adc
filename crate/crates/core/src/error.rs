use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("mask {id} has no set pixels")]
    EmptyMask { id: u32 },

    #[error("mask id 0 is reserved for background")]
    ZeroId,

    #[error("dimension mismatch: expected {expected_w}x{expected_h}, found {found_w}x{found_h}")]
    DimensionMismatch {
        expected_w: u32,
        expected_h: u32,
        found_w: u32,
        found_h: u32,
    },

    #[error("duplicate mask id {0}")]
    DuplicateId(u32),

    #[error("masks {a} and {b} overlap on {pixels} pixel(s)")]
    Overlap { a: u32, b: u32, pixels: u64 },

    #[error("pgm parse error at byte {offset}: {message}")]
    Pgm { offset: usize, message: String },

    #[error("label {0} does not fit a 16-bit raster")]
    LabelOverflow(u32),

    #[error("{}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("manifest: {0}")]
    Manifest(String),

    #[error("tracked mask {id} has no counterpart in the source set")]
    IdSubset { id: u32 },

    #[error("sequence length must be at least 1")]
    ZeroLength,

    #[error("invalid config: {0}")]
    Config(String),

    #[error("channel count mismatch: expected {expected}, found {found}")]
    ChannelMismatch { expected: usize, found: usize },

    #[error("class code {code} out of range for {classes} classes")]
    CodeOutOfRange { code: u8, classes: usize },

    #[error("invalid world: {0}")]
    World(String),

    #[error("mask id {0} cannot be resolved to a scene object")]
    UnknownId(u32),

    #[error("{stream} stream, frame {frame}")]
    Frame {
        stream: &'static str,
        frame: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn dims(expected: (u32, u32), found: (u32, u32)) -> Self {
        Error::DimensionMismatch {
            expected_w: expected.0,
            expected_h: expected.1,
            found_w: found.0,
            found_h: found.1,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn at_frame(self, stream: &'static str, frame: usize) -> Self {
        match self {
            e @ Error::Frame { .. } => e,
            e => Error::Frame {
                stream,
                frame,
                source: Box::new(e),
            },
        }
    }
}
