use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimensions {height}x{width}")]
    InvalidDims { height: usize, width: usize },

    #[error("degenerate output: factor {factor} exceeds {height}x{width}")]
    DegenerateOutput {
        factor: usize,
        height: usize,
        width: usize,
    },

    #[error("output dimensions overflow")]
    Overflow,

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimMismatch { expected: String, actual: String },

    #[error("non-finite vector component at pixel {index}")]
    NonFinite { index: usize },

    #[error("empty instance")]
    EmptyInstance,

    #[error("empty pixel set")]
    EmptySet,

    #[error("nothing to evaluate")]
    NothingToEvaluate,

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("not a vecmap: {0}")]
    NotAVecmap(String),

    #[error("truncated: {0}")]
    Truncated(String),

    #[error("corrupt components at pixel {index}")]
    CorruptComponents { index: usize },

    #[error("unsupported depth: maxval {0}")]
    UnsupportedDepth(u32),

    #[error("bad pgm: {0}")]
    BadPgm(String),

    #[error("image: {0}")]
    Image(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors raised while decoding a file's bytes.
    pub fn is_format_error(&self) -> bool {
        matches!(
            self,
            Error::NotAVecmap(_)
                | Error::Truncated(_)
                | Error::CorruptComponents { .. }
                | Error::UnsupportedDepth(_)
                | Error::BadPgm(_)
                | Error::Image(_)
        )
    }
}
