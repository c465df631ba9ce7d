use std::io;

use thiserror::Error;

/// Errors produced by the denoising library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed PGM header: {0}")]
    MalformedHeader(String),
    #[error("truncated PGM payload: expected {expected} samples, found {found}")]
    TruncatedPayload { expected: usize, found: usize },
    #[error("PGM maxval {0} exceeds 255")]
    UnsupportedMaxval(u32),
    #[error("unsupported netpbm format {0:?} (only P2/P5 grayscale)")]
    UnsupportedFormat(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("block size {block} does not fit a {width}x{height} image")]
    BlockTooLarge {
        block: usize,
        width: usize,
        height: usize,
    },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("cluster count {k} exceeds data count {n}")]
    TooManyClusters { k: usize, n: usize },
    #[error("block origin ({row}, {col}) out of bounds")]
    OriginOutOfBounds { row: usize, col: usize },
    #[error("all clusters are empty")]
    AllClustersEmpty,
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
