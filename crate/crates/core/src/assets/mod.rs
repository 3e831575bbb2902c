//! Gaussian clouds, teacher embedding tables, triplet manifests and fixtures.

mod embeddings;
mod manifest;
mod ply;
mod point;
mod subsample;
mod synthetic;

use std::path::PathBuf;

use thiserror::Error;

pub use embeddings::{EmbeddingTable, EMBEDDING_MAGIC, EMBEDDING_VERSION};
pub use manifest::{load_manifest, ManifestEntry, TripletManifest};
pub use ply::{parse_ply, parse_ply_named, read_ply, write_ply, REQUIRED_PROPERTIES};
pub use point::{GaussianCloud, GaussianPoint, ATTRIBUTE_COUNT, ATTRIBUTE_NAMES};
pub use subsample::subsample_points;
pub use synthetic::{gen_synthetic_triplets, FixtureSpec, SyntheticSet};

/// Convenience alias for [`EmbeddingTable::load`].
pub fn load_embeddings(path: impl AsRef<std::path::Path>) -> Result<EmbeddingTable, AssetError> {
    EmbeddingTable::load(path)
}

#[derive(Debug, Error)]
pub enum AssetError {
    #[error("PLY header line {line} `{content}`: {reason}")]
    Header {
        line: usize,
        content: String,
        reason: String,
    },
    #[error("PLY payload size mismatch: header implies {expected} bytes, found {actual}")]
    SizeMismatch { expected: usize, actual: usize },
    #[error("PLY is missing required vertex property `{0}`")]
    MissingProperty(String),
    #[error("gaussian cloud is empty")]
    EmptyCloud,
    #[error("non-finite value in point {index}, attribute `{attribute}`")]
    NonFinite {
        index: usize,
        attribute: &'static str,
    },
    #[error("embedding file: bad magic bytes {0:?}")]
    BadMagic([u8; 4]),
    #[error("unsupported {what} version {found} (expected {expected})")]
    Version {
        what: &'static str,
        found: u32,
        expected: u32,
    },
    #[error("embedding file truncated while reading {0}")]
    Truncated(String),
    #[error("embedding key is not valid UTF-8 at row {0}")]
    InvalidKey(usize),
    #[error("duplicate embedding key `{0}`")]
    DuplicateKey(String),
    #[error("dimension mismatch for `{key}`: expected {expected}, found {found}")]
    DimensionMismatch {
        key: String,
        expected: usize,
        found: usize,
    },
    #[error("dangling embedding key `{0}`")]
    DanglingKey(String),
    #[error("manifest entry {0} lists no image embedding keys")]
    NoViews(usize),
    #[error("manifest entry {index} references missing asset {path}")]
    MissingAsset { index: usize, path: PathBuf },
    #[error("manifest: {0}")]
    Manifest(#[from] serde_json::Error),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl AssetError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        AssetError::Io {
            path: path.into(),
            source,
        }
    }
}
