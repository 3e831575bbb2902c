//! Transformer encoder over patch tokens, the full gaussian encoder model and
//! its checkpoint format.

mod checkpoint;
mod model;
mod transformer;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use ndarray::Array1;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tokenizer::TokenizerError;
use crate::Real;

pub use checkpoint::{
    load_checkpoint, load_model, save_model, Checkpoint, LoadReport, NamedTensor, CHECKPOINT_MAGIC,
    CHECKPOINT_VERSION,
};
pub use model::{ForwardTrace, GaussianEncoder, Mode, ModelConfig, ModelParams, Session};
pub use transformer::{encode_backward, encode_tokens, BlockParams, EncoderParams, EncoderTrace};

#[derive(Debug, Error)]
pub enum EncoderError {
    #[error("invalid encoder input: {0}")]
    Argument(String),
    /// `layer` 0 is the token input, `1..=depth` the transformer blocks,
    /// `depth + 1` the output head.
    #[error("non-finite activation at layer {layer}")]
    NumericFault { layer: usize },
    #[error("invalid call sequence: {0}")]
    State(&'static str),
    #[error("malformed checkpoint: {0}")]
    Format(String),
    #[error("checkpoint version {found} is not supported (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("tensor `{tensor}` has shape {found:?}, expected {expected:?}")]
    ShapeMismatch {
        tensor: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error("checkpoint lacks tensor `{0}`")]
    MissingTensor(String),
    #[error("checkpoint config: {0}")]
    Config(#[from] serde_json::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Tokenizer(#[from] TokenizerError),
}

/// Named transformer shapes `(depth, width, heads)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Nano,
    Tiny,
    Small,
    Base,
    Large,
}

impl Preset {
    pub const ALL: [Preset; 5] = [
        Preset::Nano,
        Preset::Tiny,
        Preset::Small,
        Preset::Base,
        Preset::Large,
    ];

    pub fn shape(self) -> (usize, usize, usize) {
        match self {
            Preset::Nano => (2, 64, 2),
            Preset::Tiny => (12, 192, 3),
            Preset::Small => (12, 384, 6),
            Preset::Base => (12, 768, 12),
            Preset::Large => (24, 1024, 16),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Preset::Nano => "nano",
            Preset::Tiny => "tiny",
            Preset::Small => "small",
            Preset::Base => "base",
            Preset::Large => "large",
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = EncoderError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| {
                EncoderError::Argument(format!(
                    "unknown preset `{s}` (expected nano, tiny, small, base or large)"
                ))
            })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub depth: usize,
    pub width: usize,
    pub heads: usize,
    /// Teacher embedding dimension.
    pub clip_dim: usize,
}

impl EncoderConfig {
    pub fn preset(preset: Preset, clip_dim: usize) -> Self {
        let (depth, width, heads) = preset.shape();
        EncoderConfig {
            depth,
            width,
            heads,
            clip_dim,
        }
    }

    pub fn head_dim(&self) -> usize {
        self.width / self.heads
    }

    pub fn mlp_dim(&self) -> usize {
        4 * self.width
    }

    pub fn validate(&self) -> Result<(), EncoderError> {
        if self.depth == 0 || self.width == 0 || self.heads == 0 || self.clip_dim == 0 {
            return Err(EncoderError::Argument(
                "depth, width, heads and clip_dim must be positive".into(),
            ));
        }
        if !self.width.is_multiple_of(self.heads) {
            return Err(EncoderError::Argument(format!(
                "width {} is not divisible by {} heads",
                self.width, self.heads
            )));
        }
        Ok(())
    }
}

/// Output embedding of one gaussian asset.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding<T> {
    pub vector: Array1<T>,
    pub normalized: bool,
}

impl<T: Real> Embedding<T> {
    pub fn norm(&self) -> T {
        self.vector.dot(&self.vector).sqrt()
    }

    pub fn to_f32(&self) -> Vec<f32> {
        self.vector.iter().map(|v| v.as_f64() as f32).collect()
    }
}
