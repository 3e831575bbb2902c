//! Gaussian cloud → ordered patch tokens.
//!
//! `prepare` does the parameter-free part once per cloud (FPS centers, kNN
//! groups, attribute normalization, one permutation per ordering strategy).
//! `refine` turns a prepared cloud into `g × d` tokens with learned weights.

mod curves;
mod fps;
mod normalize;
mod ordering;
mod refine;

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assets::GaussianCloud;
use crate::Real;

pub use curves::{hilbert_decode, hilbert_encode, morton_decode, morton_encode, MAX_BITS};
pub use fps::{farthest_point_sampling, knn_group};
pub use normalize::{normalize_attributes, quaternion_to_matrix, FEATURE_DIM, POINT_FEATURES};
pub use ordering::order_patches;
pub use refine::{
    refine_backward_batch, refine_forward, refine_forward_batch, refine_patches, BnMode, BnStats,
    RefineBatch, RefineInput, RefineTrace, TokenizerParams,
};

#[derive(Debug, Error)]
pub enum TokenizerError {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("cell coordinate {coord} out of range for {bits} bits")]
    CellRange { coord: u64, bits: u32 },
    #[error("shape mismatch: {0}")]
    Shape(String),
}

/// Patch serialization strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrderingStrategy {
    Xyz,
    Hilbert,
    ZOrder,
}

impl OrderingStrategy {
    pub const ALL: [OrderingStrategy; 3] = [
        OrderingStrategy::Xyz,
        OrderingStrategy::Hilbert,
        OrderingStrategy::ZOrder,
    ];

    pub fn name(self) -> &'static str {
        match self {
            OrderingStrategy::Xyz => "xyz",
            OrderingStrategy::Hilbert => "hilbert",
            OrderingStrategy::ZOrder => "z_order",
        }
    }
}

impl fmt::Display for OrderingStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OrderingStrategy {
    type Err = TokenizerError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "xyz" => Ok(OrderingStrategy::Xyz),
            "hilbert" => Ok(OrderingStrategy::Hilbert),
            "z" | "z_order" | "zorder" | "z-order" | "morton" => Ok(OrderingStrategy::ZOrder),
            other => Err(TokenizerError::Argument(format!(
                "unknown ordering `{other}`"
            ))),
        }
    }
}

/// Parse a comma-separated ordering list such as `xyz,hilbert,z`.
pub fn parse_orderings(s: &str) -> Result<Vec<OrderingStrategy>, TokenizerError> {
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(str::parse)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TokenizerConfig {
    /// Patch count `g`.
    pub num_patches: usize,
    /// Neighbors per patch `n`.
    pub neighbors: usize,
    pub orderings: Vec<OrderingStrategy>,
    /// Bits per axis for curve quantization.
    pub quant_bits: u32,
    /// Token width `d`; must equal the encoder width.
    pub token_dim: usize,
    /// Points per cloud after subsampling.
    pub points: usize,
    /// Hidden width of the position/color point MLP.
    pub point_hidden: usize,
    /// Channels of both 1×3 convolutions.
    pub conv_channels: usize,
}

impl Default for TokenizerConfig {
    fn default() -> Self {
        TokenizerConfig {
            num_patches: 64,
            neighbors: 16,
            orderings: OrderingStrategy::ALL.to_vec(),
            quant_bits: 10,
            token_dim: 64,
            points: 1024,
            point_hidden: 32,
            conv_channels: 32,
        }
    }
}

impl TokenizerConfig {
    pub fn validate(&self) -> Result<(), TokenizerError> {
        let arg = |m: String| Err(TokenizerError::Argument(m));
        if self.num_patches == 0 || self.neighbors == 0 {
            return arg("patch count and neighbor count must be positive".into());
        }
        if self.orderings.is_empty() {
            return arg("at least one ordering strategy is required".into());
        }
        if !(1..=MAX_BITS).contains(&self.quant_bits) {
            return arg(format!("quant_bits must be in 1..={MAX_BITS}"));
        }
        if self.neighbors > self.points || self.num_patches > self.points {
            return arg(format!(
                "g={} and n={} must not exceed the {} subsampled points",
                self.num_patches, self.neighbors, self.points
            ));
        }
        if self.token_dim == 0 || self.point_hidden == 0 || self.conv_channels == 0 {
            return arg("layer widths must be positive".into());
        }
        Ok(())
    }
}

/// FPS-centered kNN patches with normalized features.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchSet {
    /// Cloud index of each patch center, in FPS order.
    pub center_indices: Vec<usize>,
    pub centers: Vec<[f64; 3]>,
    /// `g × n` cloud indices, nearest first.
    pub groups: Vec<Vec<usize>>,
    /// `(g·n) × 19` features, patch-major.
    pub features: Array2<f64>,
    pub neighbors: usize,
    /// Zero-norm quaternions replaced by identity.
    pub degenerate_rotations: usize,
}

impl PatchSet {
    pub fn num_patches(&self) -> usize {
        self.centers.len()
    }
}

pub fn build_patches(
    cloud: &GaussianCloud,
    num_patches: usize,
    neighbors: usize,
) -> Result<PatchSet, TokenizerError> {
    let positions = cloud.positions();
    let center_indices = farthest_point_sampling(&positions, num_patches)?;
    let groups = knn_group(&positions, &center_indices, neighbors)?;
    let centers: Vec<[f64; 3]> = center_indices.iter().map(|&i| positions[i]).collect();
    let mut features = Array2::zeros((num_patches * neighbors, FEATURE_DIM));
    let mut degenerate = 0;
    for (p, (group, center)) in groups.iter().zip(&centers).enumerate() {
        let raw: Vec<_> = group.iter().map(|&i| cloud.points()[i]).collect();
        let (rows, bad) = normalize_attributes(&raw, *center);
        degenerate += bad;
        for (t, row) in rows.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                features[[p * neighbors + t, j]] = *v;
            }
        }
    }
    if degenerate > 0 {
        log::debug!(
            "{}: {degenerate} zero-norm quaternions replaced by identity",
            cloud.source_id()
        );
    }
    Ok(PatchSet {
        center_indices,
        centers,
        groups,
        features,
        neighbors,
        degenerate_rotations: degenerate,
    })
}

/// Parameter-free tokenizer output, reusable across training steps.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedCloud {
    pub patches: PatchSet,
    pub orderings: Vec<OrderingStrategy>,
    /// One permutation of patch indices per ordering; entry `j` is the patch
    /// placed at sequence position `j`.
    pub permutations: Vec<Vec<usize>>,
}

pub fn prepare(
    cloud: &GaussianCloud,
    config: &TokenizerConfig,
) -> Result<PreparedCloud, TokenizerError> {
    config.validate()?;
    if cloud.len() < config.num_patches.max(config.neighbors) {
        return Err(TokenizerError::Argument(format!(
            "cloud `{}` has {} points, fewer than g={} / n={}",
            cloud.source_id(),
            cloud.len(),
            config.num_patches,
            config.neighbors
        )));
    }
    let patches = build_patches(cloud, config.num_patches, config.neighbors)?;
    let permutations = config
        .orderings
        .iter()
        .map(|&s| order_patches(&patches.centers, s, config.quant_bits))
        .collect();
    Ok(PreparedCloud {
        patches,
        orderings: config.orderings.clone(),
        permutations,
    })
}

/// Tokens shared by all orderings plus each ordering's permutation.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenSequence<T> {
    /// `g × d`, in FPS patch order.
    pub tokens: Array2<T>,
    pub orderings: Vec<OrderingStrategy>,
    pub permutations: Vec<Vec<usize>>,
}

/// Full tokenizer in evaluation mode (running batch-norm statistics).
pub fn tokenize<T: Real>(
    cloud: &GaussianCloud,
    config: &TokenizerConfig,
    params: &TokenizerParams<T>,
    bn: &BnStats<T>,
) -> Result<TokenSequence<T>, TokenizerError> {
    let prepared = prepare(cloud, config)?;
    let tokens = refine_patches(&prepared.patches, params, bn)?;
    Ok(TokenSequence {
        tokens,
        orderings: prepared.orderings,
        permutations: prepared.permutations,
    })
}
