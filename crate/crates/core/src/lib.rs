//! Encode 3D Gaussian Splatting assets into embeddings that live in the same
//! space as a frozen image/text teacher, train that encoder contrastively, and
//! measure the alignment with retrieval and classification metrics.
//!
//! The pipeline, bottom-up:
//!
//! * [`assets`]: binary PLY gaussian clouds, teacher embedding tables, triplet
//!   manifests and a synthetic fixture generator.
//! * [`tokenizer`]: farthest point sampling, kNN patches, attribute
//!   normalization, space-filling-curve orderings and the patch refinement block.
//! * [`encoder`]: a pre-norm transformer over the patch tokens with hand-written
//!   backpropagation and a checkpoint format.
//! * [`alignment`]: the text and view-voted image contrastive objectives and the
//!   AdamW training loop.
//! * [`eval`]: recall@K retrieval, zero-shot and few-shot classification.

pub mod alignment;
pub mod assets;
pub mod encoder;
pub mod eval;
pub mod gradcheck;
pub mod nn;
pub mod par;
pub mod params;
pub mod real;
pub mod rng;
pub mod tokenizer;

mod error;

pub use error::{Error, Result};
pub use real::Real;
