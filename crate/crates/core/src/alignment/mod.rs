//! Contrastive alignment of the gaussian encoder to frozen teacher embeddings.

mod data;
mod loss;
mod optim;
mod train;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assets::AssetError;
use crate::encoder::EncoderError;
use crate::tokenizer::TokenizerError;

pub use data::{build_training_set, load_clouds, TrainingObject};
pub use loss::{
    contra, loss_img, loss_text, raw_view_scores, total_loss, voting_scores, Batch, ImageLoss,
    LossBreakdown, LossGrads, Temperature,
};
pub use optim::{AdamConfig, AdamW};
pub use train::{sample_views, StepRecord, Trainer};

#[derive(Debug, Error)]
pub enum AlignError {
    #[error("invalid training input: {0}")]
    Argument(String),
    #[error("numeric error: {0}")]
    NonFinite(String),
    #[error("step {step} aborted ({reason}); batch objects: {}", objects.join(", "))]
    Step {
        step: usize,
        objects: Vec<String>,
        reason: String,
    },
    #[error(transparent)]
    Encoder(#[from] EncoderError),
    #[error(transparent)]
    Asset(#[from] AssetError),
    #[error(transparent)]
    Tokenizer(#[from] TokenizerError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    /// Views sampled per object per step.
    pub views: usize,
    pub seed: u64,
    pub init_tau: f64,
    pub weight_decay: f64,
    pub lr_tokenizer: f64,
    pub lr_other: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub bn_momentum: f64,
    pub image_loss: ImageLoss,
    /// Stop after this many steps even if epochs remain.
    pub max_steps: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let adam = AdamConfig::default();
        TrainConfig {
            epochs: 5,
            batch_size: 16,
            views: 5,
            seed: 0,
            init_tau: 0.07,
            weight_decay: adam.weight_decay,
            lr_tokenizer: adam.lr_tokenizer,
            lr_other: adam.lr_other,
            beta1: adam.beta1,
            beta2: adam.beta2,
            eps: adam.eps,
            bn_momentum: 0.1,
            image_loss: ImageLoss::Voting,
            max_steps: None,
        }
    }
}

impl TrainConfig {
    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr_tokenizer: self.lr_tokenizer,
            lr_other: self.lr_other,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
            weight_decay: self.weight_decay,
        }
    }

    pub fn validate(&self) -> Result<(), AlignError> {
        let arg = |m: &str| Err(AlignError::Argument(m.into()));
        if self.batch_size < 2 {
            return arg("batch size must be at least 2");
        }
        if self.views == 0 {
            return arg("at least one view per object is required");
        }
        let positive = [self.lr_tokenizer, self.lr_other, self.init_tau, self.eps];
        if positive.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return arg("learning rates, init_tau and eps must be positive");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return arg("Adam betas must lie in [0, 1)");
        }
        if !(self.weight_decay >= 0.0) || !(0.0..=1.0).contains(&self.bn_momentum) {
            return arg("weight decay must be ≥ 0 and batch-norm momentum in [0, 1]");
        }
        Ok(())
    }
}
