//! Tokenizer refinement plus transformer as one trainable model.

use ndarray::{ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::transformer::{encode_backward, encode_tokens, EncoderParams, EncoderTrace};
use super::{Embedding, EncoderConfig, EncoderError};
use crate::assets::GaussianCloud;
use crate::nn::BranchSignature;
use crate::params::{ParamMut, ParamRef, ParamSet};
use crate::tokenizer::{
    prepare, refine_backward_batch, refine_forward_batch, BnMode, BnStats, PreparedCloud,
    RefineBatch, RefineInput, TokenSequence, TokenizerConfig, TokenizerParams,
};
use crate::Real;
use crate::{par, rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub tokenizer: TokenizerConfig,
    pub encoder: EncoderConfig,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), EncoderError> {
        self.tokenizer.validate()?;
        self.encoder.validate()?;
        if self.tokenizer.token_dim != self.encoder.width {
            return Err(EncoderError::Argument(format!(
                "token_dim {} differs from encoder width {}",
                self.tokenizer.token_dim, self.encoder.width
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<T> {
    pub tokenizer: TokenizerParams<T>,
    pub encoder: EncoderParams<T>,
}

impl<T: Real> ModelParams<T> {
    pub fn init(config: &ModelConfig, seed: u64) -> Self {
        ModelParams {
            tokenizer: Self::init_tokenizer(config, seed),
            encoder: EncoderParams::init(
                &config.encoder,
                &config.tokenizer.orderings,
                config.tokenizer.num_patches,
                &mut rng::stream(seed, "init/encoder"),
            ),
        }
    }

    pub fn init_tokenizer(config: &ModelConfig, seed: u64) -> TokenizerParams<T> {
        TokenizerParams::init(&config.tokenizer, &mut rng::stream(seed, "init/tokenizer"))
    }
}

impl<T: Real> ParamSet<T> for ModelParams<T> {
    fn params(&self) -> Vec<ParamRef<'_, T>> {
        let mut out = self.tokenizer.params();
        out.iter_mut()
            .for_each(|p| p.name.insert_str(0, "tokenizer/"));
        let mut enc = self.encoder.params();
        enc.iter_mut()
            .for_each(|p| p.name.insert_str(0, "encoder/"));
        out.extend(enc);
        out
    }

    fn params_mut(&mut self) -> Vec<ParamMut<'_, T>> {
        let mut out = self.tokenizer.params_mut();
        out.iter_mut()
            .for_each(|p| p.name.insert_str(0, "tokenizer/"));
        let mut enc = self.encoder.params_mut();
        enc.iter_mut()
            .for_each(|p| p.name.insert_str(0, "encoder/"));
        out.extend(enc);
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Batch norm uses the statistics of the clouds passed together.
    Train,
    /// Batch norm uses the running statistics.
    Eval,
}

/// Intermediates of one forward pass over a batch of clouds.
pub struct ForwardTrace<T> {
    pub refine: RefineBatch<T>,
    pub encoder: Vec<EncoderTrace<T>>,
}

impl<T> ForwardTrace<T> {
    pub fn len(&self) -> usize {
        self.encoder.len()
    }

    pub fn is_empty(&self) -> bool {
        self.encoder.is_empty()
    }

    /// Fingerprint of all ReLU and max-pool branch choices in the batch.
    pub fn signature(&self) -> BranchSignature {
        let mut s = BranchSignature::default();
        for t in &self.refine.traces {
            s.mix(t.signature.0);
        }
        s
    }

    /// Batch-norm statistics observed in this pass (unbiased variance).
    pub fn batch_stats(&self) -> &BnStats<T> {
        &self.refine.stats
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianEncoder<T> {
    pub config: ModelConfig,
    pub params: ModelParams<T>,
    pub bn: BnStats<T>,
}

impl<T: Real> GaussianEncoder<T> {
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self, EncoderError> {
        config.validate()?;
        let params = ModelParams::init(&config, seed);
        let bn = BnStats::new(config.tokenizer.conv_channels);
        Ok(GaussianEncoder { config, params, bn })
    }

    /// Parameter-free tokenizer stage for `cloud`.
    pub fn prepare(&self, cloud: &GaussianCloud) -> Result<PreparedCloud, EncoderError> {
        Ok(prepare(cloud, &self.config.tokenizer)?)
    }

    /// Embeds several clouds in one pass. In training mode they share
    /// batch-norm statistics, so each embedding depends on the whole batch.
    pub fn forward_batch(
        &self,
        prepared: &[&PreparedCloud],
        mode: Mode,
    ) -> Result<(Vec<Embedding<T>>, ForwardTrace<T>), EncoderError> {
        let bn_mode = match mode {
            Mode::Train => BnMode::Train,
            Mode::Eval => BnMode::Eval(&self.bn),
        };
        let inputs: Vec<RefineInput<'_>> = prepared
            .iter()
            .map(|p| RefineInput::of(&p.patches))
            .collect();
        let mut refine = refine_forward_batch(&inputs, &self.params.tokenizer, bn_mode)?;
        let tokens = std::mem::take(&mut refine.tokens);
        let encoded = par::map_vec(tokens, |i, tokens| {
            let seq = TokenSequence {
                tokens,
                orderings: prepared[i].orderings.clone(),
                permutations: prepared[i].permutations.clone(),
            };
            encode_tokens(&seq, &self.params.encoder, &self.config.encoder)
        })
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
        let (embeddings, encoder) = encoded.into_iter().unzip();
        Ok((embeddings, ForwardTrace { refine, encoder }))
    }

    /// Single-cloud pass; in training mode the cloud is its own batch.
    pub fn forward(
        &self,
        prepared: &PreparedCloud,
        mode: Mode,
    ) -> Result<(Embedding<T>, ForwardTrace<T>), EncoderError> {
        let (mut e, trace) = self.forward_batch(&[prepared], mode)?;
        Ok((e.pop().expect("one cloud"), trace))
    }

    /// Accumulates into `grads` the parameter gradients for upstream
    /// `d_embeddings`, one row per cloud of the traced batch.
    pub fn backward(
        &self,
        trace: &ForwardTrace<T>,
        d_embeddings: &ArrayView2<T>,
        grads: &mut ModelParams<T>,
    ) {
        assert_eq!(
            d_embeddings.nrows(),
            trace.len(),
            "one upstream row per cloud"
        );
        let parts = par::map_range(trace.len(), |i| {
            let mut g = grads.encoder.zeros_like();
            let d_tokens = encode_backward(
                &trace.encoder[i],
                &d_embeddings.row(i),
                &self.params.encoder,
                &mut g,
            );
            (d_tokens, g)
        });
        let (d_tokens, encoder_grads): (Vec<_>, Vec<_>) = parts.into_iter().unzip();
        for g in &encoder_grads {
            grads.encoder.add_assign(g);
        }
        refine_backward_batch(
            &trace.refine,
            &d_tokens,
            &self.params.tokenizer,
            &mut grads.tokenizer,
        );
    }

    pub fn embed_prepared(&self, prepared: &PreparedCloud) -> Result<Embedding<T>, EncoderError> {
        Ok(self.forward(prepared, Mode::Eval)?.0)
    }

    /// Evaluation-mode embeddings, one per prepared cloud, in input order.
    pub fn embed_batch(
        &self,
        prepared: &[PreparedCloud],
    ) -> Result<Vec<Embedding<T>>, EncoderError> {
        par::map_slice(prepared, |p| self.embed_prepared(p))
            .into_iter()
            .collect()
    }

    /// Evaluation-mode embedding of a raw cloud.
    pub fn embed(&self, cloud: &GaussianCloud) -> Result<Embedding<T>, EncoderError> {
        self.embed_prepared(&self.prepare(cloud)?)
    }

    pub fn session(&self) -> Session<'_, T> {
        Session {
            model: self,
            pending: None,
        }
    }
}

/// Pairs each backward with the forward that precedes it.
pub struct Session<'a, T> {
    model: &'a GaussianEncoder<T>,
    pending: Option<ForwardTrace<T>>,
}

impl<T: Real> Session<'_, T> {
    pub fn forward(
        &mut self,
        prepared: &PreparedCloud,
        mode: Mode,
    ) -> Result<Embedding<T>, EncoderError> {
        let (e, trace) = self.model.forward(prepared, mode)?;
        self.pending = Some(trace);
        Ok(e)
    }

    pub fn forward_batch(
        &mut self,
        prepared: &[&PreparedCloud],
        mode: Mode,
    ) -> Result<Vec<Embedding<T>>, EncoderError> {
        let (e, trace) = self.model.forward_batch(prepared, mode)?;
        self.pending = Some(trace);
        Ok(e)
    }

    /// Consumes the pending single-cloud forward pass.
    pub fn backward(
        &mut self,
        d_embedding: &ArrayView1<T>,
        grads: &mut ModelParams<T>,
    ) -> Result<(), EncoderError> {
        self.backward_batch(&d_embedding.view().insert_axis(Axis(0)), grads)
    }

    /// Consumes the pending forward pass, one upstream row per cloud.
    pub fn backward_batch(
        &mut self,
        d_embeddings: &ArrayView2<T>,
        grads: &mut ModelParams<T>,
    ) -> Result<(), EncoderError> {
        let trace = self.pending.take().ok_or(EncoderError::State(
            "backward called without a preceding forward",
        ))?;
        if d_embeddings.nrows() != trace.len() {
            return Err(EncoderError::Argument(format!(
                "{} upstream rows for {} clouds",
                d_embeddings.nrows(),
                trace.len()
            )));
        }
        self.model.backward(&trace, d_embeddings, grads);
        Ok(())
    }
}
