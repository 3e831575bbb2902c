//! Run configuration: JSON file, command-line overrides, and the resolved model shape.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context};
use gsalign::alignment::{ImageLoss, TrainConfig};
use gsalign::encoder::{EncoderConfig, ModelConfig, Preset};
use gsalign::tokenizer::TokenizerConfig;
use serde::{Deserialize, Serialize};

/// Input files and output locations.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub manifest: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    /// Class-name embeddings for zero-shot classification.
    pub classes: Option<PathBuf>,
    /// Checkpoint written by `train`, read by `eval`.
    pub checkpoint: Option<PathBuf>,
    /// Directory for logs, reports and the default checkpoint.
    pub out: Option<PathBuf>,
}

/// Which part of the manifest `eval` scores.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    /// The held-out part when `holdout_per_class > 0`, else everything.
    #[default]
    Auto,
    All,
    Train,
    Held,
}

impl FromStr for Split {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> anyhow::Result<Self> {
        Ok(match s {
            "auto" => Split::Auto,
            "all" => Split::All,
            "train" => Split::Train,
            "held" | "holdout" => Split::Held,
            other => bail!("unknown split `{other}` (expected auto, all, train or held)"),
        })
    }
}

/// `n`-way `m`-shot episode shape, written `NxM`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FewShotSpec {
    pub n_way: usize,
    pub m_shot: usize,
}

impl FromStr for FewShotSpec {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> anyhow::Result<Self> {
        let (n, m) = s
            .to_ascii_lowercase()
            .split_once('x')
            .map(|(n, m)| (n.trim().parse::<usize>(), m.trim().parse::<usize>()))
            .with_context(|| format!("few-shot spec `{s}` is not of the form NxM"))?;
        let (n_way, m_shot) = (n?, m?);
        if n_way == 0 || m_shot == 0 {
            bail!("few-shot spec `{s}` needs positive N and M");
        }
        Ok(FewShotSpec { n_way, m_shot })
    }
}

impl fmt::Display for FewShotSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.n_way, self.m_shot)
    }
}

impl Serialize for FewShotSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for FewShotSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub retrieval: bool,
    pub zero_shot: bool,
    pub few_shot: Vec<FewShotSpec>,
    pub runs: usize,
    /// Seed of the few-shot episode sampler.
    pub seed: u64,
    pub split: Split,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            retrieval: true,
            zero_shot: false,
            few_shot: Vec::new(),
            runs: 5,
            seed: 0,
            split: Split::Auto,
        }
    }
}

/// Everything a run depends on. Serialized verbatim into every artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub preset: Preset,
    /// Explicit transformer shape; overrides `preset` when present.
    pub encoder: Option<EncoderConfig>,
    pub tokenizer: TokenizerConfig,
    pub train: TrainConfig,
    pub data: DataConfig,
    pub eval: EvalConfig,
    /// Root seed: model init, point subsampling, batching and view sampling.
    pub seed: u64,
    /// Objects per class withheld from training (the last ones of each class).
    pub holdout_per_class: usize,
    /// 64-bit arithmetic instead of 32-bit.
    pub f64: bool,
    /// Worker cap; `None` uses every core.
    pub threads: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            preset: Preset::Nano,
            encoder: None,
            tokenizer: TokenizerConfig::default(),
            train: TrainConfig::default(),
            data: DataConfig::default(),
            eval: EvalConfig::default(),
            seed: 0,
            holdout_per_class: 0,
            f64: false,
            threads: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn from_value(value: &serde_json::Value) -> anyhow::Result<Self> {
        serde_json::from_value(value.clone())
            .context("run configuration echoed in the checkpoint is not readable")
    }

    pub fn to_value(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("run config serializes")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("run config serializes")
    }

    /// Makes derived fields agree: the train seed is the root seed.
    pub fn normalize(&mut self) {
        self.train.seed = self.seed;
    }

    /// Transformer shape for teacher dimension `clip_dim`.
    pub fn encoder_config(&self, clip_dim: usize) -> EncoderConfig {
        let mut e = self
            .encoder
            .clone()
            .unwrap_or_else(|| EncoderConfig::preset(self.preset, clip_dim));
        e.clip_dim = clip_dim;
        e
    }

    /// Full model shape; the token width follows the encoder width.
    pub fn model_config(&self, clip_dim: usize) -> ModelConfig {
        let encoder = self.encoder_config(clip_dim);
        let mut tokenizer = self.tokenizer.clone();
        tokenizer.token_dim = encoder.width;
        ModelConfig { tokenizer, encoder }
    }

    pub fn image_loss_name(&self) -> &'static str {
        self.train.image_loss.name()
    }

    pub fn uses_literal_image_loss(&self) -> bool {
        self.train.image_loss == ImageLoss::Literal
    }

    /// Directory for outputs: `data.out`, else the checkpoint's directory, else `.`.
    pub fn out_dir(&self) -> PathBuf {
        if let Some(out) = &self.data.out {
            return out.clone();
        }
        self.data
            .checkpoint
            .as_deref()
            .and_then(Path::parent)
            .filter(|p| !p.as_os_str().is_empty())
            .map_or_else(|| PathBuf::from("."), Path::to_path_buf)
    }

    pub fn checkpoint_path(&self) -> PathBuf {
        self.data
            .checkpoint
            .clone()
            .unwrap_or_else(|| self.out_dir().join("model.gsck"))
    }

    pub fn require_manifest(&self) -> anyhow::Result<&Path> {
        self.data
            .manifest
            .as_deref()
            .context("no manifest given (use --manifest, --data or the config file)")
    }

    pub fn require_embeddings(&self) -> anyhow::Result<&Path> {
        self.data.embeddings.as_deref().context(
            "no teacher embedding table given (use --embeddings, --data or the config file)",
        )
    }

    /// Checks paths before any work starts.
    pub fn validate_inputs(&self) -> anyhow::Result<()> {
        for (what, path) in [
            ("manifest", self.require_manifest()?),
            ("embedding table", self.require_embeddings()?),
        ] {
            if !path.is_file() {
                bail!("{what} {} does not exist", path.display());
            }
        }
        if let Some(c) = &self.data.classes {
            if !c.is_file() {
                bail!("class embedding table {} does not exist", c.display());
            }
        }
        if self.threads == Some(0) {
            bail!("--threads must be at least 1");
        }
        self.train.validate()?;
        Ok(())
    }
}
