//! Command-line front end: `fixtures`, `train`, `eval` and `inspect`.
//!
//! Each command resolves a [`config::RunConfig`] (defaults, then an optional
//! JSON file, then flags), validates every referenced path, and runs inside a
//! worker pool capped by `--threads`.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gsalign::alignment::ImageLoss;
use gsalign::encoder::Preset;
use gsalign::tokenizer::parse_orderings;

pub mod commands;
pub mod config;

use config::{FewShotSpec, RunConfig, Split};

#[derive(Debug, Parser)]
#[command(
    name = "gsalign",
    version,
    about = "Align gaussian-splat encoders to frozen image/text embeddings"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic triplet dataset.
    Fixtures(FixturesArgs),
    /// Train an encoder and write a checkpoint plus a per-step log.
    Train(TrainArgs),
    /// Score a checkpoint with retrieval and classification metrics.
    Eval(EvalArgs),
    /// Summarize PLY, checkpoint, embedding-table or manifest files.
    Inspect(InspectArgs),
}

#[derive(Debug, Args)]
pub struct FixturesArgs {
    #[arg(long, default_value_t = 8)]
    pub classes: usize,
    #[arg(long, default_value_t = 40)]
    pub per_class: usize,
    #[arg(long, default_value_t = 5)]
    pub views: usize,
    #[arg(long, default_value_t = 64)]
    pub dim: usize,
    /// Caption and view noise scale.
    #[arg(long, default_value_t = 0.1)]
    pub noise: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Gaussians per cloud.
    #[arg(long, default_value_t = 1024)]
    pub points: usize,
    #[arg(long)]
    pub out: PathBuf,
}

/// Inputs and run-wide switches shared by `train` and `eval`.
#[derive(Debug, Args)]
pub struct CommonArgs {
    /// JSON run configuration; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Fixture directory: fills manifest, embeddings and classes from the standard file names.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Teacher embedding table for captions and views.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Class-name embedding table for zero-shot classification.
    #[arg(long)]
    pub classes: Option<PathBuf>,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker cap; 1 is the serial reference mode.
    #[arg(long)]
    pub threads: Option<usize>,
    /// 64-bit arithmetic.
    #[arg(long)]
    pub f64: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ImageLossArg {
    Voting,
    Literal,
    Off,
}

impl From<ImageLossArg> for ImageLoss {
    fn from(a: ImageLossArg) -> Self {
        match a {
            ImageLossArg::Voting => ImageLoss::Voting,
            ImageLossArg::Literal => ImageLoss::Literal,
            ImageLossArg::Off => ImageLoss::Off,
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, value_parser = parse_preset)]
    pub preset: Option<Preset>,
    /// Comma-separated subset of xyz, hilbert, z_order.
    #[arg(long)]
    pub orderings: Option<String>,
    /// Views sampled per object per step.
    #[arg(long)]
    pub views: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch: Option<usize>,
    /// Stop after this many steps.
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Weight the text contrastive terms by raw view cosines instead of per-view voting.
    #[arg(long, conflicts_with = "image_loss")]
    pub eq4_literal: bool,
    #[arg(long, value_enum)]
    pub image_loss: Option<ImageLossArg>,
    /// Objects per class withheld from training.
    #[arg(long)]
    pub holdout_per_class: Option<usize>,
    /// Learning rate outside the tokenizer.
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub lr_tokenizer: Option<f64>,
    /// Patches per cloud.
    #[arg(long)]
    pub patches: Option<usize>,
    /// Gaussians per patch.
    #[arg(long)]
    pub neighbors: Option<usize>,
    /// Gaussians each cloud is resampled to.
    #[arg(long)]
    pub points: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// `all` for the four retrieval directions, `none` to skip.
    #[arg(long, value_parser = ["all", "none"])]
    pub retrieval: Option<String>,
    /// Classify against the class-name table.
    #[arg(long)]
    pub zero_shot: bool,
    /// `NxM` episode shapes, comma-separated or repeated.
    #[arg(long, value_delimiter = ',')]
    pub few_shot: Vec<FewShotSpec>,
    /// Few-shot episodes per shape.
    #[arg(long)]
    pub runs: Option<usize>,
    /// Few-shot sampler seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub split: Option<Split>,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    #[arg(required = true)]
    pub paths: Vec<PathBuf>,
    #[arg(long)]
    pub json: bool,
}

fn parse_preset(s: &str) -> Result<Preset, String> {
    s.parse()
        .map_err(|e: gsalign::encoder::EncoderError| e.to_string())
}

impl CommonArgs {
    fn base_config(&self) -> anyhow::Result<Option<RunConfig>> {
        self.config.as_deref().map(RunConfig::load).transpose()
    }

    fn apply(&self, c: &mut RunConfig) {
        if let Some(dir) = &self.data {
            c.data.manifest = Some(dir.join("manifest.json"));
            c.data.embeddings = Some(dir.join("embeddings.gseb"));
            let classes = dir.join("classes.gseb");
            if classes.is_file() {
                c.data.classes = Some(classes);
            }
        }
        let set = |slot: &mut Option<PathBuf>, v: &Option<PathBuf>| {
            if v.is_some() {
                slot.clone_from(v);
            }
        };
        set(&mut c.data.manifest, &self.manifest);
        set(&mut c.data.embeddings, &self.embeddings);
        set(&mut c.data.classes, &self.classes);
        set(&mut c.data.checkpoint, &self.checkpoint);
        set(&mut c.data.out, &self.out);
        if self.threads.is_some() {
            c.threads = self.threads;
        }
        if self.f64 {
            c.f64 = true;
        }
    }
}

impl TrainArgs {
    /// Defaults, then the config file, then flags.
    pub fn resolve(&self) -> anyhow::Result<RunConfig> {
        let mut c = self.common.base_config()?.unwrap_or_default();
        self.common.apply(&mut c);
        if let Some(p) = self.preset {
            c.preset = p;
            c.encoder = None;
        }
        if let Some(o) = &self.orderings {
            c.tokenizer.orderings = parse_orderings(o)?;
        }
        let t = &mut c.train;
        macro_rules! set {
            ($slot:expr, $v:expr) => {
                if let Some(v) = $v {
                    $slot = v;
                }
            };
        }
        set!(t.views, self.views);
        set!(t.epochs, self.epochs);
        set!(t.batch_size, self.batch);
        set!(t.lr_other, self.lr);
        set!(t.lr_tokenizer, self.lr_tokenizer);
        if let Some(steps) = self.steps {
            t.max_steps = Some(steps);
            if self.epochs.is_none() {
                // Every epoch runs at least one step, so the step budget binds.
                t.epochs = t.epochs.max(steps);
            }
        }
        if self.eq4_literal {
            t.image_loss = ImageLoss::Literal;
        }
        set!(t.image_loss, self.image_loss.map(ImageLoss::from));
        set!(c.seed, self.seed);
        set!(c.holdout_per_class, self.holdout_per_class);
        set!(c.tokenizer.num_patches, self.patches);
        set!(c.tokenizer.neighbors, self.neighbors);
        set!(c.tokenizer.points, self.points);
        c.normalize();
        Ok(c)
    }
}

impl EvalArgs {
    /// Applies eval flags over `base`.
    ///
    /// Naming any metric flag replaces the configured metric selection.
    pub fn apply(&self, mut c: RunConfig) -> RunConfig {
        self.common.apply(&mut c);
        let e = &mut c.eval;
        if self.retrieval.is_some() || self.zero_shot || !self.few_shot.is_empty() {
            e.retrieval = self.retrieval.as_deref() == Some("all");
            e.zero_shot = self.zero_shot;
            e.few_shot.clone_from(&self.few_shot);
        }
        if let Some(r) = self.runs {
            e.runs = r;
        }
        if let Some(s) = self.seed {
            e.seed = s;
        }
        if let Some(s) = self.split {
            e.split = s;
        }
        c
    }
}

/// Runs one parsed command line.
pub fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Fixtures(a) => commands::fixtures::run(&a),
        Command::Train(a) => commands::train::run(&a),
        Command::Eval(a) => commands::eval::run(&a),
        Command::Inspect(a) => commands::inspect::run(&a),
    }
}
