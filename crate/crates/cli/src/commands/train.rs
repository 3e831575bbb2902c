//! `gsalign train`: contrastive training on a manifest, JSONL step log, checkpoint.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use anyhow::Context;
use gsalign::alignment::{build_training_set, load_clouds, StepRecord, Trainer};
use gsalign::assets::{load_manifest, EmbeddingTable};
use gsalign::encoder::{save_model, GaussianEncoder};
use gsalign::{par, Real};
use log::info;
use serde::Serialize;

use super::{create_dir, write_file};
use crate::config::RunConfig;
use crate::TrainArgs;

pub const LOG_FILE: &str = "train_log.jsonl";
pub const RUN_CONFIG_FILE: &str = "run_config.json";

/// One JSONL line: the step record plus which objective and orderings ran.
#[derive(Serialize)]
struct LogLine<'a> {
    #[serde(flatten)]
    record: &'a StepRecord,
    image_loss: &'a str,
    orderings: &'a [&'a str],
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub config: RunConfig,
    pub log: Vec<StepRecord>,
    pub checkpoint: PathBuf,
    pub log_path: PathBuf,
    pub train_objects: usize,
    pub held_objects: usize,
    /// Positional tables in the trained encoder, one per ordering.
    pub positional_tables: usize,
}

/// Trains under `config` with its thread cap and numeric mode.
pub fn execute(config: &RunConfig) -> anyhow::Result<TrainOutcome> {
    let mut config = config.clone();
    config.normalize();
    config.validate_inputs()?;
    par::with_threads(config.threads, || {
        if config.f64 {
            train_with::<f64>(&config)
        } else {
            train_with::<f32>(&config)
        }
    })
}

fn train_with<T: Real>(config: &RunConfig) -> anyhow::Result<TrainOutcome> {
    let manifest = load_manifest(config.require_manifest()?)?;
    let table = EmbeddingTable::load(config.require_embeddings()?)?;
    let (train, held) = manifest.split_holdout(config.holdout_per_class);
    let model_config = config.model_config(manifest.dim);
    model_config.validate()?;

    let clouds = load_clouds(&train, model_config.tokenizer.points, config.seed)?;
    let objects = build_training_set::<T>(&train, &table, &clouds, &model_config.tokenizer)?;
    info!(
        "{} training objects, {} held out, {} workers, {}-bit",
        objects.len(),
        held.len(),
        par::current_threads(),
        if config.f64 { 64 } else { 32 }
    );
    let model = GaussianEncoder::<T>::new(model_config, config.seed)?;
    let positional_tables = model.params.encoder.pos.len();
    let mut trainer = Trainer::new(model, config.train.clone())?;

    let out = config.out_dir();
    create_dir(&out)?;
    let log_path = out.join(LOG_FILE);
    let mut writer = BufWriter::new(
        File::create(&log_path).with_context(|| format!("creating {}", log_path.display()))?,
    );
    let orderings: Vec<&str> = config
        .tokenizer
        .orderings
        .iter()
        .map(|o| o.name())
        .collect();
    let image_loss = config.image_loss_name();
    let mut write_error = None;
    let log = trainer.run(&objects, |record| {
        if write_error.is_none() {
            let line = LogLine {
                record,
                image_loss,
                orderings: &orderings,
            };
            let written = serde_json::to_writer(&mut writer, &line)
                .map_err(std::io::Error::from)
                .and_then(|()| writer.write_all(b"\n"));
            write_error = written.err();
        }
        if record.step == 1 || record.step % 50 == 0 {
            info!(
                "step {} epoch {} loss {:.4} (text {:.4}, image {:.4}) tau {:.4}",
                record.step, record.epoch, record.total, record.l_text, record.l_img, record.tau
            );
        }
    })?;
    if let Some(e) = write_error {
        return Err(e).with_context(|| format!("writing {}", log_path.display()));
    }
    writer
        .flush()
        .with_context(|| format!("writing {}", log_path.display()))?;
    if log.is_empty() {
        anyhow::bail!(
            "no training step ran (check epochs, --steps and the number of training objects)"
        );
    }

    let checkpoint = config.checkpoint_path();
    if let Some(dir) = checkpoint.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    save_model(
        &checkpoint,
        &trainer.model,
        config.to_value(),
        trainer.state_tensors(),
    )?;
    write_file(&out.join(RUN_CONFIG_FILE), config.to_json() + "\n")?;

    Ok(TrainOutcome {
        config: config.clone(),
        log,
        checkpoint,
        log_path,
        train_objects: objects.len(),
        held_objects: held.len(),
        positional_tables,
    })
}

pub fn run(a: &TrainArgs) -> anyhow::Result<()> {
    let outcome = execute(&a.resolve()?)?;
    let (first, last) = (&outcome.log[0], outcome.log.last().expect("non-empty log"));
    println!(
        "{} steps on {} objects: loss {:.4} -> {:.4}, tau {:.4}",
        outcome.log.len(),
        outcome.train_objects,
        first.total,
        last.total,
        last.tau
    );
    println!("checkpoint {}", outcome.checkpoint.display());
    println!("log {}", outcome.log_path.display());
    Ok(())
}
