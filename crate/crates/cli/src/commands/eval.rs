//! `gsalign eval`: retrieval, zero-shot and few-shot scores for a checkpoint.

use anyhow::{bail, Context};
use gsalign::alignment::load_clouds;
use gsalign::assets::{load_manifest, EmbeddingTable, TripletManifest};
use gsalign::encoder::{load_checkpoint, load_model};
use gsalign::eval::{
    few_shot_eval, retrieval_eval, zero_shot_classify, EvalReport, LabeledEmbeddings,
};
use gsalign::{par, Real};
use log::{info, warn};

use super::{create_dir, write_file};
use crate::config::{RunConfig, Split};
use crate::EvalArgs;

pub const REPORT_JSON: &str = "eval_report.json";
pub const REPORT_TEXT: &str = "eval_report.txt";

fn select(manifest: &TripletManifest, config: &RunConfig) -> TripletManifest {
    let (train, held) = manifest.split_holdout(config.holdout_per_class);
    match config.eval.split {
        Split::Auto if config.holdout_per_class > 0 => held,
        Split::Auto | Split::All => manifest.clone(),
        Split::Train => train,
        Split::Held => held,
    }
}

/// Scores the checkpoint named by `config` on the selected split.
pub fn execute(config: &RunConfig) -> anyhow::Result<EvalReport> {
    config.validate_inputs()?;
    if config.eval.zero_shot && config.data.classes.is_none() {
        bail!("zero-shot classification needs a class-name embedding table (pass --classes)");
    }
    if !config.eval.retrieval && !config.eval.zero_shot && config.eval.few_shot.is_empty() {
        bail!("no metric selected (use --retrieval all, --zero-shot or --few-shot NxM)");
    }
    par::with_threads(config.threads, || {
        if config.f64 {
            evaluate::<f64>(config)
        } else {
            evaluate::<f32>(config)
        }
    })
}

fn evaluate<T: Real>(config: &RunConfig) -> anyhow::Result<EvalReport> {
    let path = config.checkpoint_path();
    let (model, load, _) = load_model::<T>(&path, config.seed)
        .with_context(|| format!("loading checkpoint {}", path.display()))?;
    for w in &load.warnings {
        warn!("{w}");
    }
    let manifest = load_manifest(config.require_manifest()?)?;
    let teacher = EmbeddingTable::load(config.require_embeddings()?)?;
    manifest.validate_against(&teacher)?;
    if manifest.dim != model.config.encoder.clip_dim {
        bail!(
            "manifest embeddings have dimension {} but the checkpoint projects to {}",
            manifest.dim,
            model.config.encoder.clip_dim
        );
    }
    let subset = select(&manifest, config);
    if subset.is_empty() {
        bail!("the selected split has no objects");
    }
    info!("embedding {} objects", subset.len());
    let clouds = load_clouds(&subset, model.config.tokenizer.points, config.seed)?;
    let embedded = par::map_slice(&clouds, |c| model.embed(c))
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
    let mut gaussian = EmbeddingTable::new(manifest.dim);
    for (entry, e) in subset.entries.iter().zip(&embedded) {
        gaussian.push(entry.object_key(), &e.to_f32())?;
    }

    let mut report = EvalReport {
        config: config.to_value(),
        ..Default::default()
    };
    if config.eval.retrieval {
        report.retrieval = retrieval_eval(&gaussian, &teacher, &subset)?;
    }
    if config.eval.zero_shot || !config.eval.few_shot.is_empty() {
        let data = LabeledEmbeddings::from_manifest(&gaussian, &subset)?;
        if config.eval.zero_shot {
            let classes_path = config
                .data
                .classes
                .as_deref()
                .expect("checked before evaluation");
            let classes = EmbeddingTable::load(classes_path)?;
            report.zero_shot = Some(zero_shot_classify(&data, &classes)?);
        }
        for spec in &config.eval.few_shot {
            report.few_shot.push(
                few_shot_eval(
                    &data,
                    spec.n_way,
                    spec.m_shot,
                    config.eval.runs,
                    config.eval.seed,
                )
                .with_context(|| format!("{spec} few-shot"))?,
            );
        }
    }
    Ok(report)
}

/// Base config: `--config` if given, else the run echoed in the checkpoint.
pub fn resolve(a: &EvalArgs) -> anyhow::Result<RunConfig> {
    let base = match (&a.common.config, &a.common.checkpoint) {
        (Some(path), _) => RunConfig::load(path)?,
        (None, Some(ckpt)) => {
            let c = load_checkpoint(ckpt)
                .with_context(|| format!("loading checkpoint {}", ckpt.display()))?;
            match c.config.get("run") {
                Some(run) => RunConfig::from_value(run)?,
                None => RunConfig::default(),
            }
        }
        (None, None) => bail!("eval needs --checkpoint or --config"),
    };
    let mut config = a.apply(base);
    if a.common.out.is_none() && a.common.checkpoint.is_some() {
        // Reports land next to the checkpoint being scored.
        config.data.out = None;
    }
    Ok(config)
}

pub fn run(a: &EvalArgs) -> anyhow::Result<()> {
    let config = resolve(a)?;
    let report = execute(&config)?;
    let out = config.out_dir();
    create_dir(&out)?;
    let table = report.to_table();
    write_file(&out.join(REPORT_JSON), report.to_json() + "\n")?;
    write_file(&out.join(REPORT_TEXT), &table)?;
    print!("{table}");
    println!("report {}", out.join(REPORT_JSON).display());
    Ok(())
}
