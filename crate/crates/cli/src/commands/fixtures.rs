//! `gsalign fixtures`: synthetic triplet datasets on disk.

use std::path::Path;

use anyhow::Context;
use gsalign::assets::{gen_synthetic_triplets, FixtureSpec, SyntheticSet};
use serde_json::json;

use super::{create_dir, write_file};
use crate::FixturesArgs;

pub fn spec_of(a: &FixturesArgs) -> FixtureSpec {
    FixtureSpec {
        classes: a.classes,
        per_class: a.per_class,
        views: a.views,
        dim: a.dim,
        noise: a.noise,
        seed: a.seed,
        points: a.points,
    }
}

/// Generates the set and writes it plus a `fixture.json` echo of `spec` into `out`.
pub fn generate(spec: &FixtureSpec, out: &Path) -> anyhow::Result<SyntheticSet> {
    spec.validate()?;
    create_dir(out)?;
    let set = gen_synthetic_triplets(spec)?;
    set.write_to(out)
        .with_context(|| format!("writing fixtures to {}", out.display()))?;
    let echo = json!({
        "classes": spec.classes,
        "per_class": spec.per_class,
        "views": spec.views,
        "dim": spec.dim,
        "noise": spec.noise,
        "seed": spec.seed,
        "points": spec.points,
    });
    write_file(
        &out.join("fixture.json"),
        serde_json::to_string_pretty(&echo)? + "\n",
    )?;
    Ok(set)
}

pub fn run(a: &FixturesArgs) -> anyhow::Result<()> {
    let spec = spec_of(a);
    let set = generate(&spec, &a.out)?;
    println!(
        "{} objects ({} classes x {}), {} views each, dim {}, {} gaussians per cloud -> {}",
        set.manifest.len(),
        spec.classes,
        spec.per_class,
        spec.views,
        spec.dim,
        spec.points,
        a.out.display()
    );
    Ok(())
}
