//! `gsalign inspect`: summaries of PLY clouds, checkpoints, embedding tables and manifests.
//!
//! The file kind comes from its leading bytes, not its extension.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Context};
use gsalign::assets::{
    load_manifest, parse_ply_named, read_ply, EmbeddingTable, GaussianCloud, ATTRIBUTE_NAMES,
    EMBEDDING_MAGIC,
};
use gsalign::encoder::{Checkpoint, CHECKPOINT_MAGIC};
use serde_json::{json, Value};

use crate::InspectArgs;

/// Gaussian-count buckets `[lo, hi)`.
pub const COUNT_BUCKETS: [(usize, usize, &str); 6] = [
    (0, 1_000, "<1k"),
    (1_000, 5_000, "1k-5k"),
    (5_000, 10_000, "5k-10k"),
    (10_000, 20_000, "10k-20k"),
    (20_000, 50_000, "20k-50k"),
    (50_000, usize::MAX, ">=50k"),
];

pub fn bucket_of(count: usize) -> &'static str {
    COUNT_BUCKETS
        .iter()
        .find(|(lo, hi, _)| (*lo..*hi).contains(&count))
        .map_or(">=50k", |b| b.2)
}

fn histogram(counts: &[usize]) -> Value {
    let buckets: Vec<Value> = COUNT_BUCKETS
        .iter()
        .map(|(lo, hi, label)| json!({"bucket": label, "clouds": counts.iter().filter(|&&c| (*lo..*hi).contains(&c)).count()}))
        .collect();
    Value::Array(buckets)
}

fn cloud_summary(path: &Path, cloud: &GaussianCloud) -> Value {
    let rows = cloud.to_rows();
    let attributes: Vec<Value> = ATTRIBUTE_NAMES
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let (mut lo, mut hi, mut sum) = (f64::INFINITY, f64::NEG_INFINITY, 0.0);
            for r in &rows {
                let v = f64::from(r[j]);
                lo = lo.min(v);
                hi = hi.max(v);
                sum += v;
            }
            json!({"name": name, "min": lo, "max": hi, "mean": sum / rows.len() as f64})
        })
        .collect();
    json!({
        "kind": "ply",
        "path": path.display().to_string(),
        "points": cloud.len(),
        "bucket": bucket_of(cloud.len()),
        "attributes": attributes,
    })
}

fn checkpoint_summary(path: &Path, ckpt: &Checkpoint) -> Value {
    let tensors: Vec<Value> = ckpt
        .inventory()
        .into_iter()
        .map(|(name, shape)| json!({"name": name, "shape": shape}))
        .collect();
    let values: usize = ckpt.tensors.iter().map(|t| t.data.len()).sum();
    json!({
        "kind": "checkpoint",
        "path": path.display().to_string(),
        "model": ckpt.config.get("model").cloned().unwrap_or(Value::Null),
        "tensor_count": ckpt.tensors.len(),
        "values": values,
        "tensors": tensors,
    })
}

fn table_summary(path: &Path, table: &EmbeddingTable) -> Value {
    let norms: Vec<f64> = (0..table.len())
        .map(|i| {
            table
                .row(i)
                .iter()
                .map(|&v| f64::from(v) * f64::from(v))
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    let lo = norms.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = norms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    json!({
        "kind": "embeddings",
        "path": path.display().to_string(),
        "rows": table.len(),
        "dim": table.dim(),
        "norm_min": if norms.is_empty() { Value::Null } else { json!(lo) },
        "norm_max": if norms.is_empty() { Value::Null } else { json!(hi) },
        "first_keys": table.keys().iter().take(5).collect::<Vec<_>>(),
    })
}

fn manifest_summary(path: &Path) -> anyhow::Result<Value> {
    let manifest = load_manifest(path)?;
    let counts = (0..manifest.len())
        .map(|i| read_ply(manifest.asset_path(i)).map(|c| c.len()))
        .collect::<Result<Vec<_>, _>>()?;
    let views: Vec<usize> = manifest
        .entries
        .iter()
        .map(|e| e.image_keys.len())
        .collect();
    Ok(json!({
        "kind": "manifest",
        "path": path.display().to_string(),
        "entries": manifest.len(),
        "dim": manifest.dim,
        "labels": manifest.labels().len(),
        "views_min": views.iter().min(),
        "views_max": views.iter().max(),
        "points_min": counts.iter().min(),
        "points_max": counts.iter().max(),
        "histogram": histogram(&counts),
    }))
}

/// Summary of one file as JSON.
pub fn summarize(path: &Path) -> anyhow::Result<Value> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let name = path.display().to_string();
    let summary = if bytes.starts_with(CHECKPOINT_MAGIC) {
        checkpoint_summary(
            path,
            &Checkpoint::from_bytes(&bytes)
                .with_context(|| format!("parsing checkpoint {name}"))?,
        )
    } else if bytes.starts_with(EMBEDDING_MAGIC) {
        table_summary(
            path,
            &EmbeddingTable::from_bytes(&bytes)
                .with_context(|| format!("parsing embedding table {name}"))?,
        )
    } else if bytes.starts_with(b"ply") {
        cloud_summary(
            path,
            &parse_ply_named(&bytes, &name).with_context(|| format!("parsing PLY {name}"))?,
        )
    } else if bytes.iter().find(|b| !b.is_ascii_whitespace()) == Some(&b'{') {
        manifest_summary(path)?
    } else {
        bail!("{name}: not a PLY, GSCK checkpoint, GSEB table or JSON manifest");
    };
    Ok(summary)
}

fn num(v: &Value) -> String {
    match v.as_f64() {
        Some(x) if v.is_f64() => format!("{x:.4}"),
        _ => v.to_string(),
    }
}

/// Human-readable rendering of [`summarize`] output.
pub fn render(s: &Value) -> String {
    let mut out = String::new();
    let path = s["path"].as_str().unwrap_or_default();
    match s["kind"].as_str() {
        Some("ply") => {
            let _ = writeln!(
                out,
                "{path}: PLY, {} gaussians (bucket {})",
                s["points"],
                s["bucket"].as_str().unwrap_or_default()
            );
            for a in s["attributes"].as_array().into_iter().flatten() {
                let _ = writeln!(
                    out,
                    "  {:<8} min {:>10}  max {:>10}  mean {:>10}",
                    a["name"].as_str().unwrap_or_default(),
                    num(&a["min"]),
                    num(&a["max"]),
                    num(&a["mean"])
                );
            }
        }
        Some("checkpoint") => {
            let _ = writeln!(
                out,
                "{path}: checkpoint, {} tensors, {} values",
                s["tensor_count"], s["values"]
            );
            let _ = writeln!(out, "  model {}", s["model"]);
            for t in s["tensors"].as_array().into_iter().flatten() {
                let _ = writeln!(
                    out,
                    "  {}  {}",
                    t["name"].as_str().unwrap_or_default(),
                    t["shape"]
                );
            }
        }
        Some("embeddings") => {
            let _ = writeln!(
                out,
                "{path}: embedding table, {} rows x {} dims, norms {}..{}",
                s["rows"],
                s["dim"],
                num(&s["norm_min"]),
                num(&s["norm_max"])
            );
            let _ = writeln!(out, "  first keys {}", s["first_keys"]);
        }
        Some("manifest") => {
            let _ = writeln!(
                out,
                "{path}: manifest, {} entries, dim {}, {} labels, {}..{} views, {}..{} gaussians",
                s["entries"],
                s["dim"],
                s["labels"],
                s["views_min"],
                s["views_max"],
                s["points_min"],
                s["points_max"]
            );
            for b in s["histogram"].as_array().into_iter().flatten() {
                let _ = writeln!(
                    out,
                    "  {:<8} {}",
                    b["bucket"].as_str().unwrap_or_default(),
                    b["clouds"]
                );
            }
        }
        _ => {
            let _ = writeln!(out, "{s}");
        }
    }
    out
}

pub fn run(a: &InspectArgs) -> anyhow::Result<()> {
    let summaries = a
        .paths
        .iter()
        .map(|p| summarize(p))
        .collect::<anyhow::Result<Vec<_>>>()?;
    if a.json {
        let value = if summaries.len() == 1 {
            summaries[0].clone()
        } else {
            Value::Array(summaries)
        };
        println!("{}", serde_json::to_string_pretty(&value)?);
        return Ok(());
    }
    for s in &summaries {
        print!("{}", render(s));
    }
    let counts: Vec<usize> = summaries
        .iter()
        .filter_map(|s| s["points"].as_u64())
        .map(|c| c as usize)
        .collect();
    if counts.len() > 1 {
        println!("gaussian counts over {} clouds:", counts.len());
        for b in histogram(&counts).as_array().into_iter().flatten() {
            println!(
                "  {:<8} {}",
                b["bucket"].as_str().unwrap_or_default(),
                b["clouds"]
            );
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn buckets_are_half_open() {
        assert_eq!(bucket_of(0), "<1k");
        assert_eq!(bucket_of(999), "<1k");
        assert_eq!(bucket_of(1_000), "1k-5k");
        assert_eq!(bucket_of(15_000), "10k-20k");
        assert_eq!(bucket_of(20_000), "20k-50k");
        assert_eq!(bucket_of(10_000_000), ">=50k");
        let h = histogram(&[10, 12_000, 13_000]);
        assert_eq!(h[0]["clouds"], 1);
        assert_eq!(h[3]["clouds"], 2);
    }
}
