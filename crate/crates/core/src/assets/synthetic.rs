//! Desk-scale synthetic triplets.
//!
//! Each class owns a random unit prototype in the teacher space and a random
//! mixture of anisotropic gaussian blobs with per-blob base colors. An object
//! draws a small gaussian latent `z`; its caption embedding is the prototype
//! plus `noise * z` lifted into the teacher space through a fixed orthonormal
//! frame, and the same `z` shifts the object's colors. That way both the class
//! and the per-object caption offset are observable from the cloud. Each view
//! embedding is the unnormalized caption embedding plus independent isotropic
//! noise, so with `noise = 0` views equal the caption exactly.

use std::path::Path;

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use super::embeddings::EmbeddingTable;
use super::manifest::{ManifestEntry, TripletManifest};
use super::ply::write_ply;
use super::point::{GaussianCloud, GaussianPoint};
use super::AssetError;
use crate::rng::{self, Rng};

/// Latent rank of the per-object caption offset.
const LATENT_RANK: usize = 3;
const BLOBS_PER_CLASS: usize = 4;
const LATENT_COLOR_GAIN: f64 = 0.6;

#[derive(Debug, Clone, PartialEq)]
pub struct FixtureSpec {
    pub classes: usize,
    pub per_class: usize,
    pub views: usize,
    pub dim: usize,
    pub noise: f64,
    pub seed: u64,
    pub points: usize,
}

impl Default for FixtureSpec {
    fn default() -> Self {
        FixtureSpec {
            classes: 8,
            per_class: 40,
            views: 5,
            dim: 64,
            noise: 0.1,
            seed: 1,
            points: 1024,
        }
    }
}

impl FixtureSpec {
    pub fn validate(&self) -> Result<(), AssetError> {
        let bad = |m: &str| Err(AssetError::Argument(m.to_string()));
        if self.classes < 2 {
            return bad("fixtures need at least 2 classes");
        }
        if self.per_class < 2 {
            return bad("fixtures need at least 2 objects per class");
        }
        if self.views < 1 {
            return bad("fixtures need at least 1 view per object");
        }
        if self.dim < 1 {
            return bad("embedding dimension must be positive");
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return bad("noise must be a finite non-negative number");
        }
        if self.points < 1 {
            return bad("clouds need at least one point");
        }
        Ok(())
    }
}

/// Generated data, still in memory.
#[derive(Debug, Clone)]
pub struct SyntheticSet {
    pub manifest: TripletManifest,
    pub embeddings: EmbeddingTable,
    /// One row per label: the class prototype, for zero-shot evaluation.
    pub class_embeddings: EmbeddingTable,
    pub clouds: Vec<GaussianCloud>,
}

impl SyntheticSet {
    /// Write `manifest.json`, `embeddings.gseb`, `classes.gseb` and `assets/*.ply`.
    pub fn write_to(&self, dir: impl AsRef<Path>) -> Result<(), AssetError> {
        let dir = dir.as_ref();
        let assets = dir.join("assets");
        std::fs::create_dir_all(&assets).map_err(|e| AssetError::io(&assets, e))?;
        for (entry, cloud) in self.manifest.entries.iter().zip(&self.clouds) {
            let path = dir.join(&entry.asset);
            std::fs::write(&path, write_ply(cloud)).map_err(|e| AssetError::io(&path, e))?;
        }
        self.manifest.save(dir.join("manifest.json"))?;
        self.embeddings.save(dir.join("embeddings.gseb"))?;
        self.class_embeddings.save(dir.join("classes.gseb"))?;
        Ok(())
    }
}

fn gaussian(r: &mut Rng) -> f64 {
    StandardNormal.sample(r)
}

fn normalized(v: &[f64]) -> Vec<f32> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter().map(|x| (x / n) as f32).collect()
}

fn unit_vector(r: &mut Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| gaussian(r)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-9 {
            return v.iter().map(|x| x / n).collect();
        }
    }
}

/// `dim × rank` matrix with orthonormal columns (Gram-Schmidt), column-major.
fn orthonormal_frame(r: &mut Rng, dim: usize, rank: usize) -> Vec<Vec<f64>> {
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(rank);
    while cols.len() < rank {
        let mut v: Vec<f64> = (0..dim).map(|_| gaussian(r)).collect();
        for c in &cols {
            let d: f64 = v.iter().zip(c).map(|(a, b)| a * b).sum();
            for (x, y) in v.iter_mut().zip(c) {
                *x -= d * y;
            }
        }
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-6 {
            cols.push(v.iter().map(|x| x / n).collect());
        }
    }
    cols
}

fn random_rotation(r: &mut Rng) -> [[f64; 3]; 3] {
    let q = unit_vector(r, 4);
    let (w, x, y, z) = (q[0], q[1], q[2], q[3]);
    [
        [
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - w * z),
            2.0 * (x * z + w * y),
        ],
        [
            2.0 * (x * y + w * z),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - w * x),
        ],
        [
            2.0 * (x * z - w * y),
            2.0 * (y * z + w * x),
            1.0 - 2.0 * (x * x + y * y),
        ],
    ]
}

struct Blob {
    center: [f64; 3],
    axes: [[f64; 3]; 3],
    sigma: [f64; 3],
    color: [f64; 3],
    weight: f64,
}

struct ClassModel {
    prototype: Vec<f64>,
    blobs: Vec<Blob>,
}

fn class_model(r: &mut Rng, dim: usize) -> ClassModel {
    let prototype = unit_vector(r, dim);
    let mut blobs: Vec<Blob> = (0..BLOBS_PER_CLASS)
        .map(|_| Blob {
            center: [0; 3].map(|_| r.random_range(-1.0..1.0)),
            axes: random_rotation(r),
            sigma: [0; 3].map(|_| r.random_range(0.05..0.35)),
            color: [0; 3].map(|_| 0.8 * gaussian(r)),
            weight: r.random_range(0.5..1.5),
        })
        .collect();
    let total: f64 = blobs.iter().map(|b| b.weight).sum();
    for b in &mut blobs {
        b.weight /= total;
    }
    ClassModel { prototype, blobs }
}

fn sample_cloud(
    r: &mut Rng,
    class: &ClassModel,
    latent: &[f64],
    points: usize,
    id: &str,
) -> GaussianCloud {
    let jitter: Vec<[f64; 3]> = class
        .blobs
        .iter()
        .map(|_| [0; 3].map(|_| 0.05 * gaussian(r)))
        .collect();
    let shift: [f64; 3] =
        std::array::from_fn(|c| LATENT_COLOR_GAIN * latent.get(c).copied().unwrap_or(0.0));
    let pts = (0..points)
        .map(|_| {
            let u: f64 = r.random();
            let mut acc = 0.0;
            let mut bi = class.blobs.len() - 1;
            for (i, b) in class.blobs.iter().enumerate() {
                acc += b.weight;
                if u < acc {
                    bi = i;
                    break;
                }
            }
            let b = &class.blobs[bi];
            let local: [f64; 3] = std::array::from_fn(|a| b.sigma[a] * gaussian(r));
            let position: [f32; 3] = std::array::from_fn(|row| {
                let rotated: f64 = (0..3).map(|a| b.axes[row][a] * local[a]).sum();
                (b.center[row] + jitter[bi][row] + rotated) as f32
            });
            let color: [f32; 3] =
                std::array::from_fn(|c| (b.color[c] + shift[c] + 0.05 * gaussian(r)) as f32);
            let q = unit_vector(r, 4);
            GaussianPoint {
                position,
                color,
                opacity: (1.5 * gaussian(r)) as f32,
                scale: std::array::from_fn(|a| {
                    ((0.1 * b.sigma[a]).ln() + 0.2 * gaussian(r)) as f32
                }),
                rotation: [q[0] as f32, q[1] as f32, q[2] as f32, q[3] as f32],
            }
        })
        .collect();
    GaussianCloud::new(id, pts).expect("synthetic clouds are non-empty and finite")
}

/// Generate `classes × per_class` triplets, deterministic in `spec.seed`.
pub fn gen_synthetic_triplets(spec: &FixtureSpec) -> Result<SyntheticSet, AssetError> {
    spec.validate()?;
    let rank = LATENT_RANK.min(spec.dim);
    let lift = (spec.dim as f64 / rank as f64).sqrt();

    let mut class_rng = rng::stream(spec.seed, "fixture.classes");
    let classes: Vec<ClassModel> = (0..spec.classes)
        .map(|_| class_model(&mut class_rng, spec.dim))
        .collect();
    let frame = orthonormal_frame(&mut rng::stream(spec.seed, "fixture.frame"), spec.dim, rank);

    let mut embeddings = EmbeddingTable::new(spec.dim);
    let mut class_embeddings = EmbeddingTable::new(spec.dim);
    let mut entries = Vec::with_capacity(spec.classes * spec.per_class);
    let mut clouds = Vec::with_capacity(spec.classes * spec.per_class);

    for (c, class) in classes.iter().enumerate() {
        let label = format!("class_{c}");
        class_embeddings.push(label.clone(), &normalized(&class.prototype))?;
        for j in 0..spec.per_class {
            let obj = c * spec.per_class + j;
            let id = format!("obj_{obj:05}");
            let mut r = rng::indexed(spec.seed, "fixture.object", obj as u64);

            let latent: Vec<f64> = (0..rank).map(|_| gaussian(&mut r)).collect();
            let text: Vec<f64> = (0..spec.dim)
                .map(|d| {
                    let offset: f64 = frame.iter().zip(&latent).map(|(col, z)| col[d] * z).sum();
                    class.prototype[d] + spec.noise * lift * offset
                })
                .collect();
            let text_key = format!("{id}/text");
            embeddings.push(text_key.clone(), &normalized(&text))?;

            let mut image_keys = Vec::with_capacity(spec.views);
            for k in 0..spec.views {
                let view: Vec<f64> = text
                    .iter()
                    .map(|t| t + spec.noise * gaussian(&mut r))
                    .collect();
                let key = format!("{id}/view{k}");
                embeddings.push(key.clone(), &normalized(&view))?;
                image_keys.push(key);
            }

            clouds.push(sample_cloud(&mut r, class, &latent, spec.points, &id));
            entries.push(ManifestEntry {
                asset: format!("assets/{id}.ply").into(),
                text_key,
                image_keys,
                label: Some(label.clone()),
            });
        }
    }

    Ok(SyntheticSet {
        manifest: TripletManifest::new(spec.dim, entries, "")?,
        embeddings,
        class_embeddings,
        clouds,
    })
}
