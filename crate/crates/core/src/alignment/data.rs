//! Manifest + teacher table + clouds → training objects.

use ndarray::{Array1, Array2};

use super::AlignError;
use crate::assets::{
    read_ply, subsample_points, AssetError, EmbeddingTable, GaussianCloud, TripletManifest,
};
use crate::tokenizer::{prepare, PreparedCloud, TokenizerConfig};
use crate::{par, rng, Real};

/// One triplet with its cloud already tokenized up to the learned stage.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingObject<T> {
    pub key: String,
    pub label: Option<String>,
    pub prepared: PreparedCloud,
    /// Unit-norm teacher text embedding.
    pub text: Array1<T>,
    /// `K_avail × D` unit-norm view embeddings.
    pub views: Array2<T>,
}

/// Reads every manifest asset and resamples it to `points` gaussians.
///
/// The resampling seed depends on the run seed and the object key only.
pub fn load_clouds(
    manifest: &TripletManifest,
    points: usize,
    seed: u64,
) -> Result<Vec<GaussianCloud>, AssetError> {
    let idx: Vec<usize> = (0..manifest.len()).collect();
    par::map_slice(&idx, |&i| {
        let cloud = read_ply(manifest.asset_path(i))?;
        let key = manifest.entries[i].object_key();
        subsample_points(
            &cloud,
            points,
            rng::derive_seed(seed, &format!("points/{key}"), 0),
        )
    })
    .into_iter()
    .collect()
}

fn unit_row<T: Real>(row: &[f32], key: &str) -> Result<Array1<T>, AlignError> {
    let v: Array1<T> = row.iter().map(|&x| T::of(x as f64)).collect();
    let norm = v.dot(&v).sqrt();
    if !(norm > T::zero()) || !norm.is_finite() {
        return Err(AlignError::NonFinite(format!(
            "teacher embedding `{key}` has no direction"
        )));
    }
    Ok(v / norm)
}

/// Pairs clouds (manifest order) with normalized teacher rows.
pub fn build_training_set<T: Real>(
    manifest: &TripletManifest,
    table: &EmbeddingTable,
    clouds: &[GaussianCloud],
    tokenizer: &TokenizerConfig,
) -> Result<Vec<TrainingObject<T>>, AlignError> {
    if clouds.len() != manifest.len() {
        return Err(AlignError::Argument(format!(
            "{} clouds for {} manifest entries",
            clouds.len(),
            manifest.len()
        )));
    }
    manifest.validate_against(table)?;
    let prepared: Vec<PreparedCloud> = par::map_slice(clouds, |c| prepare(c, tokenizer))
        .into_iter()
        .collect::<Result<_, _>>()?;
    manifest
        .entries
        .iter()
        .zip(prepared)
        .map(|(entry, prepared)| {
            let text = unit_row(table.require(&entry.text_key)?, &entry.text_key)?;
            let rows = entry
                .image_keys
                .iter()
                .map(|k| unit_row::<T>(table.require(k)?, k))
                .collect::<Result<Vec<_>, AlignError>>()?;
            let views = ndarray::stack(
                ndarray::Axis(0),
                &rows.iter().map(|r| r.view()).collect::<Vec<_>>(),
            )
            .map_err(|e| AlignError::Argument(e.to_string()))?;
            Ok(TrainingObject {
                key: entry.object_key(),
                label: entry.label.clone(),
                prepared,
                text,
                views,
            })
        })
        .collect()
}
