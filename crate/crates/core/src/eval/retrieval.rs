//! Recall@K in the four 3D/text/image directions.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::{gather, EvalError, SimilarityMatrix};
use crate::assets::{EmbeddingTable, TripletManifest};

/// The reported cut-offs.
pub const RECALL_KS: [usize; 3] = [1, 5, 10];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    TextTo3d,
    #[serde(rename = "3d_to_text")]
    ThreeDToText,
    ImageTo3d,
    #[serde(rename = "3d_to_image")]
    ThreeDToImage,
}

impl Direction {
    pub const ALL: [Direction; 4] = [
        Direction::TextTo3d,
        Direction::ThreeDToText,
        Direction::ImageTo3d,
        Direction::ThreeDToImage,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Direction::TextTo3d => "Text→3D",
            Direction::ThreeDToText => "3D→Text",
            Direction::ImageTo3d => "Image→3D",
            Direction::ThreeDToImage => "3D→Image",
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalReport {
    pub direction: Direction,
    pub queries: usize,
    pub r1: f64,
    pub r5: f64,
    pub r10: f64,
}

fn truth_indices(
    sim: &SimilarityMatrix,
    truths: &[Vec<String>],
) -> Result<Vec<Vec<usize>>, EvalError> {
    if truths.len() != sim.queries.len() {
        return Err(EvalError::Argument(format!(
            "{} truth sets for {} queries",
            truths.len(),
            sim.queries.len()
        )));
    }
    truths
        .iter()
        .zip(&sim.queries)
        .map(|(ts, q)| {
            if ts.is_empty() {
                return Err(EvalError::Argument(format!(
                    "query `{q}` has no true candidate"
                )));
            }
            ts.iter()
                .map(|t| {
                    sim.candidate_index(t)
                        .ok_or_else(|| EvalError::MissingTruth {
                            query: q.clone(),
                            truth: t.clone(),
                        })
                })
                .collect()
        })
        .collect()
}

fn best_ranks(sim: &SimilarityMatrix, truths: &[Vec<String>]) -> Result<Vec<usize>, EvalError> {
    let idx = truth_indices(sim, truths)?;
    Ok(idx
        .iter()
        .enumerate()
        .map(|(q, ts)| {
            ts.iter()
                .map(|&c| sim.rank(q, c))
                .min()
                .expect("non-empty truth set")
        })
        .collect())
}

fn fraction_within(ranks: &[usize], k: usize) -> f64 {
    if ranks.is_empty() {
        return 0.0;
    }
    ranks.iter().filter(|&&r| r < k).count() as f64 / ranks.len() as f64
}

/// Fraction of queries whose single true candidate ranks within the top `k`.
pub fn recall_at_k(sim: &SimilarityMatrix, truth: &[String], k: usize) -> Result<f64, EvalError> {
    let sets: Vec<Vec<String>> = truth.iter().map(|t| vec![t.clone()]).collect();
    recall_at_k_any(sim, &sets, k)
}

/// Fraction of queries with any true candidate within the top `k`.
pub fn recall_at_k_any(
    sim: &SimilarityMatrix,
    truths: &[Vec<String>],
    k: usize,
) -> Result<f64, EvalError> {
    Ok(fraction_within(&best_ranks(sim, truths)?, k))
}

fn report(
    direction: Direction,
    sim: &SimilarityMatrix,
    truths: &[Vec<String>],
) -> Result<RetrievalReport, EvalError> {
    let ranks = best_ranks(sim, truths)?;
    Ok(RetrievalReport {
        direction,
        queries: ranks.len(),
        r1: fraction_within(&ranks, RECALL_KS[0]),
        r5: fraction_within(&ranks, RECALL_KS[1]),
        r10: fraction_within(&ranks, RECALL_KS[2]),
    })
}

/// All four directions for the manifest's objects.
///
/// `gaussian` holds one row per object key; `teacher` holds the text and view rows.
pub fn retrieval_eval(
    gaussian: &EmbeddingTable,
    teacher: &EmbeddingTable,
    manifest: &TripletManifest,
) -> Result<Vec<RetrievalReport>, EvalError> {
    if manifest.is_empty() {
        return Err(EvalError::Argument("empty manifest".into()));
    }
    let objects: Vec<String> = manifest.entries.iter().map(|e| e.object_key()).collect();
    let texts: Vec<String> = manifest
        .entries
        .iter()
        .map(|e| e.text_key.clone())
        .collect();
    let views: Vec<String> = manifest
        .entries
        .iter()
        .flat_map(|e| e.image_keys.iter().cloned())
        .collect();
    let view_owner: Vec<String> = manifest
        .entries
        .iter()
        .flat_map(|e| std::iter::repeat_n(e.object_key(), e.image_keys.len()))
        .collect();

    let g = gather(gaussian, &objects)?;
    let t = gather(teacher, &texts)?;
    let v = gather(teacher, &views)?;
    let single = |keys: &[String]| keys.iter().map(|k| vec![k.clone()]).collect::<Vec<_>>();

    let text_to_3d = SimilarityMatrix::cosine(&t, &g, texts.clone(), objects.clone())?;
    let three_to_text = SimilarityMatrix::cosine(&g, &t, objects.clone(), texts.clone())?;
    let image_to_3d = SimilarityMatrix::cosine(&v, &g, views.clone(), objects.clone())?;
    let three_to_image = SimilarityMatrix::cosine(&g, &v, objects.clone(), views)?;
    let view_sets: Vec<Vec<String>> = manifest
        .entries
        .iter()
        .map(|e| e.image_keys.clone())
        .collect();

    Ok(vec![
        report(Direction::TextTo3d, &text_to_3d, &single(&objects))?,
        report(Direction::ThreeDToText, &three_to_text, &single(&texts))?,
        report(Direction::ImageTo3d, &image_to_3d, &single(&view_owner))?,
        report(Direction::ThreeDToImage, &three_to_image, &view_sets)?,
    ])
}
