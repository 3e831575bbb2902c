//! Retrieval, zero-shot and few-shot metrics over embedding tables.
//!
//! Rankings sort candidates by similarity, descending, and break exact ties by
//! candidate key, ascending. A query's rank is the number of candidates that
//! precede its truth under that order.

mod classify;
mod report;
mod retrieval;

use ndarray::{Array1, Array2};
use thiserror::Error;

use crate::assets::{AssetError, EmbeddingTable, TripletManifest};
use crate::par;

pub use classify::{few_shot_eval, zero_shot_classify, FewShotReport, ZeroShotReport};
pub use report::EvalReport;
pub use retrieval::{
    recall_at_k, recall_at_k_any, retrieval_eval, Direction, RetrievalReport, RECALL_KS,
};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("invalid evaluation input: {0}")]
    Argument(String),
    #[error("query `{query}`: true candidate `{truth}` is not among the candidates")]
    MissingTruth { query: String, truth: String },
    #[error("object `{0}` has no label")]
    Unlabeled(String),
    #[error("label `{0}` has no class embedding")]
    MissingClass(String),
    #[error("class `{class}` has {have} samples, {need} needed")]
    InsufficientSamples {
        class: String,
        have: usize,
        need: usize,
    },
    #[error(transparent)]
    Asset(#[from] AssetError),
}

/// Unit rows; zero rows stay zero.
pub fn normalize_rows(m: &Array2<f64>) -> Array2<f64> {
    let mut out = m.clone();
    for mut row in out.rows_mut() {
        let n = row.dot(&row).sqrt();
        if n > 0.0 {
            row.mapv_inplace(|v| v / n);
        }
    }
    out
}

/// Rows of `table` named by `keys`, as `f64`.
pub fn gather(table: &EmbeddingTable, keys: &[String]) -> Result<Array2<f64>, EvalError> {
    let mut out = Array2::zeros((keys.len(), table.dim()));
    for (i, k) in keys.iter().enumerate() {
        let row = table.require(k)?;
        out.row_mut(i)
            .iter_mut()
            .zip(row)
            .for_each(|(d, &s)| *d = s as f64);
    }
    Ok(out)
}

/// Cosine similarities between query rows and candidate rows.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    pub values: Array2<f64>,
    pub queries: Vec<String>,
    pub candidates: Vec<String>,
}

impl SimilarityMatrix {
    pub fn from_values(
        values: Array2<f64>,
        queries: Vec<String>,
        candidates: Vec<String>,
    ) -> Result<Self, EvalError> {
        if values.dim() != (queries.len(), candidates.len()) {
            return Err(EvalError::Argument(format!(
                "{:?} similarity values for {} queries × {} candidates",
                values.dim(),
                queries.len(),
                candidates.len()
            )));
        }
        Ok(SimilarityMatrix {
            values,
            queries,
            candidates,
        })
    }

    /// Rows computed independently (in parallel when enabled).
    pub fn cosine(
        queries: &Array2<f64>,
        candidates: &Array2<f64>,
        query_keys: Vec<String>,
        candidate_keys: Vec<String>,
    ) -> Result<Self, EvalError> {
        if queries.ncols() != candidates.ncols() {
            return Err(EvalError::Argument(format!(
                "query width {} differs from candidate width {}",
                queries.ncols(),
                candidates.ncols()
            )));
        }
        let q = normalize_rows(queries);
        let c = normalize_rows(candidates);
        let rows: Vec<Array1<f64>> = par::map_range(q.nrows(), |i| c.dot(&q.row(i)));
        let mut values = Array2::zeros((q.nrows(), c.nrows()));
        for (i, r) in rows.into_iter().enumerate() {
            values.row_mut(i).assign(&r);
        }
        Self::from_values(values, query_keys, candidate_keys)
    }

    /// Number of candidates ranked ahead of candidate `c` for query `q`.
    pub fn rank(&self, q: usize, c: usize) -> usize {
        let row = self.values.row(q);
        let (s, key) = (row[c], &self.candidates[c]);
        row.iter()
            .zip(&self.candidates)
            .filter(|&(&v, k)| v > s || (v == s && k < key))
            .count()
    }

    /// Candidate indices in rank order for query `q`.
    pub fn ranking(&self, q: usize) -> Vec<usize> {
        let row = self.values.row(q);
        let mut idx: Vec<usize> = (0..self.candidates.len()).collect();
        idx.sort_by(|&a, &b| {
            row[b]
                .total_cmp(&row[a])
                .then_with(|| self.candidates[a].cmp(&self.candidates[b]))
        });
        idx
    }

    pub fn candidate_index(&self, key: &str) -> Option<usize> {
        self.candidates.iter().position(|c| c == key)
    }
}

/// Embeddings paired with object keys and labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledEmbeddings {
    pub keys: Vec<String>,
    pub labels: Vec<String>,
    pub vectors: Array2<f64>,
}

impl LabeledEmbeddings {
    pub fn new(
        keys: Vec<String>,
        labels: Vec<String>,
        vectors: Array2<f64>,
    ) -> Result<Self, EvalError> {
        if keys.len() != labels.len() || keys.len() != vectors.nrows() {
            return Err(EvalError::Argument(
                "keys, labels and vectors must have equal length".into(),
            ));
        }
        Ok(LabeledEmbeddings {
            keys,
            labels,
            vectors,
        })
    }

    /// Object embeddings from `gaussian` (keyed by object key) with manifest labels.
    pub fn from_manifest(
        gaussian: &EmbeddingTable,
        manifest: &TripletManifest,
    ) -> Result<Self, EvalError> {
        let keys: Vec<String> = manifest.entries.iter().map(|e| e.object_key()).collect();
        let labels = manifest
            .entries
            .iter()
            .zip(&keys)
            .map(|(e, k)| {
                e.label
                    .clone()
                    .ok_or_else(|| EvalError::Unlabeled(k.clone()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let vectors = gather(gaussian, &keys)?;
        Self::new(keys, labels, vectors)
    }

    /// Distinct labels, sorted.
    pub fn classes(&self) -> Vec<String> {
        let mut c = self.labels.clone();
        c.sort();
        c.dedup();
        c
    }
}
