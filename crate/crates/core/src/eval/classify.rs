//! Zero-shot classification against class embeddings and few-shot
//! nearest-prototype classification.

use ndarray::{Array1, Array2};
use rand::seq::index;
use serde::{Deserialize, Serialize};

use super::{gather, normalize_rows, EvalError, LabeledEmbeddings, SimilarityMatrix};
use crate::assets::EmbeddingTable;
use crate::{par, rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroShotReport {
    pub objects: usize,
    pub classes: usize,
    pub top1: f64,
    pub top3: f64,
    pub top5: f64,
}

/// Ranks every class embedding for every object; `TopM` counts true labels
/// within the first `M` (capped at the class count).
pub fn zero_shot_classify(
    data: &LabeledEmbeddings,
    classes: &EmbeddingTable,
) -> Result<ZeroShotReport, EvalError> {
    if data.keys.is_empty() {
        return Err(EvalError::Argument("no objects to classify".into()));
    }
    if classes.is_empty() {
        return Err(EvalError::Argument("no class embeddings".into()));
    }
    for label in &data.labels {
        if !classes.contains(label) {
            return Err(EvalError::MissingClass(label.clone()));
        }
    }
    let class_keys: Vec<String> = classes.keys().to_vec();
    let c = gather(classes, &class_keys)?;
    let sim = SimilarityMatrix::cosine(&data.vectors, &c, data.keys.clone(), class_keys)?;
    let ranks: Vec<usize> = data
        .labels
        .iter()
        .enumerate()
        .map(|(q, l)| sim.rank(q, sim.candidate_index(l).expect("checked above")))
        .collect();
    let top = |m: usize| ranks.iter().filter(|&&r| r < m).count() as f64 / ranks.len() as f64;
    Ok(ZeroShotReport {
        objects: ranks.len(),
        classes: classes.len(),
        top1: top(1),
        top3: top(3),
        top5: top(5),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FewShotReport {
    pub n_way: usize,
    pub m_shot: usize,
    pub seed: u64,
    pub accuracies: Vec<f64>,
    pub mean: f64,
    /// Population standard deviation over the runs.
    pub std: f64,
}

fn one_run(
    data: &LabeledEmbeddings,
    classes: &[String],
    members: &[Vec<usize>],
    n_way: usize,
    m_shot: usize,
    seed: u64,
    run: usize,
) -> f64 {
    let mut r = rng::indexed(seed, "few_shot", run as u64);
    let mut chosen = index::sample(&mut r, classes.len(), n_way).into_vec();
    chosen.sort_unstable();
    let d = data.vectors.ncols();
    let mut prototypes = Array2::zeros((n_way, d));
    let mut queries: Vec<(usize, usize)> = Vec::new();
    for (slot, &c) in chosen.iter().enumerate() {
        let pool = &members[c];
        let support = index::sample(&mut r, pool.len(), m_shot).into_vec();
        let mut mean = Array1::<f64>::zeros(d);
        for &s in &support {
            mean += &data.vectors.row(pool[s]);
        }
        mean /= m_shot as f64;
        let norm = mean.dot(&mean).sqrt();
        if norm > 0.0 {
            mean /= norm;
        }
        prototypes.row_mut(slot).assign(&mean);
        queries.extend(
            (0..pool.len())
                .filter(|i| !support.contains(i))
                .map(|i| (pool[i], slot)),
        );
    }
    let keys: Vec<String> = chosen.iter().map(|&c| classes[c].clone()).collect();
    let q = normalize_rows(&data.vectors);
    let correct = queries
        .iter()
        .filter(|&&(row, slot)| {
            let s = prototypes.dot(&q.row(row));
            let mut best = 0;
            for j in 1..n_way {
                if s[j] > s[best] || (s[j] == s[best] && keys[j] < keys[best]) {
                    best = j;
                }
            }
            best == slot
        })
        .count();
    correct as f64 / queries.len() as f64
}

/// `runs` episodes of `n_way`-class, `m_shot`-support nearest-prototype
/// classification; all remaining samples of the chosen classes are queries.
pub fn few_shot_eval(
    data: &LabeledEmbeddings,
    n_way: usize,
    m_shot: usize,
    runs: usize,
    seed: u64,
) -> Result<FewShotReport, EvalError> {
    if n_way < 1 || m_shot < 1 || runs < 1 {
        return Err(EvalError::Argument(
            "n_way, m_shot and runs must be positive".into(),
        ));
    }
    let classes = data.classes();
    if classes.len() < n_way {
        return Err(EvalError::Argument(format!(
            "{n_way}-way episodes need {n_way} classes, found {}",
            classes.len()
        )));
    }
    let members: Vec<Vec<usize>> = classes
        .iter()
        .map(|c| {
            (0..data.labels.len())
                .filter(|&i| &data.labels[i] == c)
                .collect()
        })
        .collect();
    for (c, m) in classes.iter().zip(&members) {
        if m.len() < m_shot + 1 {
            return Err(EvalError::InsufficientSamples {
                class: c.clone(),
                have: m.len(),
                need: m_shot + 1,
            });
        }
    }
    let accuracies = par::map_range(runs, |run| {
        one_run(data, &classes, &members, n_way, m_shot, seed, run)
    });
    let mean = accuracies.iter().sum::<f64>() / runs as f64;
    let var = accuracies
        .iter()
        .map(|a| (a - mean) * (a - mean))
        .sum::<f64>()
        / runs as f64;
    Ok(FewShotReport {
        n_way,
        m_shot,
        seed,
        accuracies,
        mean,
        std: var.sqrt(),
    })
}
