//! Contrastive objectives and their gradients.
//!
//! Every objective is a weighted symmetric log-softmax over a logit matrix
//! `M = A·Bᵀ / τ`:
//!
//! `L(M, w) = −1/(2N) Σ_i w_i · (M_ii − lse_j M_ij + M_ii − lse_j M_ji)`
//!
//! with `∂L/∂M_ij = −1/(2N) · (w_i (δ_ij − R_ij) + w_j (δ_ij − C_ij))`, where
//! `R` is the row softmax and `C` the column softmax of `M`.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::AlignError;
use crate::Real;

/// How the image term is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ImageLoss {
    /// Per-view contrastive terms weighted by softmax-normalized text/view cosines.
    #[default]
    Voting,
    /// The text contrastive terms weighted by the mean raw text/view cosine.
    Literal,
    /// No image term.
    Off,
}

impl ImageLoss {
    pub fn name(self) -> &'static str {
        match self {
            ImageLoss::Voting => "voting",
            ImageLoss::Literal => "literal",
            ImageLoss::Off => "off",
        }
    }
}

/// `τ = exp(log_tau)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Temperature<T> {
    pub log_tau: T,
}

impl<T: Real> Temperature<T> {
    pub fn new(tau: f64) -> Self {
        Temperature {
            log_tau: T::of(tau.ln()),
        }
    }

    pub fn tau(self) -> T {
        self.log_tau.exp()
    }
}

/// Embeddings of `N` objects: 3D, text and `K` views (`views[k]` is `N × D`).
#[derive(Debug, Clone, PartialEq)]
pub struct Batch<T> {
    pub gaussian: Array2<T>,
    pub text: Array2<T>,
    pub views: Vec<Array2<T>>,
}

impl<T: Real> Batch<T> {
    pub fn len(&self) -> usize {
        self.gaussian.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn num_views(&self) -> usize {
        self.views.len()
    }

    /// The `K × D` views of object `i`.
    pub fn object_views(&self, i: usize) -> Array2<T> {
        let rows: Vec<_> = self.views.iter().map(|v| v.row(i)).collect();
        ndarray::stack(Axis(0), &rows).expect("views share a width")
    }

    fn validate(&self) -> Result<(), AlignError> {
        let (n, d) = self.gaussian.dim();
        if n == 0 {
            return Err(AlignError::Argument("empty batch".into()));
        }
        if self.text.dim() != (n, d)
            || self.views.is_empty()
            || self.views.iter().any(|v| v.dim() != (n, d))
        {
            return Err(AlignError::Argument(format!(
                "batch of {n}×{d} gaussian embeddings needs matching text and ≥1 view matrices"
            )));
        }
        let finite = |m: &Array2<T>| m.iter().all(|v| v.is_finite());
        if !finite(&self.gaussian) || !finite(&self.text) || !self.views.iter().all(finite) {
            return Err(AlignError::NonFinite(
                "non-finite embedding in batch".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossBreakdown<T> {
    pub l_text: T,
    pub l_img: T,
    /// `l_text + l_img`, one addition.
    pub total: T,
    /// `N × K` voting weights; raw cosines for [`ImageLoss::Literal`].
    pub votes: Array2<T>,
}

/// Gradients of the total loss with respect to its trainable inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct LossGrads<T> {
    pub d_gaussian: Array2<T>,
    pub d_log_tau: T,
}

fn logits<T: Real>(a: &ArrayView2<T>, b: &ArrayView2<T>, tau: T) -> Array2<T> {
    a.dot(&b.t()).mapv(|v| v / tau)
}

fn log_softmax_rows<T: Real>(m: &ArrayView2<T>) -> Array2<T> {
    let mut out = m.to_owned();
    for mut row in out.rows_mut() {
        let max = row.fold(T::neg_infinity(), |a, &b| a.max(b));
        let lse = max + row.iter().map(|&v| (v - max).exp()).sum::<T>().ln();
        row.mapv_inplace(|v| v - lse);
    }
    out
}

/// `Contra(A_i, B)` for every `i`: log-softmax of the matching pair over `B`.
pub fn contra<T: Real>(
    a: &ArrayView2<T>,
    b: &ArrayView2<T>,
    tau: T,
) -> Result<Array1<T>, AlignError> {
    if a.dim() != b.dim() || a.nrows() == 0 {
        return Err(AlignError::Argument(
            "contra needs two equally shaped non-empty matrices".into(),
        ));
    }
    if !(tau > T::zero()) || !a.iter().chain(b.iter()).all(|v| v.is_finite()) {
        return Err(AlignError::NonFinite(
            "contra input is not finite or τ ≤ 0".into(),
        ));
    }
    let ls = log_softmax_rows(&logits(a, b, tau).view());
    Ok(ls.diag().to_owned())
}

/// Value and `∂/∂M` of the weighted symmetric objective on logits `m`.
fn weighted_pair_loss<T: Real>(m: &Array2<T>, w: &ArrayView1<T>) -> (T, Array2<T>) {
    let n = m.nrows();
    let row_ls = log_softmax_rows(&m.view());
    let col_ls = log_softmax_rows(&m.t()).reversed_axes();
    let mut acc = T::zero();
    for i in 0..n {
        acc += w[i] * (row_ls[[i, i]] + col_ls[[i, i]]);
    }
    let scale = T::one() / T::of(2.0 * n as f64);
    let loss = -acc * scale;
    let mut dm = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            let delta = if i == j { T::one() } else { T::zero() };
            let r = row_ls[[i, j]].exp();
            let c = col_ls[[i, j]].exp();
            dm[[i, j]] = -scale * (w[i] * (delta - r) + w[j] * (delta - c));
        }
    }
    (loss, dm)
}

/// Symmetric 3D/text contrastive loss.
pub fn loss_text<T: Real>(
    gaussian: &ArrayView2<T>,
    text: &ArrayView2<T>,
    tau: T,
) -> Result<T, AlignError> {
    contra(gaussian, text, tau)?;
    let ones = Array1::ones(gaussian.nrows());
    Ok(weighted_pair_loss(&logits(gaussian, text, tau), &ones.view()).0)
}

fn cosine<T: Real>(a: &ArrayView1<T>, b: &ArrayView1<T>) -> T {
    let den = (a.dot(a) * b.dot(b)).sqrt();
    if den > T::zero() {
        a.dot(b) / den
    } else {
        T::zero()
    }
}

/// Raw text/view cosines of one object.
pub fn raw_view_scores<T: Real>(text: &ArrayView1<T>, views: &ArrayView2<T>) -> Array1<T> {
    views.rows().into_iter().map(|v| cosine(text, &v)).collect()
}

/// Softmax (temperature 1) over the text/view cosines of one object.
pub fn voting_scores<T: Real>(text: &ArrayView1<T>, views: &ArrayView2<T>) -> Array1<T> {
    let raw = raw_view_scores(text, views);
    let max = raw.fold(T::neg_infinity(), |a, &b| a.max(b));
    let e = raw.mapv(|v| (v - max).exp());
    let sum = e.sum();
    e / sum
}

fn votes<T: Real>(batch: &Batch<T>) -> Array2<T> {
    let mut out = Array2::zeros((batch.len(), batch.num_views()));
    for i in 0..batch.len() {
        out.row_mut(i).assign(&voting_scores(
            &batch.text.row(i),
            &batch.object_views(i).view(),
        ));
    }
    out
}

/// View-voted image contrastive loss.
pub fn loss_img<T: Real>(batch: &Batch<T>, tau: T) -> Result<T, AlignError> {
    Ok(
        total_loss(batch, Temperature { log_tau: tau.ln() }, ImageLoss::Voting)?
            .0
            .l_img,
    )
}

/// Both terms, their sum, the votes and the gradients.
pub fn total_loss<T: Real>(
    batch: &Batch<T>,
    temperature: Temperature<T>,
    image: ImageLoss,
) -> Result<(LossBreakdown<T>, LossGrads<T>), AlignError> {
    batch.validate()?;
    let tau = temperature.tau();
    if !(tau > T::zero()) || !tau.is_finite() {
        return Err(AlignError::NonFinite(format!(
            "temperature {} is not usable",
            tau.as_f64()
        )));
    }
    let (n, d) = batch.gaussian.dim();
    let g = batch.gaussian.view();
    let mut d_gaussian = Array2::zeros((n, d));
    let mut d_log_tau = T::zero();
    let mut apply = |m: &Array2<T>, dm: &Array2<T>, other: &ArrayView2<T>| {
        d_gaussian += &dm.dot(other).mapv(|v| v / tau);
        d_log_tau -= (dm * m).sum();
    };

    let m_text = logits(&g, &batch.text.view(), tau);
    let ones = Array1::ones(n);
    let (l_text, dm_text) = weighted_pair_loss(&m_text, &ones.view());
    apply(&m_text, &dm_text, &batch.text.view());

    let (l_img, vote_matrix) = match image {
        ImageLoss::Voting => {
            let w = votes(batch);
            let mut l = T::zero();
            for (k, view) in batch.views.iter().enumerate() {
                let m = logits(&g, &view.view(), tau);
                let (lk, dm) = weighted_pair_loss(&m, &w.column(k));
                l += lk;
                apply(&m, &dm, &view.view());
            }
            (l, w)
        }
        ImageLoss::Literal => {
            let mut raw = Array2::zeros((n, batch.num_views()));
            for i in 0..n {
                raw.row_mut(i).assign(&raw_view_scores(
                    &batch.text.row(i),
                    &batch.object_views(i).view(),
                ));
            }
            let s = raw.mean_axis(Axis(1)).expect("at least one view");
            let (l, dm) = weighted_pair_loss(&m_text, &s.view());
            apply(&m_text, &dm, &batch.text.view());
            (l, raw)
        }
        ImageLoss::Off => (T::zero(), Array2::zeros((n, batch.num_views()))),
    };
    let total = l_text + l_img;
    Ok((
        LossBreakdown {
            l_text,
            l_img,
            total,
            votes: vote_matrix,
        },
        LossGrads {
            d_gaussian,
            d_log_tau,
        },
    ))
}
