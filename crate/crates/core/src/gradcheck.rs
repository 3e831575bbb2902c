//! Central finite-difference checks of the analytic gradients of the full
//! training objective: tokenizer, transformer, output normalization, both loss
//! terms and the log temperature.
//!
//! A probe is only accepted when every ReLU mask and max-pool choice is the
//! same at `θ ± h` as at `θ`; across a kink the finite difference does not
//! estimate the one-sided derivative the backward pass returns.

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;

use crate::alignment::{total_loss, AlignError, Batch, ImageLoss, Temperature};
use crate::encoder::{GaussianEncoder, Mode, ModelParams};
use crate::nn::BranchSignature;
use crate::params::ParamSet;
use crate::tokenizer::PreparedCloud;
use crate::{rng, Real};

/// Name used for the log-temperature entry of a report.
pub const LOG_TAU: &str = "align/log_tau";

/// Teacher side of a checked batch.
#[derive(Debug, Clone)]
pub struct Targets<T> {
    /// `N × D` unit rows.
    pub text: Array2<T>,
    /// `K` matrices of `N × D` unit rows.
    pub views: Vec<Array2<T>>,
}

/// Loss value, analytic gradients and branch fingerprint at one point.
pub struct Evaluation<T> {
    pub loss: T,
    pub grads: ModelParams<T>,
    pub d_log_tau: T,
    pub signature: BranchSignature,
}

/// Training-mode loss of `prepared` against `targets`, and its gradients.
pub fn evaluate<T: Real>(
    model: &GaussianEncoder<T>,
    prepared: &[&PreparedCloud],
    targets: &Targets<T>,
    log_tau: T,
    image: ImageLoss,
) -> Result<Evaluation<T>, AlignError> {
    let (embeddings, trace) = model.forward_batch(prepared, Mode::Train)?;
    let rows: Vec<_> = embeddings.iter().map(|e| e.vector.view()).collect();
    let batch = Batch {
        gaussian: ndarray::stack(Axis(0), &rows)
            .map_err(|e| AlignError::Argument(e.to_string()))?,
        text: targets.text.clone(),
        views: targets.views.clone(),
    };
    let (loss, g) = total_loss(&batch, Temperature { log_tau }, image)?;
    let mut grads = model.params.zeros_like();
    model.backward(&trace, &g.d_gaussian.view(), &mut grads);
    Ok(Evaluation {
        loss: loss.total,
        grads,
        d_log_tau: g.d_log_tau,
        signature: trace.signature(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckConfig {
    /// Central-difference half step.
    pub step: f64,
    /// Probed entries per tensor (fewer only if the tensor is smaller).
    pub probes: usize,
    pub seed: u64,
    /// Candidates are drawn from entries whose analytic gradient is at least
    /// this fraction of the tensor's largest; the rest are pure roundoff.
    pub min_relative_magnitude: f64,
}

impl Default for CheckConfig {
    fn default() -> Self {
        CheckConfig {
            step: 1e-4,
            probes: 5,
            seed: 0,
            min_relative_magnitude: 1e-3,
        }
    }
}

/// Outcome for one tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorCheck {
    pub name: String,
    pub probes: usize,
    /// Entries rejected because a branch flipped inside `θ ± h`.
    pub skipped: usize,
    /// `‖analytic − numeric‖₂ / max(‖analytic‖₂, ‖numeric‖₂)` over the probes.
    pub rel_error: f64,
    pub max_abs_error: f64,
}

fn summarize(name: String, pairs: &[(f64, f64)], skipped: usize) -> TensorCheck {
    let diff = pairs
        .iter()
        .map(|(a, n)| (a - n) * (a - n))
        .sum::<f64>()
        .sqrt();
    let na = pairs.iter().map(|(a, _)| a * a).sum::<f64>().sqrt();
    let nn = pairs.iter().map(|(_, n)| n * n).sum::<f64>().sqrt();
    let scale = na.max(nn);
    TensorCheck {
        name,
        probes: pairs.len(),
        skipped,
        rel_error: if scale > 0.0 { diff / scale } else { 0.0 },
        max_abs_error: pairs.iter().map(|(a, n)| (a - n).abs()).fold(0.0, f64::max),
    }
}

fn set_entry<T: Real>(model: &mut GaussianEncoder<T>, tensor: usize, entry: usize, value: T) {
    let mut params = model.params.params_mut();
    *params[tensor]
        .value
        .iter_mut()
        .nth(entry)
        .expect("entry in range") = value;
}

/// Checks every model tensor and the log temperature.
pub fn check_all<T: Real>(
    model: &mut GaussianEncoder<T>,
    prepared: &[&PreparedCloud],
    targets: &Targets<T>,
    log_tau: T,
    image: ImageLoss,
    config: &CheckConfig,
) -> Result<Vec<TensorCheck>, AlignError> {
    let base = evaluate(model, prepared, targets, log_tau, image)?;
    let h = T::of(config.step);
    let two_h = 2.0 * config.step;
    let mut r = rng::stream(config.seed, "gradcheck");
    let mut out = Vec::new();

    let analytic: Vec<(String, Vec<f64>)> = base
        .grads
        .params()
        .iter()
        .map(|p| (p.name.clone(), p.value.iter().map(|v| v.as_f64()).collect()))
        .collect();
    for (tensor, (name, grad)) in analytic.iter().enumerate() {
        let largest = grad.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut candidates: Vec<usize> = (0..grad.len())
            .filter(|&j| grad[j].abs() >= config.min_relative_magnitude * largest)
            .collect();
        candidates.shuffle(&mut r);
        let original: Vec<T> = model.params.params()[tensor]
            .value
            .iter()
            .copied()
            .collect();
        let mut pairs = Vec::new();
        let mut skipped = 0;
        for &j in &candidates {
            if pairs.len() == config.probes {
                break;
            }
            let theta = original[j];
            set_entry(model, tensor, j, theta + h);
            let plus = evaluate(model, prepared, targets, log_tau, image)?;
            set_entry(model, tensor, j, theta - h);
            let minus = evaluate(model, prepared, targets, log_tau, image)?;
            set_entry(model, tensor, j, theta);
            if plus.signature != base.signature || minus.signature != base.signature {
                skipped += 1;
                continue;
            }
            pairs.push((grad[j], (plus.loss.as_f64() - minus.loss.as_f64()) / two_h));
        }
        out.push(summarize(name.clone(), &pairs, skipped));
    }

    let plus = evaluate(model, prepared, targets, log_tau + h, image)?;
    let minus = evaluate(model, prepared, targets, log_tau - h, image)?;
    let numeric = (plus.loss.as_f64() - minus.loss.as_f64()) / two_h;
    out.push(summarize(
        LOG_TAU.into(),
        &[(base.d_log_tau.as_f64(), numeric)],
        0,
    ));
    Ok(out)
}
