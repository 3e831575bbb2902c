//! Batch assembly, one optimization step and the epoch loop.

use ndarray::{Array0, Array2};
use rand::seq::{index, SliceRandom};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::data::TrainingObject;
use super::loss::{total_loss, Batch, LossBreakdown, Temperature};
use super::optim::AdamW;
use super::{AlignError, TrainConfig};
use crate::encoder::{GaussianEncoder, Mode, NamedTensor};
use crate::params::{ParamGroup, ParamKind, ParamMut, ParamRef, ParamSet};
use crate::{rng, Real};

const TAU_NAME: &str = "align/log_tau";

/// One line of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    /// 1-based.
    pub step: usize,
    pub epoch: usize,
    pub l_text: f64,
    pub l_img: f64,
    pub total: f64,
    /// Temperature used by this step's loss.
    pub tau: f64,
    /// Learning rate of the non-tokenizer parameters.
    pub lr: f64,
    pub lr_tokenizer: f64,
}

/// `k` distinct view indices out of `available`, or draws with replacement
/// when fewer are available.
pub fn sample_views(rng: &mut rng::Rng, available: usize, k: usize) -> Vec<usize> {
    if available >= k {
        index::sample(rng, available, k).into_vec()
    } else {
        (0..k).map(|_| rng.random_range(0..available)).collect()
    }
}

pub struct Trainer<T> {
    pub model: GaussianEncoder<T>,
    pub log_tau: Array0<T>,
    pub optimizer: AdamW<T>,
    pub config: TrainConfig,
    /// Completed steps.
    pub step: usize,
}

fn tau_ref<T>(log_tau: &Array0<T>) -> ParamRef<'_, T> {
    ParamRef {
        name: TAU_NAME.into(),
        kind: ParamKind::Temperature,
        group: ParamGroup::Alignment,
        value: log_tau.view().into_dyn(),
    }
}

fn tau_mut<T>(log_tau: &mut Array0<T>) -> ParamMut<'_, T> {
    ParamMut {
        name: TAU_NAME.into(),
        kind: ParamKind::Temperature,
        group: ParamGroup::Alignment,
        value: log_tau.view_mut().into_dyn(),
    }
}

impl<T: Real> Trainer<T> {
    pub fn new(model: GaussianEncoder<T>, config: TrainConfig) -> Result<Self, AlignError> {
        config.validate()?;
        let log_tau = Array0::from_elem((), Temperature::<T>::new(config.init_tau).log_tau);
        let mut refs = model.params.params();
        refs.push(tau_ref(&log_tau));
        let optimizer = AdamW::new(config.adam(), &refs);
        drop(refs);
        Ok(Trainer {
            model,
            log_tau,
            optimizer,
            config,
            step: 0,
        })
    }

    pub fn temperature(&self) -> Temperature<T> {
        Temperature {
            log_tau: self.log_tau[()],
        }
    }

    /// Embeds the batch in training mode (shared batch-norm statistics) and evaluates the loss without updating anything.
    pub fn evaluate_batch(
        &self,
        objects: &[TrainingObject<T>],
        batch: &[usize],
        view_picks: &[Vec<usize>],
    ) -> Result<LossBreakdown<T>, AlignError> {
        let prepared: Vec<_> = batch.iter().map(|&i| &objects[i].prepared).collect();
        let (embeddings, _) = self.model.forward_batch(&prepared, Mode::Train)?;
        let rows: Vec<_> = embeddings.iter().map(|e| e.vector.view()).collect();
        let b = assemble(objects, batch, view_picks, stack(&rows))?;
        Ok(total_loss(&b, self.temperature(), self.config.image_loss)?.0)
    }

    /// View picks for every object of a batch at the current step.
    pub fn pick_views(&self, objects: &[TrainingObject<T>], batch: &[usize]) -> Vec<Vec<usize>> {
        let mut r = rng::indexed(self.config.seed, "views", self.step as u64);
        batch
            .iter()
            .map(|&i| sample_views(&mut r, objects[i].views.nrows(), self.config.views))
            .collect()
    }

    /// Full forward, backward and update on `batch` (indices into `objects`).
    pub fn train_step(
        &mut self,
        objects: &[TrainingObject<T>],
        batch: &[usize],
        epoch: usize,
    ) -> Result<StepRecord, AlignError> {
        if batch.len() < 2 {
            return Err(AlignError::Argument(
                "a batch needs at least 2 objects".into(),
            ));
        }
        let mut seen = batch.to_vec();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != batch.len() || seen.last().is_some_and(|&i| i >= objects.len()) {
            return Err(AlignError::Argument(
                "batch indices must be distinct and in range".into(),
            ));
        }
        let keys = || {
            batch
                .iter()
                .map(|&i| objects[i].key.clone())
                .collect::<Vec<_>>()
        };
        let picks = self.pick_views(objects, batch);
        let model = &self.model;
        let prepared: Vec<_> = batch.iter().map(|&i| &objects[i].prepared).collect();
        let (embeddings, trace) = model.forward_batch(&prepared, Mode::Train)?;
        let rows: Vec<_> = embeddings.iter().map(|e| e.vector.view()).collect();
        let b = assemble(objects, batch, &picks, stack(&rows))?;
        let temperature = self.temperature();
        let (loss, grads) =
            total_loss(&b, temperature, self.config.image_loss).map_err(|e| AlignError::Step {
                step: self.step + 1,
                objects: keys(),
                reason: e.to_string(),
            })?;
        if !loss.total.is_finite() || !grads.d_log_tau.is_finite() {
            return Err(AlignError::Step {
                step: self.step + 1,
                objects: keys(),
                reason: "non-finite loss".into(),
            });
        }

        let mut total_grad = model.params.zeros_like();
        model.backward(&trace, &grads.d_gaussian.view(), &mut total_grad);
        if !total_grad.all_finite() {
            return Err(AlignError::Step {
                step: self.step + 1,
                objects: keys(),
                reason: "non-finite gradient".into(),
            });
        }
        let batch_stats = trace.batch_stats().clone();
        drop(trace);

        self.model.bn.update(&batch_stats, self.config.bn_momentum);
        let d_tau = Array0::from_elem((), grads.d_log_tau);
        let mut grad_refs = total_grad.params();
        grad_refs.push(tau_ref(&d_tau));
        let mut targets = self.model.params.params_mut();
        targets.push(tau_mut(&mut self.log_tau));
        self.optimizer.update(targets, &grad_refs)?;
        self.step += 1;
        Ok(StepRecord {
            step: self.step,
            epoch,
            l_text: loss.l_text.as_f64(),
            l_img: loss.l_img.as_f64(),
            total: loss.total.as_f64(),
            tau: temperature.tau().as_f64(),
            lr: self.config.lr_other,
            lr_tokenizer: self.config.lr_tokenizer,
        })
    }

    /// Shuffled epochs of distinct-object batches until `epochs` or `max_steps`.
    ///
    /// A trailing batch of a single object is skipped.
    pub fn run(
        &mut self,
        objects: &[TrainingObject<T>],
        mut on_step: impl FnMut(&StepRecord),
    ) -> Result<Vec<StepRecord>, AlignError> {
        if objects.len() < 2 {
            return Err(AlignError::Argument(
                "training needs at least 2 objects".into(),
            ));
        }
        let batch_size = self.config.batch_size.min(objects.len());
        let mut log = Vec::new();
        for epoch in 0..self.config.epochs {
            let mut order: Vec<usize> = (0..objects.len()).collect();
            order.shuffle(&mut rng::indexed(self.config.seed, "batches", epoch as u64));
            for chunk in order.chunks(batch_size).filter(|c| c.len() >= 2) {
                if self.config.max_steps.is_some_and(|m| self.step >= m) {
                    return Ok(log);
                }
                let record = self.train_step(objects, chunk, epoch + 1)?;
                on_step(&record);
                log.push(record);
            }
        }
        Ok(log)
    }

    /// `align/log_tau`, `optim/step` and the Adam moments.
    pub fn state_tensors(&self) -> Vec<NamedTensor> {
        let mut out = vec![
            NamedTensor::scalar(TAU_NAME, self.log_tau[()].as_f64() as f32),
            NamedTensor::scalar("optim/step", self.optimizer.step as f32),
        ];
        for (prefix, moments) in [
            ("optim/m/", &self.optimizer.m),
            ("optim/v/", &self.optimizer.v),
        ] {
            for (name, m) in self.optimizer.names.iter().zip(moments) {
                out.push(NamedTensor::from_view(format!("{prefix}{name}"), &m.view()));
            }
        }
        out
    }

    /// Restores temperature and optimizer state written by [`Self::state_tensors`].
    pub fn restore_state(&mut self, tensors: &[NamedTensor]) -> Result<(), AlignError> {
        let find = |name: &str| tensors.iter().find(|t| t.name == name);
        if let Some(t) = find(TAU_NAME) {
            self.log_tau[()] = T::of(t.data[0] as f64);
        }
        let Some(step) = find("optim/step") else {
            return Ok(());
        };
        self.optimizer.step = step.data[0] as u64;
        self.step = self.optimizer.step as usize;
        let names = self.optimizer.names.clone();
        for (prefix, moments) in [
            ("optim/m/", &mut self.optimizer.m),
            ("optim/v/", &mut self.optimizer.v),
        ] {
            for (name, m) in names.iter().zip(moments.iter_mut()) {
                let t = find(&format!("{prefix}{name}")).ok_or_else(|| {
                    AlignError::Argument(format!(
                        "checkpoint lacks optimizer tensor {prefix}{name}"
                    ))
                })?;
                if t.shape != m.shape() {
                    return Err(AlignError::Argument(format!(
                        "optimizer tensor {prefix}{name} has the wrong shape"
                    )));
                }
                m.iter_mut()
                    .zip(&t.data)
                    .for_each(|(d, &s)| *d = T::of(s as f64));
            }
        }
        Ok(())
    }
}

fn stack<T: Real>(rows: &[ndarray::ArrayView1<'_, T>]) -> Array2<T> {
    ndarray::stack(ndarray::Axis(0), rows).expect("embeddings share a width")
}

fn assemble<T: Real>(
    objects: &[TrainingObject<T>],
    batch: &[usize],
    picks: &[Vec<usize>],
    gaussian: Array2<T>,
) -> Result<Batch<T>, AlignError> {
    let k = picks.first().map_or(0, Vec::len);
    let text_rows: Vec<_> = batch.iter().map(|&i| objects[i].text.view()).collect();
    let views = (0..k)
        .map(|slot| {
            let rows: Vec<_> = batch
                .iter()
                .zip(picks)
                .map(|(&i, p)| objects[i].views.row(p[slot]))
                .collect();
            stack(&rows)
        })
        .collect();
    if gaussian.ncols() != objects[batch[0]].text.len() {
        return Err(AlignError::Argument(format!(
            "encoder output width {} differs from teacher width {}",
            gaussian.ncols(),
            objects[batch[0]].text.len()
        )));
    }
    Ok(Batch {
        gaussian,
        text: stack(&text_rows),
        views,
    })
}
