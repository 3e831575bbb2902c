//! Adam with decoupled weight decay.

use ndarray::{ArrayD, Zip};
use serde::{Deserialize, Serialize};

use super::AlignError;
use crate::params::{ParamGroup, ParamMut, ParamRef};
use crate::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr_tokenizer: f64,
    pub lr_other: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr_tokenizer: 5e-4,
            lr_other: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.05,
        }
    }
}

impl AdamConfig {
    pub fn lr(&self, group: ParamGroup) -> f64 {
        match group {
            ParamGroup::Tokenizer => self.lr_tokenizer,
            ParamGroup::Encoder | ParamGroup::Alignment => self.lr_other,
        }
    }
}

/// First and second moments, one pair per tensor in parameter order.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamW<T> {
    pub config: AdamConfig,
    pub step: u64,
    pub names: Vec<String>,
    pub m: Vec<ArrayD<T>>,
    pub v: Vec<ArrayD<T>>,
}

impl<T: Real> AdamW<T> {
    pub fn new(config: AdamConfig, params: &[ParamRef<'_, T>]) -> Self {
        AdamW {
            config,
            step: 0,
            names: params.iter().map(|p| p.name.clone()).collect(),
            m: params
                .iter()
                .map(|p| ArrayD::zeros(p.value.raw_dim()))
                .collect(),
            v: params
                .iter()
                .map(|p| ArrayD::zeros(p.value.raw_dim()))
                .collect(),
        }
    }

    /// One update; `params` and `grads` list the same tensors in the same order.
    pub fn update(
        &mut self,
        params: Vec<ParamMut<'_, T>>,
        grads: &[ParamRef<'_, T>],
    ) -> Result<(), AlignError> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(AlignError::Argument(
                "optimizer state does not match the parameter list".into(),
            ));
        }
        self.step += 1;
        let c = self.config;
        let t = self.step as i32;
        let bc1 = T::of(1.0 - c.beta1.powi(t));
        let bc2 = T::of(1.0 - c.beta2.powi(t));
        let (b1, b2, eps) = (T::of(c.beta1), T::of(c.beta2), T::of(c.eps));
        let (one_b1, one_b2) = (T::one() - b1, T::one() - b2);
        for (((mut p, g), m), v) in params
            .into_iter()
            .zip(grads)
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            if p.value.shape() != g.value.shape() || p.value.shape() != m.shape() {
                return Err(AlignError::Argument(format!(
                    "tensor `{}` changed shape",
                    p.name
                )));
            }
            let lr = T::of(c.lr(p.group));
            let decay = if p.kind.decays() {
                T::of(c.weight_decay)
            } else {
                T::zero()
            };
            Zip::from(&mut p.value)
                .and(&g.value)
                .and(m)
                .and(v)
                .for_each(|w, &g, m, v| {
                    *m = b1 * *m + one_b1 * g;
                    *v = b2 * *v + one_b2 * g * g;
                    let step = (*m / bc1) / ((*v / bc2).sqrt() + eps);
                    *w = *w - lr * (step + decay * *w);
                });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::ParamKind;
    use ndarray::{arr1, Array1};

    fn refs<'a>(w: &'a Array1<f64>, b: &'a Array1<f64>) -> Vec<ParamRef<'a, f64>> {
        vec![
            ParamRef {
                name: "w".into(),
                kind: ParamKind::Weight,
                group: ParamGroup::Encoder,
                value: w.view().into_dyn(),
            },
            ParamRef {
                name: "b".into(),
                kind: ParamKind::Bias,
                group: ParamGroup::Tokenizer,
                value: b.view().into_dyn(),
            },
        ]
    }

    fn muts<'a>(w: &'a mut Array1<f64>, b: &'a mut Array1<f64>) -> Vec<ParamMut<'a, f64>> {
        vec![
            ParamMut {
                name: "w".into(),
                kind: ParamKind::Weight,
                group: ParamGroup::Encoder,
                value: w.view_mut().into_dyn(),
            },
            ParamMut {
                name: "b".into(),
                kind: ParamKind::Bias,
                group: ParamGroup::Tokenizer,
                value: b.view_mut().into_dyn(),
            },
        ]
    }

    #[test]
    fn zero_gradient_only_decays_weights() {
        let (mut w, mut b) = (arr1(&[1.0, -2.0]), arr1(&[3.0]));
        let mut opt = AdamW::new(AdamConfig::default(), &refs(&w, &b));
        let (gw, gb) = (Array1::zeros(2), Array1::zeros(1));
        opt.update(muts(&mut w, &mut b), &refs(&gw, &gb)).unwrap();
        let k = 1.0 - 1e-4 * 0.05;
        assert_eq!(w, arr1(&[k, -2.0 * k]));
        assert_eq!(b, arr1(&[3.0]));
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let (mut w, mut b) = (arr1(&[0.0, 0.0]), arr1(&[0.0]));
        let mut opt = AdamW::new(AdamConfig::default(), &refs(&w, &b));
        let (gw, gb) = (arr1(&[2.0, -0.5]), arr1(&[1.0]));
        opt.update(muts(&mut w, &mut b), &refs(&gw, &gb)).unwrap();
        assert!((w[0] + 1e-4).abs() < 1e-10 && (w[1] - 1e-4).abs() < 1e-10);
        assert!((b[0] + 5e-4).abs() < 1e-10);
    }
}
