//! `GSCK` checkpoint files.
//!
//! Layout, little-endian: magic `GSCK`, version `u32`, config length `u32`,
//! config JSON, tensor count `u32`, then per tensor: name length `u16`, name,
//! rank `u8`, `rank × u32` dims, `f32` payload.

use std::collections::HashMap;
use std::path::Path;

use ndarray::ArrayViewD;
use serde_json::{json, Value};

use super::model::{GaussianEncoder, ModelConfig, ModelParams};
use super::EncoderError;
use crate::params::ParamSet;
use crate::Real;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"GSCK";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

impl NamedTensor {
    pub fn from_view<T: Real>(name: impl Into<String>, view: &ArrayViewD<'_, T>) -> Self {
        NamedTensor {
            name: name.into(),
            shape: view.shape().to_vec(),
            data: view.iter().map(|v| v.as_f64() as f32).collect(),
        }
    }

    pub fn scalar(name: impl Into<String>, value: f32) -> Self {
        NamedTensor {
            name: name.into(),
            shape: vec![],
            data: vec![value],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: Value,
    pub tensors: Vec<NamedTensor>,
}

/// Outcome of restoring a model from a checkpoint.
#[derive(Debug, Clone, Default)]
pub struct LoadReport {
    pub warnings: Vec<String>,
    /// Tensors that are not model parameters or buffers, in file order.
    pub extra: Vec<NamedTensor>,
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], EncoderError> {
        let end = self.at.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| {
            EncoderError::Format(format!(
                "truncated while reading {what} at byte {}",
                self.at
            ))
        })?;
        let out = &self.bytes[self.at..end];
        self.at = end;
        Ok(out)
    }

    fn u32(&mut self, what: &str) -> Result<u32, EncoderError> {
        Ok(u32::from_le_bytes(
            self.take(4, what)?.try_into().expect("4 bytes"),
        ))
    }
}

impl Checkpoint {
    pub fn get(&self, name: &str) -> Option<&NamedTensor> {
        self.tensors.iter().find(|t| t.name == name)
    }

    /// `(name, shape)` in file order.
    pub fn inventory(&self) -> Vec<(String, Vec<usize>)> {
        self.tensors
            .iter()
            .map(|t| (t.name.clone(), t.shape.clone()))
            .collect()
    }

    pub fn model_config(&self) -> Result<ModelConfig, EncoderError> {
        let model = self
            .config
            .get("model")
            .ok_or_else(|| EncoderError::Format("config blob has no `model` section".into()))?;
        Ok(serde_json::from_value(model.clone())?)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let config = serde_json::to_vec(&self.config).expect("JSON values serialize");
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(config.len() as u32).to_le_bytes());
        out.extend_from_slice(&config);
        out.extend_from_slice(&(self.tensors.len() as u32).to_le_bytes());
        for t in &self.tensors {
            out.extend_from_slice(&(t.name.len() as u16).to_le_bytes());
            out.extend_from_slice(t.name.as_bytes());
            out.push(t.shape.len() as u8);
            for &d in &t.shape {
                out.extend_from_slice(&(d as u32).to_le_bytes());
            }
            for v in &t.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, EncoderError> {
        let mut r = Reader { bytes, at: 0 };
        if r.take(4, "magic")? != CHECKPOINT_MAGIC {
            return Err(EncoderError::Format("bad magic (expected GSCK)".into()));
        }
        let version = r.u32("version")?;
        if version != CHECKPOINT_VERSION {
            return Err(EncoderError::Version {
                found: version,
                expected: CHECKPOINT_VERSION,
            });
        }
        let config_len = r.u32("config length")? as usize;
        let config: Value = serde_json::from_slice(r.take(config_len, "config")?)?;
        let count = r.u32("tensor count")?;
        let mut tensors = Vec::new();
        for i in 0..count {
            let len =
                u16::from_le_bytes(r.take(2, "name length")?.try_into().expect("2 bytes")) as usize;
            let name = std::str::from_utf8(r.take(len, "tensor name")?)
                .map_err(|_| EncoderError::Format(format!("tensor {i} name is not UTF-8")))?
                .to_string();
            let rank = r.take(1, "rank")?[0] as usize;
            let shape = (0..rank)
                .map(|_| r.u32("dims").map(|d| d as usize))
                .collect::<Result<Vec<_>, _>>()?;
            let numel = shape.iter().try_fold(1usize, |a, &d| a.checked_mul(d));
            let payload = numel
                .and_then(|n| n.checked_mul(4))
                .ok_or_else(|| EncoderError::Format(format!("tensor `{name}` is too large")))?;
            let data = r
                .take(payload, &format!("tensor `{name}`"))?
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
                .collect();
            if tensors.iter().any(|t: &NamedTensor| t.name == name) {
                return Err(EncoderError::Format(format!("duplicate tensor `{name}`")));
            }
            tensors.push(NamedTensor { name, shape, data });
        }
        if r.at != bytes.len() {
            return Err(EncoderError::Format(format!(
                "{} trailing bytes",
                bytes.len() - r.at
            )));
        }
        Ok(Checkpoint { config, tensors })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), EncoderError> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()).map_err(|source| EncoderError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, EncoderError> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|source| EncoderError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_bytes(&bytes)
    }

    /// Model parameters and batch-norm buffers, canonical order, then `extra`.
    pub fn from_model<T: Real>(
        model: &GaussianEncoder<T>,
        run: Value,
        extra: Vec<NamedTensor>,
    ) -> Self {
        let mut tensors: Vec<NamedTensor> = model
            .params
            .params()
            .iter()
            .map(|p| NamedTensor::from_view(p.name.clone(), &p.value))
            .collect();
        for (name, buf) in model.bn.named() {
            tensors.push(NamedTensor::from_view(
                format!("tokenizer/{name}"),
                &buf.view().into_dyn(),
            ));
        }
        tensors.extend(extra);
        Checkpoint {
            config: json!({ "model": model.config, "run": run }),
            tensors,
        }
    }

    /// Copies tensors into `model`, whose shapes are authoritative.
    ///
    /// Missing tokenizer tensors are drawn from a fresh initialization under
    /// `seed`; any other missing or misshapen tensor is an error naming the
    /// first offender in canonical order.
    pub fn restore_into<T: Real>(
        &self,
        model: &mut GaussianEncoder<T>,
        seed: u64,
    ) -> Result<LoadReport, EncoderError> {
        let index: HashMap<&str, &NamedTensor> =
            self.tensors.iter().map(|t| (t.name.as_str(), t)).collect();
        let mut missing_tokenizer = Vec::new();
        let mut used = std::collections::HashSet::new();

        let mut params = model.params.clone();
        let mut bn = model.bn.clone();
        {
            let mut targets: Vec<(String, ndarray::ArrayViewMutD<'_, T>)> = params
                .params_mut()
                .into_iter()
                .map(|p| (p.name, p.value))
                .collect();
            for (name, buf) in bn.named_mut() {
                targets.push((format!("tokenizer/{name}"), buf.view_mut().into_dyn()));
            }
            for (name, _) in &targets {
                match index.get(name.as_str()) {
                    None if name.starts_with("tokenizer/") => missing_tokenizer.push(name.clone()),
                    None => return Err(EncoderError::MissingTensor(name.clone())),
                    Some(_) => {}
                }
            }
            for (name, view) in &targets {
                if let Some(t) = index.get(name.as_str()) {
                    if t.shape != view.shape() {
                        return Err(EncoderError::ShapeMismatch {
                            tensor: name.clone(),
                            expected: view.shape().to_vec(),
                            found: t.shape.clone(),
                        });
                    }
                }
            }
            if !missing_tokenizer.is_empty() {
                drop(targets);
                params.tokenizer = ModelParams::init_tokenizer(&model.config, seed);
                bn = crate::tokenizer::BnStats::new(model.config.tokenizer.conv_channels);
                targets = params
                    .params_mut()
                    .into_iter()
                    .map(|p| (p.name, p.value))
                    .collect();
                for (name, buf) in bn.named_mut() {
                    targets.push((format!("tokenizer/{name}"), buf.view_mut().into_dyn()));
                }
            }
            for (name, view) in &mut targets {
                if let Some(t) = index.get(name.as_str()) {
                    for (dst, &src) in view.iter_mut().zip(&t.data) {
                        *dst = T::of(src as f64);
                    }
                    used.insert(name.clone());
                }
            }
        }
        model.params = params;
        model.bn = bn;

        let mut report = LoadReport::default();
        if !missing_tokenizer.is_empty() {
            let msg = format!(
                "checkpoint lacks {} tokenizer tensor(s) ({}); initialized them freshly",
                missing_tokenizer.len(),
                missing_tokenizer.join(", ")
            );
            log::warn!("{msg}");
            report.warnings.push(msg);
        }
        report.extra = self
            .tensors
            .iter()
            .filter(|t| !used.contains(&t.name))
            .cloned()
            .collect();
        Ok(report)
    }
}

pub fn save_model<T: Real>(
    path: impl AsRef<Path>,
    model: &GaussianEncoder<T>,
    run: Value,
    extra: Vec<NamedTensor>,
) -> Result<(), EncoderError> {
    Checkpoint::from_model(model, run, extra).save(path)
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint, EncoderError> {
    Checkpoint::load(path)
}

/// Rebuilds a model from the config stored in the checkpoint.
pub fn load_model<T: Real>(
    path: impl AsRef<Path>,
    seed: u64,
) -> Result<(GaussianEncoder<T>, LoadReport, Checkpoint), EncoderError> {
    let ckpt = Checkpoint::load(path)?;
    let mut model = GaussianEncoder::new(ckpt.model_config()?, seed)?;
    let report = ckpt.restore_into(&mut model, seed)?;
    Ok((model, report, ckpt))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::{EncoderConfig, Preset};
    use crate::tokenizer::{OrderingStrategy, TokenizerConfig};

    fn config(preset: Preset) -> ModelConfig {
        let encoder = EncoderConfig::preset(preset, 8);
        ModelConfig {
            tokenizer: TokenizerConfig {
                num_patches: 4,
                neighbors: 4,
                orderings: vec![OrderingStrategy::Xyz],
                token_dim: encoder.width,
                points: 16,
                point_hidden: 4,
                conv_channels: 4,
                ..Default::default()
            },
            encoder: EncoderConfig {
                depth: 1,
                ..encoder
            },
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let mut model = GaussianEncoder::<f32>::new(config(Preset::Nano), 5).unwrap();
        model.bn.mean1[0] = 0.25;
        let extra = vec![NamedTensor::scalar("align/log_tau", -2.5)];
        let ckpt = Checkpoint::from_model(&model, json!({"seed": 5}), extra);
        let back = Checkpoint::from_bytes(&ckpt.to_bytes()).unwrap();
        assert_eq!(back, ckpt);
        let mut fresh = GaussianEncoder::<f32>::new(back.model_config().unwrap(), 99).unwrap();
        let report = back.restore_into(&mut fresh, 99).unwrap();
        assert_eq!(fresh, model);
        assert!(report.warnings.is_empty());
        assert_eq!(report.extra.len(), 1);
    }

    #[test]
    fn shape_mismatch_names_first_tensor() {
        let base = GaussianEncoder::<f32>::new(config(Preset::Base), 1).unwrap();
        let ckpt = Checkpoint::from_model(&base, Value::Null, vec![]);
        let mut tiny = GaussianEncoder::<f32>::new(config(Preset::Tiny), 1).unwrap();
        match ckpt.restore_into(&mut tiny, 1) {
            Err(EncoderError::ShapeMismatch { tensor, .. }) => {
                assert_eq!(tensor, "tokenizer/point.w2")
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_tokenizer_is_reinitialized() {
        let model = GaussianEncoder::<f32>::new(config(Preset::Nano), 1).unwrap();
        let mut ckpt = Checkpoint::from_model(&model, Value::Null, vec![]);
        ckpt.tensors.retain(|t| !t.name.starts_with("tokenizer/"));
        let mut other = GaussianEncoder::<f32>::new(config(Preset::Nano), 2).unwrap();
        let report = ckpt.restore_into(&mut other, 1).unwrap();
        assert_eq!(report.warnings.len(), 1);
        assert_eq!(other, model);
        ckpt.tensors.retain(|t| t.name != "encoder/cls");
        assert!(
            matches!(ckpt.restore_into(&mut other, 1), Err(EncoderError::MissingTensor(n)) if n == "encoder/cls")
        );
    }

    #[test]
    fn corrupt_inputs_are_diagnosed() {
        let model = GaussianEncoder::<f32>::new(config(Preset::Nano), 1).unwrap();
        let bytes = Checkpoint::from_model(&model, Value::Null, vec![]).to_bytes();
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(
            matches!(Checkpoint::from_bytes(&bad), Err(EncoderError::Format(m)) if m.contains("magic"))
        );
        let mut bad = bytes.clone();
        bad[4] = 9;
        assert!(matches!(
            Checkpoint::from_bytes(&bad),
            Err(EncoderError::Version { found: 9, .. })
        ));
        assert!(
            matches!(Checkpoint::from_bytes(&bytes[..bytes.len() - 3]), Err(EncoderError::Format(m)) if m.contains("truncated"))
        );
        let mut long = bytes.clone();
        long.push(0);
        assert!(
            matches!(Checkpoint::from_bytes(&long), Err(EncoderError::Format(m)) if m.contains("trailing"))
        );
    }
}
