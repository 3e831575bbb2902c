use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::embeddings::EmbeddingTable;
use super::AssetError;

/// One object: its gaussian asset plus the keys of its teacher embeddings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub asset: PathBuf,
    pub text_key: String,
    pub image_keys: Vec<String>,
    #[serde(default)]
    pub label: Option<String>,
}

impl ManifestEntry {
    /// Stable identifier used as the retrieval candidate key.
    pub fn object_key(&self) -> String {
        self.asset.to_string_lossy().into_owned()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ManifestFile {
    dim: usize,
    entries: Vec<ManifestEntry>,
}

/// Triplet manifest. Relative asset paths resolve against `base_dir`.
#[derive(Debug, Clone, PartialEq)]
pub struct TripletManifest {
    pub dim: usize,
    pub entries: Vec<ManifestEntry>,
    pub base_dir: PathBuf,
}

impl TripletManifest {
    pub fn new(
        dim: usize,
        entries: Vec<ManifestEntry>,
        base_dir: impl Into<PathBuf>,
    ) -> Result<Self, AssetError> {
        for (i, e) in entries.iter().enumerate() {
            if e.image_keys.is_empty() {
                return Err(AssetError::NoViews(i));
            }
        }
        Ok(TripletManifest {
            dim,
            entries,
            base_dir: base_dir.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn asset_path(&self, i: usize) -> PathBuf {
        let p = &self.entries[i].asset;
        if p.is_absolute() {
            p.clone()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn to_json(&self) -> String {
        let file = ManifestFile {
            dim: self.dim,
            entries: self.entries.clone(),
        };
        serde_json::to_string_pretty(&file).expect("manifest serializes")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), AssetError> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| AssetError::io(path, e))
    }

    /// Every asset exists on disk.
    pub fn check_assets(&self) -> Result<(), AssetError> {
        for i in 0..self.entries.len() {
            let path = self.asset_path(i);
            if !path.is_file() {
                return Err(AssetError::MissingAsset { index: i, path });
            }
        }
        Ok(())
    }

    /// Every referenced key resolves in `table` and dimensions agree.
    pub fn validate_against(&self, table: &EmbeddingTable) -> Result<(), AssetError> {
        if table.dim() != self.dim {
            return Err(AssetError::DimensionMismatch {
                key: "<embedding table>".into(),
                expected: self.dim,
                found: table.dim(),
            });
        }
        for e in &self.entries {
            table.require(&e.text_key)?;
            for k in &e.image_keys {
                table.require(k)?;
            }
        }
        Ok(())
    }

    /// Distinct labels in first-appearance order.
    pub fn labels(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for l in self.entries.iter().filter_map(|e| e.label.as_ref()) {
            if !out.contains(l) {
                out.push(l.clone());
            }
        }
        out
    }

    /// Hold out the last `per_class` entries of each label; unlabeled entries
    /// always stay in the training part.
    pub fn split_holdout(&self, per_class: usize) -> (TripletManifest, TripletManifest) {
        let mut held = vec![false; self.entries.len()];
        for label in self.labels() {
            let idx: Vec<usize> = (0..self.entries.len())
                .filter(|&i| self.entries[i].label.as_deref() == Some(label.as_str()))
                .collect();
            for &i in idx.iter().rev().take(per_class) {
                held[i] = true;
            }
        }
        let pick = |want: bool| TripletManifest {
            dim: self.dim,
            entries: self
                .entries
                .iter()
                .zip(&held)
                .filter(|(_, &h)| h == want)
                .map(|(e, _)| e.clone())
                .collect(),
            base_dir: self.base_dir.clone(),
        };
        (pick(false), pick(true))
    }
}

/// Load and structurally validate a JSON manifest; assets must exist.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<TripletManifest, AssetError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| AssetError::io(path, e))?;
    let file: ManifestFile = serde_json::from_str(&text)?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let manifest = TripletManifest::new(file.dim, file.entries, base)?;
    manifest.check_assets()?;
    Ok(manifest)
}
