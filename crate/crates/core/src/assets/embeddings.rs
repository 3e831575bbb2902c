use std::collections::HashMap;
use std::path::Path;

use super::AssetError;

pub const EMBEDDING_MAGIC: &[u8; 4] = b"GSEB";
pub const EMBEDDING_VERSION: u32 = 1;

/// Precomputed teacher embeddings addressed by string key.
///
/// Rows keep insertion order, which is also the on-disk order.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    keys: Vec<String>,
    data: Vec<f32>,
    index: HashMap<String, usize>,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Self {
        EmbeddingTable {
            dim,
            keys: Vec::new(),
            data: Vec::new(),
            index: HashMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn keys(&self) -> &[String] {
        &self.keys
    }

    pub fn push(&mut self, key: impl Into<String>, row: &[f32]) -> Result<(), AssetError> {
        let key = key.into();
        if row.len() != self.dim {
            return Err(AssetError::DimensionMismatch {
                key,
                expected: self.dim,
                found: row.len(),
            });
        }
        if self.index.contains_key(&key) {
            return Err(AssetError::DuplicateKey(key));
        }
        self.index.insert(key.clone(), self.keys.len());
        self.keys.push(key);
        self.data.extend_from_slice(row);
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&[f32]> {
        self.index.get(key).map(|&i| self.row(i))
    }

    pub fn require(&self, key: &str) -> Result<&[f32], AssetError> {
        self.get(key)
            .ok_or_else(|| AssetError::DanglingKey(key.to_string()))
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn contains(&self, key: &str) -> bool {
        self.index.contains_key(key)
    }

    /// Append every row of `other`.
    pub fn merge(&mut self, other: &EmbeddingTable) -> Result<(), AssetError> {
        for (i, key) in other.keys.iter().enumerate() {
            self.push(key.clone(), other.row(i))?;
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + self.data.len() * 4 + self.keys.len() * 24);
        out.extend_from_slice(EMBEDDING_MAGIC);
        out.extend_from_slice(&EMBEDDING_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        out.extend_from_slice(&(self.keys.len() as u32).to_le_bytes());
        for (i, key) in self.keys.iter().enumerate() {
            out.extend_from_slice(&(key.len() as u16).to_le_bytes());
            out.extend_from_slice(key.as_bytes());
            for v in self.row(i) {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, AssetError> {
        let mut cur = Cursor { bytes, pos: 0 };
        let magic: [u8; 4] = cur.take(4, "magic")?.try_into().unwrap();
        if &magic != EMBEDDING_MAGIC {
            return Err(AssetError::BadMagic(magic));
        }
        let version = cur.u32("version")?;
        if version != EMBEDDING_VERSION {
            return Err(AssetError::Version {
                what: "embedding table",
                found: version,
                expected: EMBEDDING_VERSION,
            });
        }
        let dim = cur.u32("dim")? as usize;
        let count = cur.u32("count")? as usize;
        let mut table = EmbeddingTable::new(dim);
        for row in 0..count {
            let len = cur.u16("key length")? as usize;
            let key = std::str::from_utf8(cur.take(len, "key")?)
                .map_err(|_| AssetError::InvalidKey(row))?
                .to_string();
            let want = dim * 4;
            let remaining = cur.remaining();
            if remaining < want {
                // A short final row is a row written with the wrong width.
                if row + 1 == count && remaining.is_multiple_of(4) {
                    return Err(AssetError::DimensionMismatch {
                        key,
                        expected: dim,
                        found: remaining / 4,
                    });
                }
                return Err(AssetError::Truncated(format!("row `{key}`")));
            }
            let values: Vec<f32> = cur
                .take(want, "row")?
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            table.push(key, &values)?;
        }
        if cur.remaining() != 0 {
            let found = cur.remaining();
            if count > 0 && found.is_multiple_of(4) {
                let key = table.keys.last().cloned().unwrap_or_default();
                return Err(AssetError::DimensionMismatch {
                    key,
                    expected: dim,
                    found: dim + found / 4,
                });
            }
            return Err(AssetError::Truncated(format!("{found} trailing bytes")));
        }
        Ok(table)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, AssetError> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| AssetError::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), AssetError> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()).map_err(|e| AssetError::io(path, e))
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], AssetError> {
        if self.remaining() < n {
            return Err(AssetError::Truncated(what.to_string()));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32, AssetError> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn u16(&mut self, what: &str) -> Result<u16, AssetError> {
        let b = self.take(2, what)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }
}
