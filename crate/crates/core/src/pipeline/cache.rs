//! Content-addressed store for expensive per-item features.
//!
//! Entries are written to a temporary file and renamed into place, so
//! concurrent readers only ever see complete files.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use sha2::{Digest, Sha256};

use crate::error::Result;
use crate::io;
use crate::matrix::DenseMatrix;

#[derive(Debug, Clone)]
pub struct FeatureCache {
    dir: PathBuf,
}

static TMP_COUNTER: AtomicU64 = AtomicU64::new(0);

/// Incremental key builder.
pub struct CacheKey(Sha256);

impl CacheKey {
    pub fn new(tag: &str) -> Self {
        let mut h = Sha256::new();
        h.update((tag.len() as u64).to_le_bytes());
        h.update(tag.as_bytes());
        Self(h)
    }

    pub fn f64s(mut self, values: &[f64]) -> Self {
        self.0.update((values.len() as u64).to_le_bytes());
        for v in values {
            self.0.update(v.to_le_bytes());
        }
        self
    }

    pub fn usizes(mut self, values: &[usize]) -> Self {
        self.0.update((values.len() as u64).to_le_bytes());
        for &v in values {
            self.0.update((v as u64).to_le_bytes());
        }
        self
    }

    pub fn finish(self) -> String {
        hex::encode(self.0.finalize())
    }
}

impl FeatureCache {
    pub fn open(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref().to_path_buf();
        fs::create_dir_all(&dir)?;
        Ok(Self { dir })
    }

    fn path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.ssmf"))
    }

    /// A stored vector, or `None` if absent or unreadable.
    pub fn get(&self, key: &str) -> Option<Vec<f64>> {
        io::read_matrix(self.path(key)).ok().map(|m| m.data)
    }

    pub fn put(&self, key: &str, values: &[f64]) -> Result<()> {
        let bytes = io::encode_matrix(&DenseMatrix::row_vector(values.to_vec()))?;
        let tmp = self.dir.join(format!(
            ".{key}.{}.{}.tmp",
            std::process::id(),
            TMP_COUNTER.fetch_add(1, Ordering::Relaxed)
        ));
        fs::write(&tmp, bytes)?;
        fs::rename(&tmp, self.path(key))?;
        Ok(())
    }

    pub fn get_or_compute<F>(&self, key: &str, compute: F) -> Result<Vec<f64>>
    where
        F: FnOnce() -> Result<Vec<f64>>,
    {
        if let Some(v) = self.get(key) {
            return Ok(v);
        }
        let v = compute()?;
        self.put(key, &v)?;
        Ok(v)
    }
}
