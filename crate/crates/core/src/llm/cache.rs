//! One JSON file per cache key: `<dir>/<key>.json`.

use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::{LlmError, LlmRequest};
use crate::fsutil;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub key: String,
    pub request: LlmRequest,
    pub text: String,
    pub backend: String,
    pub created_at: DateTime<Utc>,
}

#[derive(Debug, Clone)]
pub struct ResponseCache {
    dir: PathBuf,
}

fn cache_err(path: &Path, e: impl ToString) -> LlmError {
    LlmError::Cache {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

impl ResponseCache {
    /// Opens (creating if needed) a cache directory.
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, LlmError> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir).map_err(|e| cache_err(&dir, e))?;
        Ok(Self { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path_for(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    /// A corrupt or mismatched entry is reported as a miss.
    pub fn get(&self, key: &str) -> Result<Option<CacheEntry>, LlmError> {
        let path = self.path_for(key);
        let bytes = match std::fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(cache_err(&path, e)),
        };
        match serde_json::from_slice::<CacheEntry>(&bytes) {
            Ok(entry) if entry.key == key => Ok(Some(entry)),
            Ok(_) => {
                tracing::warn!(path = %path.display(), "cache entry key mismatch, ignoring");
                Ok(None)
            }
            Err(e) => {
                tracing::warn!(path = %path.display(), error = %e, "corrupt cache entry, ignoring");
                Ok(None)
            }
        }
    }

    pub fn put(
        &self,
        key: &str,
        request: &LlmRequest,
        text: &str,
        backend: &str,
    ) -> Result<(), LlmError> {
        let entry = CacheEntry {
            key: key.to_string(),
            request: request.clone(),
            text: text.to_string(),
            backend: backend.to_string(),
            created_at: Utc::now(),
        };
        let path = self.path_for(key);
        let json = serde_json::to_vec_pretty(&entry).map_err(|e| cache_err(&path, e))?;
        fsutil::write_atomic(&path, &json).map_err(|e| cache_err(&path, e))
    }

    /// Entries sorted by key.
    pub fn entries(&self) -> Result<Vec<CacheEntry>, LlmError> {
        let mut out = Vec::new();
        for key in self.keys()? {
            if let Some(e) = self.get(&key)? {
                out.push(e);
            }
        }
        Ok(out)
    }

    fn keys(&self) -> Result<Vec<String>, LlmError> {
        let rd = std::fs::read_dir(&self.dir).map_err(|e| cache_err(&self.dir, e))?;
        let mut keys: Vec<String> = rd
            .filter_map(Result::ok)
            .filter_map(|e| {
                e.file_name()
                    .to_str()
                    .and_then(|n| n.strip_suffix(".json"))
                    .map(str::to_string)
            })
            .collect();
        keys.sort();
        Ok(keys)
    }

    /// Removes every cache file; returns how many were removed.
    pub fn clear(&self) -> Result<usize, LlmError> {
        let keys = self.keys()?;
        for key in &keys {
            let p = self.path_for(key);
            std::fs::remove_file(&p).map_err(|e| cache_err(&p, e))?;
        }
        Ok(keys.len())
    }
}
