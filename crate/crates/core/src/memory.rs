//! Cross-claim evidence memory.
//!
//! Evidence is stored under normalized entity keys. Before a claim is
//! verified its entity keys are recalled; afterwards the evidence it gathered
//! is committed under the same keys.

use std::collections::{BTreeMap, HashSet, VecDeque};
use std::io::Write;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::model::{normalize_key, EvidenceRecord};

pub const DEFAULT_PER_KEY_CAP: usize = 20;

#[derive(Debug, Error)]
pub enum MemoryError {
    #[error("memory file {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("memory file {path} is corrupt: {reason}")]
    Format { path: PathBuf, reason: String },
    #[error("memory store has no backing path")]
    NoBackingPath,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MemoryStore {
    entries: BTreeMap<String, VecDeque<EvidenceRecord>>,
    per_key_cap: usize,
    backing_path: Option<PathBuf>,
}

impl Default for MemoryStore {
    fn default() -> Self {
        MemoryStore::new(DEFAULT_PER_KEY_CAP)
    }
}

impl MemoryStore {
    pub fn new(per_key_cap: usize) -> Self {
        assert!(per_key_cap > 0, "per_key_cap must be positive");
        MemoryStore {
            entries: BTreeMap::new(),
            per_key_cap,
            backing_path: None,
        }
    }

    pub fn with_backing_path(mut self, path: impl Into<PathBuf>) -> Self {
        self.backing_path = Some(path.into());
        self
    }

    pub fn backing_path(&self) -> Option<&Path> {
        self.backing_path.as_deref()
    }

    pub fn per_key_cap(&self) -> usize {
        self.per_key_cap
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn key_count(&self) -> usize {
        self.entries.len()
    }

    pub fn record_count(&self) -> usize {
        self.entries.values().map(VecDeque::len).sum()
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn records(&self, key: &str) -> impl Iterator<Item = &EvidenceRecord> {
        self.entries.get(key).into_iter().flatten()
    }

    /// Same keys with the same ordered records. Cap and path are ignored.
    pub fn same_contents(&self, other: &MemoryStore) -> bool {
        self.entries == other.entries
    }

    /// Records under any of `keys` (exact match), in key order then insertion
    /// order, with repeats of the same (content, tool, query) dropped.
    pub fn recall(&self, keys: &[String]) -> Vec<EvidenceRecord> {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for key in keys {
            for record in self.records(key) {
                if seen.insert(record.identity()) {
                    out.push(record.clone());
                }
            }
        }
        out
    }

    /// Appends every record in `delta` under every key. A record already
    /// present under a key is skipped there; a key over its cap drops its
    /// oldest records first.
    pub fn update(&mut self, keys: &[String], delta: &[EvidenceRecord]) {
        for raw_key in keys {
            let key = normalize_key(raw_key);
            if key.is_empty() {
                continue;
            }
            let list = self.entries.entry(key).or_default();
            for record in delta {
                if record.content.is_empty() {
                    continue;
                }
                if list.iter().any(|r| r.identity() == record.identity()) {
                    continue;
                }
                list.push_back(record.clone());
                while list.len() > self.per_key_cap {
                    list.pop_front();
                }
            }
        }
        self.entries.retain(|_, v| !v.is_empty());
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.entries).expect("memory entries serialize")
    }

    /// Writes the store to its backing path atomically (temp file in the
    /// same directory, then rename).
    pub fn persist(&self) -> Result<(), MemoryError> {
        let path = self
            .backing_path
            .as_deref()
            .ok_or(MemoryError::NoBackingPath)?;
        self.persist_to(path)
    }

    pub fn persist_to(&self, path: &Path) -> Result<(), MemoryError> {
        let io_err = |source| MemoryError::Io {
            path: path.to_path_buf(),
            source,
        };
        let dir = match path.parent() {
            Some(p) if !p.as_os_str().is_empty() => p,
            _ => Path::new("."),
        };
        let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err)?;
        tmp.write_all(self.to_json().as_bytes()).map_err(io_err)?;
        tmp.as_file().sync_all().map_err(io_err)?;
        tmp.persist(path).map_err(|e| io_err(e.error))?;
        Ok(())
    }

    /// Loads a store written by [`MemoryStore::persist`]. Any malformed
    /// content, including an empty file, is a format error.
    pub fn load(path: &Path, per_key_cap: usize) -> Result<Self, MemoryError> {
        let text = std::fs::read_to_string(path).map_err(|source| MemoryError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let format_err = |reason: String| MemoryError::Format {
            path: path.to_path_buf(),
            reason,
        };
        let entries: BTreeMap<String, VecDeque<EvidenceRecord>> =
            serde_json::from_str(&text).map_err(|e| format_err(e.to_string()))?;
        for (key, records) in &entries {
            if normalize_key(key) != *key || key.is_empty() {
                return Err(format_err(format!("key '{key}' is not normalized")));
            }
            if records.is_empty() {
                return Err(format_err(format!("key '{key}' has no records")));
            }
            if records.len() > per_key_cap {
                return Err(format_err(format!(
                    "key '{key}' holds {} records, cap is {per_key_cap}",
                    records.len()
                )));
            }
            let mut seen = HashSet::new();
            for r in records {
                if r.content.is_empty() {
                    return Err(format_err(format!("empty evidence under '{key}'")));
                }
                if !seen.insert(r.identity()) {
                    return Err(format_err(format!("duplicate evidence under '{key}'")));
                }
            }
        }
        Ok(MemoryStore {
            entries,
            per_key_cap,
            backing_path: Some(path.to_path_buf()),
        })
    }

    /// Loads `path` if it exists, otherwise starts empty with that backing
    /// path.
    pub fn open(path: &Path, per_key_cap: usize) -> Result<Self, MemoryError> {
        if path.exists() {
            Self::load(path, per_key_cap)
        } else {
            Ok(MemoryStore::new(per_key_cap).with_backing_path(path))
        }
    }
}
