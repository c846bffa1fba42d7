//! Dataset index: the JSON list that ties clip manifests to labels and
//! train/val/test splits.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::Label;

pub const INDEX_FILE: &str = "index.json";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl std::str::FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split {other:?} (train, val, test)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub clip_id: String,
    /// Manifest (or sequence bundle) path relative to the index file.
    pub manifest: String,
    pub label: Option<Label>,
    pub split: Split,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetIndex {
    pub root: PathBuf,
    pub entries: Vec<IndexEntry>,
}

impl DatasetIndex {
    /// Accepts the dataset directory or the index file itself.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = if path.is_dir() { path.join(INDEX_FILE) } else { path.to_path_buf() };
        let text = fs::read_to_string(&file).map_err(|e| Error::io(&file, e))?;
        let entries: Vec<IndexEntry> = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: file.clone(),
            msg: e.to_string(),
        })?;
        Ok(DatasetIndex {
            root: file.parent().unwrap_or(Path::new(".")).to_path_buf(),
            entries,
        })
    }

    pub fn save(&self) -> Result<PathBuf> {
        let file = self.root.join(INDEX_FILE);
        let text = serde_json::to_string_pretty(&self.entries).expect("index serializes");
        fs::write(&file, text).map_err(|e| Error::io(&file, e))?;
        Ok(file)
    }

    pub fn path_of(&self, entry: &IndexEntry) -> PathBuf {
        self.root.join(&entry.manifest)
    }

    pub fn split(&self, split: Split) -> Vec<&IndexEntry> {
        self.entries.iter().filter(|e| e.split == split).collect()
    }
}

/// FNV-1a over `seed` and `key`, finished with a splitmix64 mix. Stable
/// across platforms and toolchains.
pub fn stable_hash(seed: u64, key: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in seed.to_le_bytes().iter().chain(key.as_bytes()) {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h = h.wrapping_add(0x9e37_79b9_7f4a_7c15);
    h = (h ^ (h >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    h = (h ^ (h >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    h ^ (h >> 31)
}

/// Deterministic 70/15/15 split of one class, ordered by seeded hash.
pub fn stratified_splits(ids: &[String], seed: u64) -> Vec<Split> {
    let n = ids.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| (stable_hash(seed, &ids[i]), i));
    let n_train = (n as f64 * 0.70).round() as usize;
    let n_val = (n as f64 * 0.15).round() as usize;
    let mut out = vec![Split::Test; n];
    for (rank, &i) in order.iter().enumerate() {
        out[i] = if rank < n_train {
            Split::Train
        } else if rank < n_train + n_val {
            Split::Val
        } else {
            Split::Test
        };
    }
    out
}
