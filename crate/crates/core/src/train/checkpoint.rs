use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::adam::Moments;
use super::TrainConfig;
use crate::container;
use crate::error::{Error, Result};
use crate::mstie::MstieParams;
use crate::tensor::Array;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"LPNC";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub config: TrainConfig,
    /// Completed epochs.
    pub epoch: usize,
    /// Completed optimizer steps.
    pub step: u64,
    pub params: MstieParams<f32>,
    pub moments: Moments<f32>,
}

#[derive(Serialize, Deserialize)]
struct Meta {
    config: TrainConfig,
    epoch: usize,
    step: u64,
    init_seed: u64,
}

const PARAM: &str = "param/";
const MOMENT_M: &str = "adam.m/";
const MOMENT_V: &str = "adam.v/";

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let meta = Meta {
            config: self.config.clone(),
            epoch: self.epoch,
            step: self.step,
            init_seed: self.params.seed,
        };
        let mut named = Vec::new();
        for (prefix, map) in [(PARAM, &self.params.arrays), (MOMENT_M, &self.moments.m), (MOMENT_V, &self.moments.v)] {
            for (k, a) in map {
                named.push((format!("{prefix}{k}"), a));
            }
        }
        let refs: Vec<(&str, &Array<f32>)> = named.iter().map(|(k, a)| (k.as_str(), *a)).collect();
        container::encode(CHECKPOINT_MAGIC, CHECKPOINT_VERSION, &meta, &refs)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (meta, arrays): (Meta, _) = container::decode(bytes, CHECKPOINT_MAGIC, CHECKPOINT_VERSION)?;
        let (mut params, mut m, mut v) = (BTreeMap::new(), BTreeMap::new(), BTreeMap::new());
        for (name, a) in arrays {
            let (map, key) = if let Some(k) = name.strip_prefix(PARAM) {
                (&mut params, k)
            } else if let Some(k) = name.strip_prefix(MOMENT_M) {
                (&mut m, k)
            } else if let Some(k) = name.strip_prefix(MOMENT_V) {
                (&mut v, k)
            } else {
                return Err(Error::Corrupt(format!("unexpected array {name}")));
            };
            map.insert(key.to_string(), a);
        }
        let params = MstieParams {
            arrays: params,
            seed: meta.init_seed,
        };
        params
            .check(&meta.config.model)
            .map_err(|e| Error::Corrupt(format!("parameters do not match the stored config: {e}")))?;
        for (label, map) in [("first", &m), ("second", &v)] {
            let same = map.len() == params.arrays.len()
                && params.arrays.iter().all(|(k, a)| map.get(k).is_some_and(|b| b.shape() == a.shape()));
            if !same {
                return Err(Error::Corrupt(format!("{label} moment arrays do not match the parameters")));
            }
        }
        Ok(Checkpoint {
            config: meta.config,
            epoch: meta.epoch,
            step: meta.step,
            params,
            moments: Moments { m, v },
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        container::write_file(path.as_ref(), &self.to_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&container::read_file(path.as_ref())?)
    }
}
