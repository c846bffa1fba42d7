//! Open-mouth frame selection and mouth sequence construction.
//!
//! A clip yields `local` consecutive open-mouth frames plus `global`
//! similar-pose frames from elsewhere in the clip. Their mouth crops form
//! the color sequence `C` (`N = local + global` frames); the structure
//! sequence holds consecutive differences `S[t] = C[t+1] − C[t]`.

mod crop;
mod geometry;
mod select;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::container;
use crate::error::{Error, Result};
use crate::ingest::{ClipManifest, Label};
use crate::tensor::Array;

pub use crop::{crop_mouth, mouth_box, resample, CropBox};
pub use geometry::{
    openness, pose_descriptor, PoseDescriptor, INNER_LIP_LEFT, INNER_LIP_RIGHT, JAW_LEFT, JAW_RIGHT,
    LOWER_INNER_LIP, NOSE_BASE, UPPER_INNER_LIP,
};
pub use select::{
    best_open_window, frame_stats, gap_ok, global_candidates, select_global, select_global_from, select_local,
    select_local_from, FrameStats,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtractConfig {
    /// Adjacent open-mouth frames.
    pub local: usize,
    /// Similar-pose frames from the rest of the clip.
    pub global: usize,
    pub min_gap_seconds: f64,
    pub crop_h: usize,
    pub crop_w: usize,
    /// Minimum normalized openness of every selected frame.
    pub open_threshold: f64,
    /// Weights of (h, w, yaw, roll) in the pose distance.
    pub pose_weights: [f64; 4],
    /// Fraction of the mouth box added on each side before cropping.
    pub crop_margin: f64,
}

impl Default for ExtractConfig {
    fn default() -> Self {
        ExtractConfig {
            local: 5,
            global: 3,
            min_gap_seconds: 0.09,
            crop_h: 64,
            crop_w: 144,
            open_threshold: 0.05,
            pose_weights: [1.0, 1.0, 0.5, 0.5],
            crop_margin: 0.25,
        }
    }
}

impl ExtractConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.local >= 2
            && self.global >= 1
            && self.min_gap_seconds >= 0.0
            && self.crop_h > 0
            && self.crop_w > 0
            && self.open_threshold >= 0.0
            && self.crop_margin >= 0.0
            && self.pose_weights.iter().all(|w| *w >= 0.0);
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid extraction config {self:?}")))
        }
    }

    pub fn frames(&self) -> usize {
        self.local + self.global
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MouthSequences {
    /// `N × crop_h × crop_w × 3`, values in `[0, 1]`.
    pub color: Array<f32>,
    /// `(N−1) × crop_h × crop_w × 3`, values in `[−1, 1]`.
    pub structure: Array<f32>,
    pub local_indices: Vec<usize>,
    pub global_indices: Vec<usize>,
}

/// Frame-difference residuals of a `N×…` sequence.
pub fn residuals(color: &Array<f32>) -> Array<f32> {
    let n = color.shape()[0];
    let frame: usize = color.shape()[1..].iter().product();
    let d = color.data();
    let data = (0..n.saturating_sub(1))
        .flat_map(|t| (0..frame).map(move |k| d[(t + 1) * frame + k] - d[t * frame + k]))
        .collect();
    let mut shape = color.shape().to_vec();
    shape[0] = n.saturating_sub(1);
    Array::from_vec(&shape, data).expect("residual shape")
}

/// Inverse of [`residuals`]: rebuilds the color sequence from its first
/// frame by cumulative summation.
pub fn integrate(first: &Array<f32>, structure: &Array<f32>) -> Result<Array<f32>> {
    if structure.shape().get(1..) != Some(first.shape()) {
        return Err(Error::Shape(format!(
            "first frame {:?} does not match residuals {:?}",
            first.shape(),
            structure.shape()
        )));
    }
    let frame = first.len();
    let mut data = first.data().to_vec();
    data.reserve(structure.len());
    for t in 0..structure.shape()[0] {
        for k in 0..frame {
            let prev = data[t * frame + k];
            data.push(prev + structure.data()[t * frame + k]);
        }
    }
    let mut shape = structure.shape().to_vec();
    shape[0] += 1;
    Array::from_vec(&shape, data)
}

pub fn build_sequences(clip: &ClipManifest, cfg: &ExtractConfig) -> Result<MouthSequences> {
    cfg.validate()?;
    if clip.frames.len() < cfg.local {
        return Err(Error::TooShort {
            frames: clip.frames.len(),
            needed: cfg.local,
        });
    }
    let stats = frame_stats(clip)?;
    let local = select_local_from(&stats, cfg)?;
    let global = select_global_from(&stats, &local, cfg)?;
    let order: Vec<usize> = local.clone().chain(global.iter().copied()).collect();
    let mut data = Vec::with_capacity(order.len() * cfg.crop_h * cfg.crop_w * 3);
    for &i in &order {
        data.extend(crop_mouth(&clip.frames[i], cfg)?.into_vec());
    }
    let color = Array::from_vec(&[order.len(), cfg.crop_h, cfg.crop_w, 3], data)?;
    let structure = residuals(&color);
    Ok(MouthSequences {
        color,
        structure,
        local_indices: local.collect(),
        global_indices: global,
    })
}

pub const BUNDLE_MAGIC: &[u8; 4] = b"LPSQ";
pub const BUNDLE_VERSION: u32 = 1;

/// Extracted sequences of one clip plus what is needed to reproduce them.
#[derive(Clone, Debug, PartialEq)]
pub struct SequenceBundle {
    pub clip_id: String,
    pub label: Option<Label>,
    pub fps: f64,
    pub config: ExtractConfig,
    pub sequences: MouthSequences,
}

#[derive(Serialize, Deserialize)]
struct BundleMeta {
    clip_id: String,
    label: Option<Label>,
    fps: f64,
    config: ExtractConfig,
    local_indices: Vec<usize>,
    global_indices: Vec<usize>,
}

impl SequenceBundle {
    pub fn extract(clip: &ClipManifest, cfg: &ExtractConfig) -> Result<Self> {
        Ok(SequenceBundle {
            clip_id: clip.clip_id.clone(),
            label: clip.label,
            fps: clip.fps,
            config: cfg.clone(),
            sequences: build_sequences(clip, cfg)?,
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let meta = BundleMeta {
            clip_id: self.clip_id.clone(),
            label: self.label,
            fps: self.fps,
            config: self.config.clone(),
            local_indices: self.sequences.local_indices.clone(),
            global_indices: self.sequences.global_indices.clone(),
        };
        container::encode(
            BUNDLE_MAGIC,
            BUNDLE_VERSION,
            &meta,
            &[("color", &self.sequences.color), ("structure", &self.sequences.structure)],
        )
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (meta, arrays): (BundleMeta, _) = container::decode(bytes, BUNDLE_MAGIC, BUNDLE_VERSION)?;
        let mut color = None;
        let mut structure = None;
        for (name, a) in arrays {
            match name.as_str() {
                "color" => color = Some(a),
                "structure" => structure = Some(a),
                other => return Err(Error::Corrupt(format!("unexpected array {other}"))),
            }
        }
        let (Some(color), Some(structure)) = (color, structure) else {
            return Err(Error::Corrupt("bundle lacks color or structure".into()));
        };
        Ok(SequenceBundle {
            clip_id: meta.clip_id,
            label: meta.label,
            fps: meta.fps,
            config: meta.config,
            sequences: MouthSequences {
                color,
                structure,
                local_indices: meta.local_indices,
                global_indices: meta.global_indices,
            },
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        container::write_file(path.as_ref(), &self.to_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&container::read_file(path.as_ref())?)
    }

    /// True when the file at `path` starts with the bundle magic.
    pub fn sniff(path: impl AsRef<Path>) -> bool {
        use std::io::Read;
        let mut magic = [0u8; 4];
        std::fs::File::open(path).and_then(|mut f| f.read_exact(&mut magic)).is_ok() && &magic == BUNDLE_MAGIC
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn residuals_invert_exactly() {
        let mut vals = Vec::new();
        let mut s = 12345u64;
        for _ in 0..4 * 5 * 6 * 3 {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let v = ((s >> 11) as f64 / (1u64 << 53) as f64 * (1u64 << 24) as f64).round() / (1u64 << 24) as f64;
            vals.push(v as f32);
        }
        let color = Array::from_vec(&[4, 5, 6, 3], vals).unwrap();
        let s = residuals(&color);
        assert_eq!(s.shape(), &[3, 5, 6, 3]);
        assert_eq!(integrate(&color.outer(0), &s).unwrap(), color);
        let frame = 5 * 6 * 3;
        for t in 0..3 {
            for k in 0..frame {
                let c0 = color.data()[t * frame + k];
                assert_eq!(s.data()[t * frame + k] + c0, color.data()[(t + 1) * frame + k]);
            }
        }
    }

    #[test]
    fn config_validation() {
        assert!(ExtractConfig::default().validate().is_ok());
        for bad in [
            ExtractConfig { local: 1, ..Default::default() },
            ExtractConfig { global: 0, ..Default::default() },
            ExtractConfig { min_gap_seconds: -0.1, ..Default::default() },
            ExtractConfig { crop_w: 0, ..Default::default() },
            ExtractConfig { open_threshold: -1.0, ..Default::default() },
        ] {
            assert!(bad.validate().is_err());
        }
    }
}
