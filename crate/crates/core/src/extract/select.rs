//! Local (adjacent) and global (similar-pose) open-mouth frame selection.
//!
//! Ordinals are positions in the clip's frame list. Time gaps are measured
//! with each frame's recorded index, so clips with dropped frames keep
//! their true timeline.

use std::ops::Range;

use crate::error::{Error, Result};
use crate::ingest::ClipManifest;

use super::geometry::{openness, pose_descriptor, PoseDescriptor};
use super::ExtractConfig;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrameStats {
    pub openness: f64,
    pub pose: PoseDescriptor,
    /// Seconds from the start of the clip.
    pub time: f64,
}

pub fn frame_stats(clip: &ClipManifest) -> Result<Vec<FrameStats>> {
    clip.frames
        .iter()
        .map(|f| {
            Ok(FrameStats {
                openness: openness(&f.landmarks)?,
                pose: pose_descriptor(&f.landmarks)?,
                time: f.index as f64 / clip.fps,
            })
        })
        .collect()
}

/// Start of the `len`-frame window whose smallest openness is largest.
/// Ties go to the earliest start; the winner must reach `threshold`.
pub fn best_open_window(openness: &[f64], len: usize, threshold: f64) -> Result<usize> {
    if len == 0 || openness.len() < len {
        return Err(Error::TooShort {
            frames: openness.len(),
            needed: len,
        });
    }
    let mut best: Option<(usize, f64)> = None;
    for start in 0..=openness.len() - len {
        let m = openness[start..start + len].iter().copied().fold(f64::INFINITY, f64::min);
        if best.map_or(true, |(_, b)| m > b) {
            best = Some((start, m));
        }
    }
    let (start, m) = best.expect("at least one window");
    if !(m >= threshold) {
        return Err(Error::NoOpenMouth {
            window: len,
            threshold,
        });
    }
    Ok(start)
}

pub fn select_local_from(stats: &[FrameStats], cfg: &ExtractConfig) -> Result<Range<usize>> {
    let open: Vec<f64> = stats.iter().map(|s| s.openness).collect();
    let start = best_open_window(&open, cfg.local, cfg.open_threshold)?;
    Ok(start..start + cfg.local)
}

pub fn select_local(clip: &ClipManifest, cfg: &ExtractConfig) -> Result<Range<usize>> {
    if clip.frames.len() < cfg.local {
        return Err(Error::TooShort {
            frames: clip.frames.len(),
            needed: cfg.local,
        });
    }
    select_local_from(&frame_stats(clip)?, cfg)
}

/// Whether two frames are far enough apart in time to both be global picks.
pub fn gap_ok(a: &FrameStats, b: &FrameStats, min_gap_seconds: f64) -> bool {
    (a.time - b.time).abs() >= min_gap_seconds - 1e-12
}

/// Admissible global candidates with their pose distance to the mean local
/// pose, sorted ascending by (distance, ordinal).
pub fn global_candidates(stats: &[FrameStats], local: &Range<usize>, cfg: &ExtractConfig) -> Vec<(usize, f64)> {
    let local_poses: Vec<PoseDescriptor> = stats[local.clone()].iter().map(|s| s.pose).collect();
    let target = PoseDescriptor::mean(&local_poses);
    let mut cands: Vec<(usize, f64)> = stats
        .iter()
        .enumerate()
        .filter(|(i, s)| !local.contains(i) && s.openness >= cfg.open_threshold)
        .map(|(i, s)| (i, s.pose.distance(&target, &cfg.pose_weights)))
        .collect();
    cands.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    cands
}

/// Greedy gap-constrained pick of `cfg.global` frames; result ascending.
pub fn select_global_from(stats: &[FrameStats], local: &Range<usize>, cfg: &ExtractConfig) -> Result<Vec<usize>> {
    let mut picked: Vec<usize> = Vec::with_capacity(cfg.global);
    for (i, _) in global_candidates(stats, local, cfg) {
        if picked.len() == cfg.global {
            break;
        }
        if picked.iter().all(|&j| gap_ok(&stats[i], &stats[j], cfg.min_gap_seconds)) {
            picked.push(i);
        }
    }
    if picked.len() < cfg.global {
        return Err(Error::InsufficientGlobal {
            found: picked.len(),
            needed: cfg.global,
        });
    }
    picked.sort_unstable();
    Ok(picked)
}

pub fn select_global(clip: &ClipManifest, local: &Range<usize>, cfg: &ExtractConfig) -> Result<Vec<usize>> {
    select_global_from(&frame_stats(clip)?, local, cfg)
}
