//! Frame + landmark interchange format.
//!
//! A clip is a JSON manifest next to a directory of lossless RGB frames:
//!
//! ```json
//! { "version": 1, "clip_id": "clip_0001", "fps": 25.0, "label": 0,
//!   "frames": [ { "image": "frames/00000.png", "landmarks": [[x, y], ...] } ] }
//! ```
//!
//! Landmarks follow the 68-point facial annotation (zero-based indices:
//! jaw 0–16, nose 27–35, eyes 36–41 / 42–47, mouth 48–67). Pixel values are
//! normalized to `[0, 1]` at load time.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MANIFEST_VERSION: u32 = 1;
pub const LANDMARK_COUNT: usize = 68;

pub const LEFT_EYE: std::ops::Range<usize> = 36..42;
pub const RIGHT_EYE: std::ops::Range<usize> = 42..48;
pub const MOUTH: std::ops::Range<usize> = 48..68;

pub type Point = [f64; 2];

/// Ground-truth category of a clip. The numeric values are the ones stored
/// in manifests and used as training targets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Label {
    Fake = 0,
    Real = 1,
}

impl Label {
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn is_fake(self) -> bool {
        self == Label::Fake
    }
}

impl TryFrom<u8> for Label {
    type Error = String;

    fn try_from(v: u8) -> std::result::Result<Self, String> {
        match v {
            0 => Ok(Label::Fake),
            1 => Ok(Label::Real),
            other => Err(format!("label must be 0 or 1, got {other}")),
        }
    }
}

impl From<Label> for u8 {
    fn from(l: Label) -> u8 {
        l as u8
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Fake => "fake",
            Label::Real => "real",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LandmarkSet {
    pub points: Vec<Point>,
}

fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

impl LandmarkSet {
    /// Checked constructor: exactly 68 finite points.
    pub fn new(points: Vec<Point>) -> Result<Self> {
        if points.len() != LANDMARK_COUNT {
            return Err(Error::Schema(format!(
                "expected {LANDMARK_COUNT} landmarks, got {}",
                points.len()
            )));
        }
        if points.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Schema("non-finite landmark coordinate".into()));
        }
        Ok(LandmarkSet { points })
    }

    pub fn point(&self, i: usize) -> Point {
        self.points[i]
    }

    pub fn centroid(&self, range: std::ops::Range<usize>) -> Point {
        let n = range.len() as f64;
        let (sx, sy) = self.points[range].iter().fold((0.0, 0.0), |(sx, sy), p| (sx + p[0], sy + p[1]));
        [sx / n, sy / n]
    }

    /// Distance between the two eye centroids.
    pub fn inter_ocular(&self) -> f64 {
        dist(self.centroid(LEFT_EYE), self.centroid(RIGHT_EYE))
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        dist(self.points[i], self.points[j])
    }

    pub fn map(&self, f: impl Fn(Point) -> Point) -> LandmarkSet {
        LandmarkSet {
            points: self.points.iter().map(|&p| f(p)).collect(),
        }
    }
}

/// Interleaved RGB image with `f32` channels.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    pub height: usize,
    pub width: usize,
    pub data: Vec<f32>,
}

impl Image {
    pub fn filled(height: usize, width: usize, rgb: [f32; 3]) -> Self {
        let mut data = Vec::with_capacity(height * width * 3);
        for _ in 0..height * width {
            data.extend_from_slice(&rgb);
        }
        Image { height, width, data }
    }

    #[inline]
    pub fn at(&self, y: usize, x: usize, c: usize) -> f32 {
        self.data[(y * self.width + x) * 3 + c]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, rgb: [f32; 3]) {
        let o = (y * self.width + x) * 3;
        self.data[o..o + 3].copy_from_slice(&rgb);
    }

    pub fn from_rgb8(img: &image::RgbImage) -> Self {
        Image {
            height: img.height() as usize,
            width: img.width() as usize,
            data: img.as_raw().iter().map(|&v| v as f32 / 255.0).collect(),
        }
    }

    /// Quantizes to 8 bits with rounding; values outside `[0, 1]` saturate.
    pub fn to_rgb8(&self) -> image::RgbImage {
        let raw = self.data.iter().map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8).collect();
        image::RgbImage::from_raw(self.width as u32, self.height as u32, raw).expect("buffer matches dimensions")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FrameRecord {
    pub image: Image,
    pub landmarks: LandmarkSet,
    pub index: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClipManifest {
    pub clip_id: String,
    pub fps: f64,
    pub label: Option<Label>,
    pub frames: Vec<FrameRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestFile {
    version: u32,
    clip_id: String,
    fps: f64,
    label: Option<Label>,
    frames: Vec<FrameEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct FrameEntry {
    image: String,
    landmarks: Vec<Point>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    index: Option<usize>,
}

fn json_error(path: &Path, e: serde_json::Error) -> Error {
    match e.classify() {
        serde_json::error::Category::Data => Error::Schema(format!("{}: {e}", path.display())),
        _ => Error::Parse {
            path: path.to_path_buf(),
            msg: e.to_string(),
        },
    }
}

/// Reads a clip manifest and decodes its frames.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<ClipManifest> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: ManifestFile = serde_json::from_str(&text).map_err(|e| json_error(path, e))?;
    if file.version != MANIFEST_VERSION {
        return Err(Error::Schema(format!(
            "manifest version {} (expected {MANIFEST_VERSION})",
            file.version
        )));
    }
    if file.frames.is_empty() {
        return Err(Error::Schema("manifest has no frames".into()));
    }
    for (i, f) in file.frames.iter().enumerate() {
        if f.landmarks.len() != LANDMARK_COUNT {
            return Err(Error::Schema(format!(
                "frame {i}: expected {LANDMARK_COUNT} landmarks, got {}",
                f.landmarks.len()
            )));
        }
    }
    let base = path.parent().unwrap_or(Path::new("."));
    let frames = file
        .frames
        .into_par_iter()
        .enumerate()
        .map(|(i, f)| {
            let img_path = base.join(&f.image);
            let decoded = image::open(&img_path).map_err(|e| Error::Image {
                path: img_path.clone(),
                msg: e.to_string(),
            })?;
            Ok(FrameRecord {
                image: Image::from_rgb8(&decoded.to_rgb8()),
                landmarks: LandmarkSet { points: f.landmarks },
                index: f.index.unwrap_or(i),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let clip = ClipManifest {
        clip_id: file.clip_id,
        fps: file.fps,
        label: file.label,
        frames,
    };
    let violations = validate_manifest(&clip);
    if !violations.is_empty() {
        let msgs: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
        return Err(Error::Schema(msgs.join("; ")));
    }
    Ok(clip)
}

/// Writes `clip` as `dir/manifest.json` plus `dir/frames/NNNNN.png`.
/// Returns the manifest path.
pub fn write_manifest(clip: &ClipManifest, dir: impl AsRef<Path>) -> Result<PathBuf> {
    let dir = dir.as_ref();
    let frames_dir = dir.join("frames");
    fs::create_dir_all(&frames_dir).map_err(|e| Error::io(&frames_dir, e))?;
    let entries = clip
        .frames
        .par_iter()
        .map(|f| {
            let rel = format!("frames/{:05}.png", f.index);
            let p = dir.join(&rel);
            f.image.to_rgb8().save_with_format(&p, image::ImageFormat::Png).map_err(|e| Error::Image {
                path: p.clone(),
                msg: e.to_string(),
            })?;
            Ok(FrameEntry {
                image: rel,
                landmarks: f.landmarks.points.clone(),
                index: Some(f.index),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let file = ManifestFile {
        version: MANIFEST_VERSION,
        clip_id: clip.clip_id.clone(),
        fps: clip.fps,
        label: clip.label,
        frames: entries,
    };
    let path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&file).expect("manifest serializes");
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Rule {
    NoFrames,
    FpsPositive,
    FrameOrder,
    LandmarkCount,
    LandmarkFinite,
    InterOcular,
    ImageSize,
    PixelRange,
}

impl Rule {
    pub fn id(self) -> &'static str {
        match self {
            Rule::NoFrames => "no_frames",
            Rule::FpsPositive => "fps_positive",
            Rule::FrameOrder => "frame_order",
            Rule::LandmarkCount => "landmark_count",
            Rule::LandmarkFinite => "landmark_finite",
            Rule::InterOcular => "inter_ocular",
            Rule::ImageSize => "image_size",
            Rule::PixelRange => "pixel_range",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    /// Position in the frame list; `None` for clip-level rules.
    pub frame: Option<usize>,
    pub rule: Rule,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.frame {
            Some(i) => write!(f, "frame {i}: {}: {}", self.rule.id(), self.detail),
            None => write!(f, "clip: {}: {}", self.rule.id(), self.detail),
        }
    }
}

/// Lists every violated invariant, ordered by frame then rule. Clip-level
/// violations come first.
pub fn validate_manifest(m: &ClipManifest) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |frame, rule, detail: String| out.push(Violation { frame, rule, detail });
    if m.frames.is_empty() {
        push(None, Rule::NoFrames, "clip has no frames".into());
    }
    if !(m.fps.is_finite() && m.fps > 0.0) {
        push(None, Rule::FpsPositive, format!("fps = {}", m.fps));
    }
    let reference = m.frames.first().map(|f| (f.image.height, f.image.width));
    for (i, f) in m.frames.iter().enumerate() {
        if i > 0 && f.index <= m.frames[i - 1].index {
            push(
                Some(i),
                Rule::FrameOrder,
                format!("index {} does not follow {}", f.index, m.frames[i - 1].index),
            );
        }
        let lm = &f.landmarks;
        let count_ok = lm.points.len() == LANDMARK_COUNT;
        if !count_ok {
            push(Some(i), Rule::LandmarkCount, format!("{} landmarks", lm.points.len()));
        }
        let finite = lm.points.iter().flatten().all(|v| v.is_finite());
        if !finite {
            let bad = lm.points.iter().position(|p| !p[0].is_finite() || !p[1].is_finite()).unwrap();
            push(Some(i), Rule::LandmarkFinite, format!("landmark {bad} is not finite"));
        }
        if count_ok && finite {
            let d = lm.inter_ocular();
            if !(d > 0.0) {
                push(Some(i), Rule::InterOcular, format!("inter-ocular distance {d}"));
            }
        }
        let (h, w) = (f.image.height, f.image.width);
        if f.image.data.len() != h * w * 3 {
            push(
                Some(i),
                Rule::ImageSize,
                format!("{} values for a {h}x{w} RGB image", f.image.data.len()),
            );
        } else if let Some((rh, rw)) = reference {
            if (h, w) != (rh, rw) {
                push(Some(i), Rule::ImageSize, format!("{h}x{w} differs from first frame {rh}x{rw}"));
            }
        }
        if let Some(v) = f.image.data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            push(Some(i), Rule::PixelRange, format!("pixel value {v} outside [0, 1]"));
        }
    }
    out.sort_by_key(|v| (v.frame, v.rule));
    out
}
