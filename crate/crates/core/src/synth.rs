//! Procedural toy clips with exact landmark ground truth.
//!
//! Every clip draws a flat cartoon face: two eyes at a fixed inter-ocular
//! distance, a nose, and a mouth made of an outer lip ellipse, an inner
//! cavity ellipse and an upper teeth bar. The inner-lip gap follows a
//! smooth periodic trajectory and the 68 landmarks are computed from the
//! same geometry that is drawn.
//!
//! Real clips keep lip color and teeth geometry fixed for the whole clip.
//! Fake clips perturb them per frame (color and teeth jitter) and swap in
//! an alternate mouth appearance on some frames, which breaks both
//! adjacent-frame and similar-pose consistency.

use std::f64::consts::{PI, TAU};
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{stable_hash, stratified_splits, DatasetIndex, IndexEntry};
use crate::error::{Error, Result};
use crate::ingest::{write_manifest, ClipManifest, FrameRecord, Image, Label, LandmarkSet, Point, LANDMARK_COUNT};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub frames: usize,
    pub fps: f64,
    pub height: usize,
    pub width: usize,
    /// Range of the peak inner-lip gap, pixels.
    pub gap_peak: [f64; 2],
    /// Range of the mouth opening period, frames.
    pub period: [f64; 2],
    /// Range of the lip hue (may wrap past 1).
    pub lip_hue: [f64; 2],
    /// Range of the fraction of the opening covered by the upper teeth.
    pub teeth_fraction: [f64; 2],
    /// Fake only: per-frame standard deviation of lip hue.
    pub hue_jitter: f64,
    /// Fake only: per-frame standard deviation of the teeth fraction.
    pub teeth_jitter: f64,
    /// Fake only: per-frame probability of the alternate mouth appearance.
    pub swap_prob: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            frames: 60,
            fps: 25.0,
            height: 128,
            width: 128,
            gap_peak: [10.0, 14.0],
            period: [12.0, 20.0],
            lip_hue: [0.94, 1.02],
            teeth_fraction: [0.30, 0.45],
            hue_jitter: 0.04,
            teeth_jitter: 0.15,
            swap_prob: 0.3,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = self.frames >= 8
            && self.fps > 0.0
            && self.height >= 64
            && self.width >= 64
            && self.hue_jitter >= 0.0
            && self.teeth_jitter >= 0.0
            && (0.0..=1.0).contains(&self.swap_prob)
            && self.gap_peak[0] <= self.gap_peak[1]
            && self.period[0] > 0.0
            && self.period[0] <= self.period[1];
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid synth spec {self:?}")))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    Real,
    Fake,
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Appearance {
    lip: [f64; 3],
    teeth: [f64; 3],
    cavity: [f64; 3],
    lip_hue: f64,
    teeth_fraction: f64,
}

/// Per-clip geometry and base appearance, drawn once from the clip seed.
#[derive(Clone, Debug)]
pub struct ClipScript {
    center: [f64; 2],
    eye_distance: f64,
    eye_radius: [f64; 2],
    eye_drop: f64,
    nose_drop: f64,
    mouth_drop: f64,
    outer_half_width: f64,
    inner_half_width: f64,
    lip_thickness: f64,
    gap_peak: f64,
    period: f64,
    phase: f64,
    wobble_period: f64,
    wobble_phase: f64,
    yaw_base: f64,
    yaw_amp: f64,
    yaw_phase: f64,
    drift: [f64; 2],
    drift_period: f64,
    skin: [f64; 3],
    base: Appearance,
    alternate: Appearance,
    /// Per-frame fake perturbations: (hue, value, teeth, brightness) normals
    /// and a uniform for the swap decision.
    fake_draws: Vec<([f64; 4], f64)>,
}

/// Exact geometry behind a rendered frame.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameOracle {
    pub gap: f64,
    pub inner_width: f64,
    pub eye_distance: f64,
    pub yaw_ratio: f64,
    pub mouth_center: Point,
    pub lip_hue: f64,
    pub teeth_fraction: f64,
    pub swapped: bool,
}

fn hsv(h: f64, s: f64, v: f64) -> [f64; 3] {
    let h = h.rem_euclid(1.0) * 6.0;
    let i = h.floor();
    let f = h - i;
    let (p, q, t) = (v * (1.0 - s), v * (1.0 - s * f), v * (1.0 - s * (1.0 - f)));
    match i as u32 % 6 {
        0 => [v, t, p],
        1 => [q, v, p],
        2 => [p, v, t],
        3 => [p, q, v],
        4 => [t, p, v],
        _ => [v, p, q],
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    // Box–Muller; keeps the stream independent of distribution crates.
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (TAU * u2).cos()
}

fn lerp(r: [f64; 2], u: f64) -> f64 {
    r[0] + (r[1] - r[0]) * u
}

impl ClipScript {
    pub fn new(spec: &SynthSpec, clip_seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(clip_seed);
        let (w, h) = (spec.width as f64, spec.height as f64);
        let scale = w.min(h) / 128.0;
        let mut u = || rng.gen::<f64>();
        let center = [w / 2.0 + (u() - 0.5) * 12.0 * scale, h / 2.0 + (u() - 0.5) * 10.0 * scale];
        let eye_distance = (36.0 + 8.0 * u()) * scale;
        let eye_radius = [(5.0 + u()) * scale, (2.5 + u()) * scale];
        let eye_drop = -(16.0 + 4.0 * u()) * scale;
        let nose_drop = (4.0 + 3.0 * u()) * scale;
        let mouth_drop = (24.0 + 4.0 * u()) * scale;
        let outer_half_width = (18.0 + 5.0 * u()) * scale;
        let inner_half_width = outer_half_width * (0.72 + 0.1 * u());
        let lip_thickness = (3.5 + 1.5 * u()) * scale;
        let gap_peak = lerp(spec.gap_peak, u()) * scale;
        let period = lerp(spec.period, u());
        let phase = TAU * u();
        let wobble_period = 25.0 + 20.0 * u();
        let wobble_phase = TAU * u();
        let yaw_base = 0.9 + 0.2 * u();
        let yaw_amp = 0.04 * u();
        let yaw_phase = TAU * u();
        let drift = [(u() - 0.5) * 3.0 * scale, (u() - 0.5) * 3.0 * scale];
        let drift_period = 30.0 + 30.0 * u();
        let skin = hsv(0.05 + 0.05 * u(), 0.3 + 0.2 * u(), 0.65 + 0.25 * u());
        let lip_hue = lerp(spec.lip_hue, u());
        let (lip_s, lip_v) = (0.5 + 0.2 * u(), 0.6 + 0.2 * u());
        let teeth_fraction = lerp(spec.teeth_fraction, u());
        let teeth_v = 0.85 + 0.1 * u();
        let cavity = hsv(0.98, 0.7, 0.22 + 0.08 * u());
        let base = Appearance {
            lip: hsv(lip_hue, lip_s, lip_v),
            teeth: [teeth_v, teeth_v * 0.97, teeth_v * 0.9],
            cavity,
            lip_hue,
            teeth_fraction,
        };

        let mut fake_rng = ChaCha8Rng::seed_from_u64(clip_seed ^ 0x5eed_fa4e_0000_0001);
        let alt_hue = lip_hue + if fake_rng.gen::<bool>() { 0.09 } else { -0.09 };
        let alt_teeth = (teeth_fraction + if fake_rng.gen::<bool>() { 0.25 } else { -0.2 }).clamp(0.05, 0.85);
        let alternate = Appearance {
            lip: hsv(alt_hue, lip_s, (lip_v * 0.85).min(1.0)),
            teeth: [teeth_v * 0.85, teeth_v * 0.84, teeth_v * 0.7],
            cavity: hsv(0.0, 0.6, 0.32),
            lip_hue: alt_hue,
            teeth_fraction: alt_teeth,
        };
        let fake_draws = (0..spec.frames)
            .map(|_| {
                let n = [normal(&mut fake_rng), normal(&mut fake_rng), normal(&mut fake_rng), normal(&mut fake_rng)];
                (n, fake_rng.gen::<f64>())
            })
            .collect();

        ClipScript {
            center,
            eye_distance,
            eye_radius,
            eye_drop,
            nose_drop,
            mouth_drop,
            outer_half_width,
            inner_half_width,
            lip_thickness,
            gap_peak,
            period,
            phase,
            wobble_period,
            wobble_phase,
            yaw_base,
            yaw_amp,
            yaw_phase,
            drift,
            drift_period,
            skin,
            base,
            alternate,
            fake_draws,
        }
    }

    /// Inner-lip gap in pixels at frame `t`.
    pub fn gap(&self, t: usize) -> f64 {
        let t = t as f64;
        let open = 0.5 - 0.5 * (TAU * t / self.period + self.phase).cos();
        let wobble = 0.8 + 0.2 * (TAU * t / self.wobble_period + self.wobble_phase).sin();
        self.gap_peak * open * wobble
    }

    fn face_center(&self, t: usize) -> Point {
        let a = TAU * t as f64 / self.drift_period;
        [self.center[0] + self.drift[0] * a.sin(), self.center[1] + self.drift[1] * (a + 1.0).sin()]
    }

    fn yaw(&self, t: usize) -> f64 {
        self.yaw_base + self.yaw_amp * (TAU * t as f64 / 37.0 + self.yaw_phase).sin()
    }

    fn appearance(&self, spec: &SynthSpec, t: usize, mode: Mode) -> (Appearance, bool) {
        if mode == Mode::Real {
            return (self.base, false);
        }
        let (n, swap_u) = self.fake_draws[t];
        let swapped = swap_u < spec.swap_prob;
        let src = if swapped { self.alternate } else { self.base };
        let hue = src.lip_hue + spec.hue_jitter * n[0];
        let lip_hsv_v = (0.7 + 0.5 * spec.hue_jitter * n[1]).clamp(0.3, 1.0);
        let lip = if spec.hue_jitter == 0.0 {
            src.lip
        } else {
            let base_v = src.lip.iter().copied().fold(0.0, f64::max);
            let sat = 1.0 - src.lip.iter().copied().fold(1.0, f64::min) / base_v.max(1e-9);
            hsv(hue, sat, (base_v * lip_hsv_v / 0.7).min(1.0))
        };
        let teeth_fraction = (src.teeth_fraction + spec.teeth_jitter * n[2]).clamp(0.0, 0.9);
        let bright = 1.0 + 0.5 * spec.teeth_jitter * n[3];
        let teeth = src.teeth.map(|c| (c * bright).clamp(0.0, 1.0));
        (
            Appearance {
                lip,
                teeth,
                cavity: src.cavity,
                lip_hue: hue,
                teeth_fraction,
            },
            swapped,
        )
    }
}

struct Geometry {
    eyes: [Point; 2],
    nose: Point,
    mouth: Point,
    gap: f64,
    yaw: f64,
}

fn geometry(script: &ClipScript, t: usize) -> Geometry {
    let c = script.face_center(t);
    let half = script.eye_distance / 2.0;
    let ey = c[1] + script.eye_drop;
    Geometry {
        eyes: [[c[0] - half, ey], [c[0] + half, ey]],
        nose: [c[0], c[1] + script.nose_drop],
        mouth: [c[0], c[1] + script.mouth_drop],
        gap: script.gap(t),
        yaw: script.yaw(t),
    }
}

fn landmarks(script: &ClipScript, g: &Geometry) -> LandmarkSet {
    let mut p = vec![[0.0, 0.0]; LANDMARK_COUNT];
    let (nx, ny) = (g.nose[0], g.nose[1]);
    let jaw_reach = script.eye_distance * 0.95;

    // Jaw: 2 and 14 sit level with the nose base; their distances to it
    // encode the scripted yaw ratio.
    let left = [nx - jaw_reach * g.yaw, ny];
    let right = [nx + jaw_reach, ny];
    let chin = [nx, g.mouth[1] + script.lip_thickness + script.gap_peak + 10.0];
    for k in 0..17 {
        p[k] = match k {
            0 | 1 => [left[0] - 1.0 + k as f64 * 0.5, ny - 14.0 + 7.0 * k as f64],
            2 => left,
            14 => right,
            15 | 16 => [right[0] + 0.5 - (k - 15) as f64 * 0.5, ny - 7.0 * (k - 14) as f64],
            8 => chin,
            3..=7 => {
                let f = (k - 2) as f64 / 6.0;
                [left[0] + (chin[0] - left[0]) * f, left[1] + (chin[1] - left[1]) * (f * PI / 2.0).sin()]
            }
            _ => {
                let f = (k - 8) as f64 / 6.0;
                [chin[0] + (right[0] - chin[0]) * f, chin[1] + (right[1] - chin[1]) * (f * PI / 2.0).sin()]
            }
        };
    }
    // Brows.
    for k in 0..5 {
        let f = k as f64 / 4.0 - 0.5;
        p[17 + k] = [g.eyes[0][0] + f * 12.0, g.eyes[0][1] - 8.0 - 2.0 * (1.0 - 4.0 * f * f)];
        p[22 + k] = [g.eyes[1][0] + f * 12.0, g.eyes[1][1] - 8.0 - 2.0 * (1.0 - 4.0 * f * f)];
    }
    // Nose bridge and base.
    for k in 0..4 {
        let f = k as f64 / 3.0;
        p[27 + k] = [nx, g.eyes[0][1] + (ny - 3.0 - g.eyes[0][1]) * f];
    }
    for k in 0..5 {
        p[31 + k] = [nx + (k as f64 - 2.0) * 3.0, ny - if k == 2 { 0.0 } else { 1.0 }];
    }
    // Eyes: outer corner, two upper, inner corner, two lower.
    let (rx, ry) = (script.eye_radius[0], script.eye_radius[1]);
    for (e, base) in [(g.eyes[0], 36), (g.eyes[1], 42)] {
        for k in 0..6 {
            let a = PI - k as f64 * PI / 3.0;
            p[base + k] = [e[0] + rx * a.cos(), e[1] - ry * a.sin()];
        }
    }
    // Outer lip: corners 48/54, upper 49–53, lower 55–59.
    let (mx, my) = (g.mouth[0], g.mouth[1]);
    let (oax, oay) = (script.outer_half_width, g.gap / 2.0 + script.lip_thickness);
    for k in 0..12 {
        let a = PI - k as f64 * PI / 6.0;
        p[48 + k] = [mx + oax * a.cos(), my - oay * a.sin()];
    }
    // Inner lip: corners 60/64, midline 62/66.
    let (iax, iay) = (script.inner_half_width, g.gap / 2.0);
    let side = iay * (0.75f64).sqrt();
    p[60] = [mx - iax, my];
    p[61] = [mx - iax / 2.0, my - side];
    p[62] = [mx, my - iay];
    p[63] = [mx + iax / 2.0, my - side];
    p[64] = [mx + iax, my];
    p[65] = [mx + iax / 2.0, my + side];
    p[66] = [mx, my + iay];
    p[67] = [mx - iax / 2.0, my + side];
    LandmarkSet { points: p }
}

#[inline]
fn in_ellipse(x: f64, y: f64, c: Point, ax: f64, ay: f64) -> bool {
    if ax <= 0.0 || ay <= 0.0 {
        return false;
    }
    let (dx, dy) = ((x - c[0]) / ax, (y - c[1]) / ay);
    dx * dx + dy * dy <= 1.0
}

fn shade(x: f64, y: f64, script: &ClipScript, g: &Geometry, look: &Appearance) -> [f64; 3] {
    let (iax, iay) = (script.inner_half_width, g.gap / 2.0);
    if in_ellipse(x, y, g.mouth, iax, iay) {
        let teeth_bottom = g.mouth[1] - iay + look.teeth_fraction * g.gap;
        return if y <= teeth_bottom { look.teeth } else { look.cavity };
    }
    if in_ellipse(x, y, g.mouth, script.outer_half_width, iay + script.lip_thickness) {
        return look.lip;
    }
    for e in g.eyes {
        if in_ellipse(x, y, e, script.eye_radius[0], script.eye_radius[1]) {
            return [0.12, 0.1, 0.1];
        }
    }
    if in_ellipse(x, y, g.nose, 5.0, 2.5) {
        return script.skin.map(|c| c * 0.8);
    }
    let shadow = 1.0 - 0.1 * ((y - script.center[1]) / 64.0);
    script.skin.map(|c| (c * shadow).clamp(0.0, 1.0))
}

const SUPERSAMPLE: usize = 4;

/// Renders frame `t` of a clip; the oracle holds the exact drawn geometry.
pub fn render_frame(t: usize, spec: &SynthSpec, script: &ClipScript, mode: Mode) -> (FrameRecord, FrameOracle) {
    let g = geometry(script, t);
    let (look, swapped) = script.appearance(spec, t, mode);
    let lm = landmarks(script, &g);

    // Feature boxes get supersampled; the rest of the face is smooth.
    let pad = 2.0;
    let boxes = [
        (
            g.mouth[0] - script.outer_half_width - pad,
            g.mouth[1] - g.gap / 2.0 - script.lip_thickness - pad,
            g.mouth[0] + script.outer_half_width + pad,
            g.mouth[1] + g.gap / 2.0 + script.lip_thickness + pad,
        ),
        (
            g.eyes[0][0] - script.eye_radius[0] - pad,
            g.eyes[0][1] - script.eye_radius[1] - pad,
            g.eyes[1][0] + script.eye_radius[0] + pad,
            g.eyes[0][1] + script.eye_radius[1] + pad,
        ),
        (g.nose[0] - 5.0 - pad, g.nose[1] - 2.5 - pad, g.nose[0] + 5.0 + pad, g.nose[1] + 2.5 + pad),
    ];
    let mut img = Image::filled(spec.height, spec.width, [0.0; 3]);
    for r in 0..spec.height {
        for c in 0..spec.width {
            let (px, py) = (c as f64 + 0.5, r as f64 + 0.5);
            let fine = boxes.iter().any(|b| px >= b.0 && px <= b.2 && py >= b.1 && py <= b.3);
            let rgb = if fine {
                let mut acc = [0.0; 3];
                for sy in 0..SUPERSAMPLE {
                    for sx in 0..SUPERSAMPLE {
                        let x = c as f64 + (sx as f64 + 0.5) / SUPERSAMPLE as f64;
                        let y = r as f64 + (sy as f64 + 0.5) / SUPERSAMPLE as f64;
                        let v = shade(x, y, script, &g, &look);
                        for k in 0..3 {
                            acc[k] += v[k];
                        }
                    }
                }
                acc.map(|v| v / (SUPERSAMPLE * SUPERSAMPLE) as f64)
            } else {
                shade(px, py, script, &g, &look)
            };
            img.set(r, c, rgb.map(|v| v.clamp(0.0, 1.0) as f32));
        }
    }
    let oracle = FrameOracle {
        gap: g.gap,
        inner_width: 2.0 * script.inner_half_width,
        eye_distance: script.eye_distance,
        yaw_ratio: g.yaw,
        mouth_center: g.mouth,
        lip_hue: look.lip_hue,
        teeth_fraction: look.teeth_fraction,
        swapped,
    };
    (
        FrameRecord {
            image: img,
            landmarks: lm,
            index: t,
        },
        oracle,
    )
}

pub fn clip_seed(spec: &SynthSpec, clip_id: &str) -> u64 {
    stable_hash(spec.seed, clip_id)
}

/// Renders a whole clip in memory.
pub fn render_clip(spec: &SynthSpec, clip_id: &str, mode: Mode) -> (ClipManifest, Vec<FrameOracle>) {
    let script = ClipScript::new(spec, clip_seed(spec, clip_id));
    let (frames, oracles): (Vec<_>, Vec<_>) = (0..spec.frames)
        .into_par_iter()
        .map(|t| render_frame(t, spec, &script, mode))
        .unzip();
    let label = match mode {
        Mode::Real => Label::Real,
        Mode::Fake => Label::Fake,
    };
    (
        ClipManifest {
            clip_id: clip_id.to_string(),
            fps: spec.fps,
            label: Some(label),
            frames,
        },
        oracles,
    )
}

/// Writes `n_clips` labeled clips under `out_dir/clips/` plus
/// `out_dir/index.json`. The number of fakes is `round(n·fake_ratio)`.
pub fn generate_dataset(n_clips: usize, fake_ratio: f64, spec: &SynthSpec, out_dir: impl AsRef<Path>) -> Result<DatasetIndex> {
    spec.validate()?;
    if n_clips < 2 || !(fake_ratio > 0.0 && fake_ratio < 1.0) {
        return Err(Error::Config(format!(
            "need at least 2 clips and 0 < fake ratio < 1 (got {n_clips}, {fake_ratio})"
        )));
    }
    let out_dir = out_dir.as_ref();
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let n_fake = ((n_clips as f64 * fake_ratio).round() as usize).clamp(1, n_clips - 1);
    let ids: Vec<String> = (0..n_clips).map(|i| format!("clip_{i:04}")).collect();
    let mut order: Vec<usize> = (0..n_clips).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed));
    let mut labels = vec![Label::Real; n_clips];
    for &i in &order[..n_fake] {
        labels[i] = Label::Fake;
    }

    let mut splits = vec![crate::dataset::Split::Train; n_clips];
    for class in [Label::Fake, Label::Real] {
        let members: Vec<usize> = (0..n_clips).filter(|&i| labels[i] == class).collect();
        let member_ids: Vec<String> = members.iter().map(|&i| ids[i].clone()).collect();
        for (&i, s) in members.iter().zip(stratified_splits(&member_ids, spec.seed)) {
            splits[i] = s;
        }
    }

    let entries = (0..n_clips)
        .into_par_iter()
        .map(|i| {
            let mode = if labels[i] == Label::Fake { Mode::Fake } else { Mode::Real };
            let (clip, _) = render_clip(spec, &ids[i], mode);
            let rel = format!("clips/{}", ids[i]);
            write_manifest(&clip, out_dir.join(&rel))?;
            Ok(IndexEntry {
                clip_id: ids[i].clone(),
                manifest: format!("{rel}/manifest.json"),
                label: Some(labels[i]),
                split: splits[i],
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let index = DatasetIndex {
        root: out_dir.to_path_buf(),
        entries,
    };
    index.save()?;
    Ok(index)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extract::{openness, pose_descriptor};

    #[test]
    fn landmarks_match_scripted_geometry() {
        let spec = SynthSpec::default();
        let script = ClipScript::new(&spec, 11);
        for t in [0, 3, 7, 20, 41] {
            let (f, o) = render_frame(t, &spec, &script, Mode::Real);
            assert!((f.landmarks.distance(62, 66) - o.gap).abs() < 1e-9);
            assert!((f.landmarks.inter_ocular() - o.eye_distance).abs() < 1e-9);
            assert!((openness(&f.landmarks).unwrap() - o.gap / o.eye_distance).abs() < 1e-9);
            let pose = pose_descriptor(&f.landmarks).unwrap();
            assert!((pose.yaw_proxy - o.yaw_ratio).abs() < 1e-9);
            assert!((pose.w - o.inner_width / o.eye_distance).abs() < 1e-9);
        }
    }

    #[test]
    fn real_mode_appearance_is_constant() {
        let spec = SynthSpec::default();
        let (_, oracles) = render_clip(&spec, "c", Mode::Real);
        assert!(oracles.windows(2).all(|w| w[0].lip_hue == w[1].lip_hue && w[0].teeth_fraction == w[1].teeth_fraction));
    }

    #[test]
    fn zero_perturbation_fake_equals_real() {
        let spec = SynthSpec {
            hue_jitter: 0.0,
            teeth_jitter: 0.0,
            swap_prob: 0.0,
            ..SynthSpec::default()
        };
        let (real, _) = render_clip(&spec, "same", Mode::Real);
        let (fake, _) = render_clip(&spec, "same", Mode::Fake);
        assert_eq!(real.frames, fake.frames);
    }

    #[test]
    fn fake_mode_varies_appearance() {
        let spec = SynthSpec::default();
        let (_, oracles) = render_clip(&spec, "f", Mode::Fake);
        assert!(oracles.windows(2).any(|w| w[0].lip_hue != w[1].lip_hue));
        assert!(oracles.iter().any(|o| o.swapped));
    }

    #[test]
    fn rendering_is_deterministic() {
        let spec = SynthSpec::default();
        let (a, _) = render_clip(&spec, "d", Mode::Fake);
        let (b, _) = render_clip(&spec, "d", Mode::Fake);
        assert_eq!(a, b);
    }
}
