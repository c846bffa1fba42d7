use crate::error::{Error, Result};
use crate::ingest::{FrameRecord, Image, MOUTH};
use crate::tensor::Array;

use super::ExtractConfig;

/// Pixel box in continuous image coordinates; pixel `(r, c)` covers
/// `[c, c+1) × [r, r+1)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CropBox {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

/// Mouth landmark bounding box grown by `margin` of its size on each side,
/// clamped to the image.
pub fn mouth_box(frame: &FrameRecord, margin: f64) -> Result<CropBox> {
    let pts = &frame.landmarks.points[MOUTH];
    let (mut x0, mut y0, mut x1, mut y1) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in pts {
        x0 = x0.min(p[0]);
        x1 = x1.max(p[0]);
        y0 = y0.min(p[1]);
        y1 = y1.max(p[1]);
    }
    let (bw, bh) = (x1 - x0, y1 - y0);
    if !(bw > 0.0 && bh > 0.0) {
        return Err(Error::Degenerate(format!("mouth box is {bw}x{bh}")));
    }
    let b = CropBox {
        x0: (x0 - margin * bw).max(0.0),
        y0: (y0 - margin * bh).max(0.0),
        x1: (x1 + margin * bw).min(frame.image.width as f64),
        y1: (y1 + margin * bh).min(frame.image.height as f64),
    };
    if !(b.x1 > b.x0 && b.y1 > b.y0) {
        return Err(Error::Degenerate(format!("mouth box {b:?} lies outside the image")));
    }
    Ok(b)
}

/// Snaps a `[0, 1]` value to the 2⁻²⁴ grid. Differences and sums of grid
/// values are exact in `f32`, which makes the residual sequence exactly
/// invertible.
#[inline]
fn snap(v: f64) -> f32 {
    const GRID: f64 = (1u64 << 24) as f64;
    ((v * GRID).round() / GRID) as f32
}

/// Bilinear resample of `b` to `out_h × out_w × 3`, sampling at output
/// pixel centers.
pub fn resample(img: &Image, b: &CropBox, out_h: usize, out_w: usize) -> Array<f32> {
    let sy = (b.y1 - b.y0) / out_h as f64;
    let sx = (b.x1 - b.x0) / out_w as f64;
    let max_y = (img.height - 1) as f64;
    let max_x = (img.width - 1) as f64;
    let cols: Vec<(usize, usize, f64)> = (0..out_w)
        .map(|j| {
            let x = (b.x0 + (j as f64 + 0.5) * sx - 0.5).clamp(0.0, max_x);
            let lo = x.floor() as usize;
            (lo, (lo + 1).min(img.width - 1), x - lo as f64)
        })
        .collect();
    let mut out = Vec::with_capacity(out_h * out_w * 3);
    for i in 0..out_h {
        let y = (b.y0 + (i as f64 + 0.5) * sy - 0.5).clamp(0.0, max_y);
        let y_lo = y.floor() as usize;
        let y_hi = (y_lo + 1).min(img.height - 1);
        let fy = y - y_lo as f64;
        for &(x_lo, x_hi, fx) in &cols {
            for c in 0..3 {
                let top = img.at(y_lo, x_lo, c) as f64 * (1.0 - fx) + img.at(y_lo, x_hi, c) as f64 * fx;
                let bottom = img.at(y_hi, x_lo, c) as f64 * (1.0 - fx) + img.at(y_hi, x_hi, c) as f64 * fx;
                out.push(snap((top * (1.0 - fy) + bottom * fy).clamp(0.0, 1.0)));
            }
        }
    }
    Array::from_vec(&[out_h, out_w, 3], out).expect("crop size")
}

pub fn crop_mouth(frame: &FrameRecord, cfg: &ExtractConfig) -> Result<Array<f32>> {
    let b = mouth_box(frame, cfg.crop_margin)?;
    Ok(resample(&frame.image, &b, cfg.crop_h, cfg.crop_w))
}
