//! Landmark-derived mouth and head-pose measurements. All lengths are
//! divided by the inter-ocular distance, so every quantity here is
//! invariant to uniform scaling and translation of the landmarks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{LandmarkSet, LEFT_EYE, RIGHT_EYE};

/// Inner-lip midline, upper and lower (zero-based; 63 and 67 in the
/// one-based numbering of the usual 68-point chart).
pub const UPPER_INNER_LIP: usize = 62;
pub const LOWER_INNER_LIP: usize = 66;
/// Inner-lip corners.
pub const INNER_LIP_LEFT: usize = 60;
pub const INNER_LIP_RIGHT: usize = 64;
pub const NOSE_BASE: usize = 33;
pub const JAW_LEFT: usize = 2;
pub const JAW_RIGHT: usize = 14;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoseDescriptor {
    /// Inner-lip height / inter-ocular distance.
    pub h: f64,
    /// Inner-lip width / inter-ocular distance.
    pub w: f64,
    /// Nose-to-left-jaw over nose-to-right-jaw distance.
    pub yaw_proxy: f64,
    /// Angle of the left-to-right eye line, radians.
    pub roll_proxy: f64,
}

impl PoseDescriptor {
    pub fn as_array(&self) -> [f64; 4] {
        [self.h, self.w, self.yaw_proxy, self.roll_proxy]
    }

    /// Weighted Euclidean distance.
    pub fn distance(&self, other: &PoseDescriptor, weights: &[f64; 4]) -> f64 {
        let (a, b) = (self.as_array(), other.as_array());
        (0..4).map(|k| weights[k] * (a[k] - b[k]).powi(2)).sum::<f64>().sqrt()
    }

    /// Componentwise mean.
    pub fn mean(descs: &[PoseDescriptor]) -> PoseDescriptor {
        let n = descs.len() as f64;
        let mut acc = [0.0; 4];
        for d in descs {
            for (a, v) in acc.iter_mut().zip(d.as_array()) {
                *a += v;
            }
        }
        PoseDescriptor {
            h: acc[0] / n,
            w: acc[1] / n,
            yaw_proxy: acc[2] / n,
            roll_proxy: acc[3] / n,
        }
    }
}

fn scale(lm: &LandmarkSet) -> Result<f64> {
    let s = lm.inter_ocular();
    if !(s > 0.0) || !s.is_finite() {
        return Err(Error::Degenerate(format!("inter-ocular distance {s}")));
    }
    Ok(s)
}

/// Normalized mouth opening.
pub fn openness(lm: &LandmarkSet) -> Result<f64> {
    Ok(lm.distance(UPPER_INNER_LIP, LOWER_INNER_LIP) / scale(lm)?)
}

pub fn pose_descriptor(lm: &LandmarkSet) -> Result<PoseDescriptor> {
    let s = scale(lm)?;
    let right_jaw = lm.distance(NOSE_BASE, JAW_RIGHT);
    if !(right_jaw > 0.0) {
        return Err(Error::Degenerate("nose coincides with right jaw landmark".into()));
    }
    let (l, r) = (lm.centroid(LEFT_EYE), lm.centroid(RIGHT_EYE));
    Ok(PoseDescriptor {
        h: lm.distance(UPPER_INNER_LIP, LOWER_INNER_LIP) / s,
        w: lm.distance(INNER_LIP_LEFT, INNER_LIP_RIGHT) / s,
        yaw_proxy: lm.distance(NOSE_BASE, JAW_LEFT) / right_jaw,
        roll_proxy: (r[1] - l[1]).atan2(r[0] - l[0]),
    })
}
