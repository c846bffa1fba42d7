//! Channels-last 3D cross-correlation kernels.
//!
//! Input layout is `T×H×W×Cin`, kernel layout `kt×kh×kw×Cin×Cout`, output
//! `T'×H'×W'×Cout`. Padding is zero padding applied symmetrically per axis.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Conv3dSpec {
    pub stride: [usize; 3],
    pub pad: [usize; 3],
}

impl Conv3dSpec {
    /// Unit stride, no padding.
    pub fn valid() -> Self {
        Conv3dSpec {
            stride: [1, 1, 1],
            pad: [0, 0, 0],
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct ConvDims {
    pub input: [usize; 4],
    pub kernel: [usize; 5],
    pub output: [usize; 4],
}

pub(crate) fn conv_dims(x: &[usize], k: &[usize], spec: &Conv3dSpec) -> Result<ConvDims> {
    if x.len() != 4 || k.len() != 5 {
        return Err(Error::Shape(format!(
            "conv3d expects T×H×W×C input and 5-d kernel, got {x:?} and {k:?}"
        )));
    }
    if x[3] != k[3] {
        return Err(Error::Shape(format!(
            "conv3d input has {} channels, kernel expects {}",
            x[3], k[3]
        )));
    }
    if spec.stride.contains(&0) {
        return Err(Error::Shape("conv3d stride must be positive".into()));
    }
    let mut out = [0usize; 4];
    for a in 0..3 {
        let padded = x[a] + 2 * spec.pad[a];
        if k[a] == 0 || padded < k[a] {
            return Err(Error::Shape(format!(
                "kernel {:?} does not fit padded input {:?} on axis {a}",
                &k[..3],
                &x[..3]
            )));
        }
        out[a] = (padded - k[a]) / spec.stride[a] + 1;
    }
    out[3] = k[4];
    Ok(ConvDims {
        input: [x[0], x[1], x[2], x[3]],
        kernel: [k[0], k[1], k[2], k[3], k[4]],
        output: out,
    })
}

#[inline]
fn source(o: usize, d: usize, stride: usize, pad: usize, len: usize) -> Option<usize> {
    let p = o * stride + d;
    if p < pad || p - pad >= len {
        None
    } else {
        Some(p - pad)
    }
}

/// Visits every (output position, kernel tap, input position) triple that
/// touches real (non-padding) input.
#[inline]
fn for_each_tap(dims: &ConvDims, spec: &Conv3dSpec, mut f: impl FnMut(usize, usize, usize)) {
    let [it, ih, iw, _] = dims.input;
    let [kt, kh, kw, _, _] = dims.kernel;
    let [ot, oh, ow, _] = dims.output;
    for t in 0..ot {
        for h in 0..oh {
            for w in 0..ow {
                let o = (t * oh + h) * ow + w;
                for dt in 0..kt {
                    let Some(st) = source(t, dt, spec.stride[0], spec.pad[0], it) else { continue };
                    for dh in 0..kh {
                        let Some(sh) = source(h, dh, spec.stride[1], spec.pad[1], ih) else { continue };
                        for dw in 0..kw {
                            let Some(sw) = source(w, dw, spec.stride[2], spec.pad[2], iw) else { continue };
                            let tap = (dt * kh + dh) * kw + dw;
                            let i = (st * ih + sh) * iw + sw;
                            f(o, tap, i);
                        }
                    }
                }
            }
        }
    }
}

pub(crate) fn forward<T: Scalar>(x: &[T], k: &[T], dims: &ConvDims, spec: &Conv3dSpec) -> Vec<T> {
    let cin = dims.input[3];
    let cout = dims.output[3];
    let n_out: usize = dims.output.iter().product();
    let mut y = vec![T::zero(); n_out];
    for_each_tap(dims, spec, |o, tap, i| {
        let xs = &x[i * cin..(i + 1) * cin];
        let ys = &mut y[o * cout..(o + 1) * cout];
        for (ci, &xv) in xs.iter().enumerate() {
            if xv == T::zero() {
                continue;
            }
            let ks = &k[(tap * cin + ci) * cout..(tap * cin + ci + 1) * cout];
            for (yv, &kv) in ys.iter_mut().zip(ks) {
                *yv += xv * kv;
            }
        }
    });
    y
}

/// Returns (d input, d kernel); each only when requested.
pub(crate) fn backward<T: Scalar>(
    x: &[T],
    k: &[T],
    dy: &[T],
    dims: &ConvDims,
    spec: &Conv3dSpec,
    want_dx: bool,
    want_dk: bool,
) -> (Option<Vec<T>>, Option<Vec<T>>) {
    let cin = dims.input[3];
    let cout = dims.output[3];
    let mut dx = want_dx.then(|| vec![T::zero(); x.len()]);
    let mut dk = want_dk.then(|| vec![T::zero(); k.len()]);
    for_each_tap(dims, spec, |o, tap, i| {
        let g = &dy[o * cout..(o + 1) * cout];
        if let Some(dk) = dk.as_mut() {
            for ci in 0..cin {
                let xv = x[i * cin + ci];
                if xv == T::zero() {
                    continue;
                }
                let row = &mut dk[(tap * cin + ci) * cout..(tap * cin + ci + 1) * cout];
                for (d, &gv) in row.iter_mut().zip(g) {
                    *d += xv * gv;
                }
            }
        }
        if let Some(dx) = dx.as_mut() {
            for ci in 0..cin {
                let ks = &k[(tap * cin + ci) * cout..(tap * cin + ci + 1) * cout];
                let mut s = T::zero();
                for (&kv, &gv) in ks.iter().zip(g) {
                    s += kv * gv;
                }
                dx[i * cin + ci] += s;
            }
        }
    });
    (dx, dk)
}
