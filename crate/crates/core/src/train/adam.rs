use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mstie::MstieParams;
use crate::scalar::Scalar;
use crate::tensor::Array;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            eps: 0.1,
        }
    }
}

/// First and second moment estimates, keyed like the parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Moments<T> {
    pub m: BTreeMap<String, Array<T>>,
    pub v: BTreeMap<String, Array<T>>,
}

impl<T: Scalar> Moments<T> {
    pub fn zeros_like(p: &MstieParams<T>) -> Self {
        let zeros: BTreeMap<_, _> = p.arrays.iter().map(|(k, a)| (k.clone(), Array::zeros(a.shape()))).collect();
        Moments { m: zeros.clone(), v: zeros }
    }
}

/// One bias-corrected Adam update at step `t` (1-based).
pub fn adam_step<T: Scalar>(
    params: &mut MstieParams<T>,
    grads: &BTreeMap<String, Array<T>>,
    moments: &mut Moments<T>,
    t: u64,
    cfg: &AdamConfig,
) -> Result<()> {
    if t == 0 {
        return Err(Error::Config("adam step index starts at 1".into()));
    }
    let b1 = T::of(cfg.beta1);
    let b2 = T::of(cfg.beta2);
    let one = T::one();
    let c1 = T::of(1.0 - cfg.beta1.powf(t as f64));
    let c2 = T::of(1.0 - cfg.beta2.powf(t as f64));
    let (lr, eps) = (T::of(cfg.lr), T::of(cfg.eps));
    for (name, theta) in params.arrays.iter_mut() {
        let g = grads.get(name).ok_or_else(|| Error::Shape(format!("no gradient for {name}")))?;
        let (m, v) = match (moments.m.get_mut(name), moments.v.get_mut(name)) {
            (Some(m), Some(v)) => (m, v),
            _ => return Err(Error::Shape(format!("no moments for {name}"))),
        };
        if g.shape() != theta.shape() || m.shape() != theta.shape() || v.shape() != theta.shape() {
            return Err(Error::Shape(format!(
                "{name}: param {:?}, grad {:?}, moments {:?}/{:?}",
                theta.shape(),
                g.shape(),
                m.shape(),
                v.shape()
            )));
        }
        let iter = theta
            .data_mut()
            .iter_mut()
            .zip(g.data())
            .zip(m.data_mut().iter_mut().zip(v.data_mut().iter_mut()));
        for ((th, &gi), (mi, vi)) in iter {
            *mi = b1 * *mi + (one - b1) * gi;
            *vi = b2 * *vi + (one - b2) * gi * gi;
            let m_hat = *mi / c1;
            let v_hat = *vi / c2;
            *th -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}
