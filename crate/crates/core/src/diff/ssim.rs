//! Single-window SSIM over whole maps, with its analytic gradient.

use crate::scalar::Scalar;

/// Stabilizer for the luminance term, `(0.01·R)²` with `R = 1`.
pub const SSIM_C1: f64 = 1e-4;
/// Stabilizer for the contrast/structure term, `(0.03·R)²` with `R = 1`.
pub const SSIM_C2: f64 = 9e-4;

#[derive(Clone, Copy, Debug)]
pub(crate) struct SsimStats<T> {
    pub mu_x: T,
    pub mu_y: T,
    /// Population variances and covariance.
    pub var_x: T,
    pub var_y: T,
    pub num_l: T,
    pub num_s: T,
    pub den_l: T,
    pub den_s: T,
    /// Unclamped index.
    pub raw: T,
}

pub(crate) fn stats<T: Scalar>(x: &[T], y: &[T]) -> SsimStats<T> {
    let n = T::of(x.len() as f64);
    let two = T::of(2.0);
    let c1 = T::of(SSIM_C1);
    let c2 = T::of(SSIM_C2);
    let mu_x = x.iter().copied().sum::<T>() / n;
    let mu_y = y.iter().copied().sum::<T>() / n;
    let (mut vx, mut vy, mut cxy) = (T::zero(), T::zero(), T::zero());
    for (&a, &b) in x.iter().zip(y) {
        let (da, db) = (a - mu_x, b - mu_y);
        vx += da * da;
        vy += db * db;
        cxy += da * db;
    }
    let (var_x, var_y, cov) = (vx / n, vy / n, cxy / n);
    let num_l = two * mu_x * mu_y + c1;
    let num_s = two * cov + c2;
    let den_l = mu_x * mu_x + mu_y * mu_y + c1;
    let den_s = var_x + var_y + c2;
    SsimStats {
        mu_x,
        mu_y,
        var_x,
        var_y,
        num_l,
        num_s,
        den_l,
        den_s,
        raw: (num_l * num_s) / (den_l * den_s),
    }
}

/// Gradient of the unclamped index with respect to `x` (swap the arguments
/// and the stats' roles for `y`).
pub(crate) fn grad_wrt_first<T: Scalar>(x: &[T], y: &[T], s: &SsimStats<T>, upstream: T) -> Vec<T> {
    let n = T::of(x.len() as f64);
    let two = T::of(2.0);
    let den = s.den_l * s.den_s;
    let d_mu = (two * s.mu_y * s.num_s) / den - s.raw * two * s.mu_x / s.den_l;
    let d_var = -s.raw / s.den_s;
    let d_cov = two * s.num_l / den;
    x.iter()
        .zip(y)
        .map(|(&a, &b)| upstream * (d_mu + d_var * two * (a - s.mu_x) + d_cov * (b - s.mu_y)) / n)
        .collect()
}

pub(crate) fn swapped<T: Copy>(s: &SsimStats<T>) -> SsimStats<T> {
    SsimStats {
        mu_x: s.mu_y,
        mu_y: s.mu_x,
        var_x: s.var_y,
        var_y: s.var_x,
        ..*s
    }
}
