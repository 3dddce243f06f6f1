//! Data-driven low-rank estimation (OptShrink) and singular value
//! thresholding (SVT).
//!
//! OptShrink keeps the leading `r` singular subspaces of its input but
//! replaces the singular values with shrinkage weights
//! `w_i = -2 D(sigma_i) / D'(sigma_i)`, where the D-transform is estimated
//! from the trailing (noise) spectrum:
//!
//! ```text
//! phi1(z) = 1/(q-r) * sum_{k>r} z / (z^2 - sigma_k^2)
//! phi2(z) = 1/(M-r) * [ sum_{k>r} z / (z^2 - sigma_k^2) + (M-q)/z ]
//! D(z)    = phi1(z) * phi2(z),      q = min(dims), M = max(dims)
//! ```
//!
//! with `D'` obtained by analytic differentiation. When the trailing
//! spectrum vanishes the weights reduce to `w_i = sigma_i` and OptShrink
//! coincides with the rank-`r` truncated SVD.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::svd::thin_svd;

/// Singular values at or below this distance from the leading trailing
/// value are annihilated (weight 0) rather than shrunk, to keep the
/// D-transform evaluation away from its poles.
const ANNIHILATION_TOL: f64 = 1e-9;

/// Spectrum of a matrix split at rank `r`: leading triplets and the
/// trailing singular values used to estimate the noise distribution.
#[derive(Debug, Clone)]
pub struct SpectrumSplit {
    /// Leading singular values `sigma_1 >= ... >= sigma_r`.
    pub leading: Vec<f64>,
    /// Trailing singular values `sigma_{r+1} >= ... >= sigma_q`.
    pub trailing: Vec<f64>,
    /// Leading left singular vectors (`rows x r`).
    pub u: DMatrix<f64>,
    /// Leading right singular vectors (`cols x r`).
    pub v: DMatrix<f64>,
}

/// Computes the SVD of `z` and splits it at rank `r`.
pub fn split_spectrum(z: &DMatrix<f64>, r: usize) -> Result<SpectrumSplit> {
    let (rows, cols) = z.shape();
    let q = rows.min(cols);
    if r < 1 || r >= q {
        return Err(Error::RankOutOfRange { rank: r, rows, cols });
    }
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("optshrink input"));
    }
    let svd = thin_svd(z)?;
    Ok(SpectrumSplit {
        leading: svd.sigma[..r].to_vec(),
        trailing: svd.sigma[r..].to_vec(),
        u: svd.u.columns(0, r).into_owned(),
        v: svd.v.columns(0, r).into_owned(),
    })
}

/// Shrinkage weights `-2 D(sigma_i)/D'(sigma_i)` for the leading singular
/// values, built from the empirical D-transform of the trailing spectrum.
/// Weights are clamped to `[0, sigma_i]`; values colliding with the
/// trailing edge are annihilated.
pub fn shrinkage_weights(
    leading: &[f64],
    trailing: &[f64],
    rows: usize,
    cols: usize,
) -> Vec<f64> {
    let q = rows.min(cols) as f64;
    let big = rows.max(cols) as f64;
    let r = leading.len() as f64;
    let trailing_edge = trailing.first().copied().unwrap_or(0.0);

    leading
        .iter()
        .map(|&s| {
            if s <= 0.0 || (s - trailing_edge).abs() < ANNIHILATION_TOL {
                return 0.0;
            }
            let mut sum = 0.0;
            let mut dsum = 0.0;
            for &t in trailing {
                let denom = s * s - t * t;
                sum += s / denom;
                dsum += -(s * s + t * t) / (denom * denom);
            }
            let phi1 = sum / (q - r);
            let dphi1 = dsum / (q - r);
            let phi2 = (sum + (big - q) / s) / (big - r);
            let dphi2 = (dsum - (big - q) / (s * s)) / (big - r);
            let d = phi1 * phi2;
            let dprime = dphi1 * phi2 + phi1 * dphi2;
            let w = -2.0 * d / dprime;
            if w.is_finite() {
                w.clamp(0.0, s)
            } else {
                0.0
            }
        })
        .collect()
}

/// OptShrink low-rank estimate of `z` at rank `r`: the leading singular
/// subspaces recombined with data-driven shrinkage weights. The result has
/// rank at most `r`.
pub fn optshrink(z: &DMatrix<f64>, r: usize) -> Result<DMatrix<f64>> {
    let split = split_spectrum(z, r)?;
    let weights = shrinkage_weights(&split.leading, &split.trailing, z.nrows(), z.ncols());
    let mut out = DMatrix::zeros(z.nrows(), z.ncols());
    for (i, &w) in weights.iter().enumerate() {
        if w != 0.0 {
            out.ger(w, &split.u.column(i), &split.v.column(i), 1.0);
        }
    }
    Ok(out)
}

/// Singular value thresholding: soft-thresholds the singular values by
/// `lambda`. This is the proximal operator of `lambda * ||.||_*`.
pub fn svt(z: &DMatrix<f64>, lambda: f64) -> Result<DMatrix<f64>> {
    if lambda < 0.0 {
        return Err(Error::InvalidConfig(format!(
            "svt threshold must be nonnegative, got {lambda}"
        )));
    }
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("svt input"));
    }
    let svd = thin_svd(z)?;
    let weights: Vec<f64> = svd.sigma.iter().map(|&s| (s - lambda).max(0.0)).collect();
    Ok(svd.weighted_reconstruction(&weights))
}
