//! RANSAC wrapper around the DLT fit.
//!
//! Repeatedly fits minimal four-point samples, scores consensus by
//! reprojection distance, refits on the largest consensus set, and reports
//! per-correspondence inlier flags. All randomness comes from a counter
//! seeded stream cipher, so runs are reproducible bit for bit.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::registration::dlt::estimate_homography_dlt;
use crate::registration::{Correspondence, Homography};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct RansacConfig {
    /// Number of minimal samples drawn.
    pub iterations: usize,
    /// Reprojection distance (pixels) below which a point is an inlier.
    pub inlier_threshold: f64,
    /// Smallest accepted consensus, as a fraction of all correspondences.
    pub min_inlier_fraction: f64,
    pub seed: u64,
}

impl Default for RansacConfig {
    fn default() -> Self {
        Self {
            iterations: 2000,
            inlier_threshold: 1.5,
            min_inlier_fraction: 0.3,
            seed: 0,
        }
    }
}

impl RansacConfig {
    fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::InvalidConfig("RANSAC needs at least one iteration".into()));
        }
        if !(self.inlier_threshold > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "inlier threshold must be positive, got {}",
                self.inlier_threshold
            )));
        }
        if !(0.0..=1.0).contains(&self.min_inlier_fraction) {
            return Err(Error::InvalidConfig(format!(
                "min inlier fraction must lie in [0, 1], got {}",
                self.min_inlier_fraction
            )));
        }
        Ok(())
    }
}

/// A robust fit together with its per-correspondence inlier flags.
#[derive(Debug, Clone)]
pub struct RansacResult {
    pub homography: Homography,
    pub inliers: Vec<bool>,
}

impl RansacResult {
    pub fn inlier_count(&self) -> usize {
        self.inliers.iter().filter(|&&b| b).count()
    }
}

fn reprojection_inliers(h: &Homography, corrs: &[Correspondence], threshold: f64) -> Vec<bool> {
    corrs
        .iter()
        .map(|c| match h.apply(c.source) {
            Ok((px, py)) => {
                let d = ((px - c.target.0).powi(2) + (py - c.target.1).powi(2)).sqrt();
                d < threshold
            }
            Err(_) => false,
        })
        .collect()
}

/// Robust homography estimation. Draws minimal samples, keeps the largest
/// consensus set, and refits the DLT on it; the returned flags are computed
/// from the refit model.
pub fn estimate_homography_ransac(
    corrs: &[Correspondence],
    cfg: &RansacConfig,
) -> Result<RansacResult> {
    cfg.validate()?;
    let n = corrs.len();
    if n < 4 {
        return Err(Error::NotEnoughCorrespondences { needed: 4, got: n });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut best_flags: Option<Vec<bool>> = None;
    let mut best_count = 0usize;
    for _ in 0..cfg.iterations {
        let pick = sample(&mut rng, n, 4);
        let minimal: Vec<Correspondence> = pick.iter().map(|i| corrs[i]).collect();
        let Ok(h) = estimate_homography_dlt(&minimal) else {
            continue;
        };
        let flags = reprojection_inliers(&h, corrs, cfg.inlier_threshold);
        let count = flags.iter().filter(|&&b| b).count();
        if count > best_count {
            best_count = count;
            best_flags = Some(flags);
        }
    }

    let required = cfg.min_inlier_fraction * n as f64;
    if best_count < 4 || (best_count as f64) < required {
        return Err(Error::NoConsensus {
            best_fraction: best_count as f64 / n as f64,
            required: cfg.min_inlier_fraction,
        });
    }

    let flags = best_flags.expect("nonzero consensus implies a model");
    let consensus: Vec<Correspondence> = corrs
        .iter()
        .zip(&flags)
        .filter_map(|(c, &keep)| keep.then_some(*c))
        .collect();
    let homography = estimate_homography_dlt(&consensus)?;
    let inliers = reprojection_inliers(&homography, corrs, cfg.inlier_threshold);
    Ok(RansacResult { homography, inliers })
}
