//! Corner detection and patch matching between consecutive frames.
//!
//! Harris corners are detected in the first frame and matched into the
//! second by normalized cross-correlation of a square patch over a bounded
//! search window. Consecutive video frames overlap heavily, so a local
//! search with plain intensity patches is enough to feed RANSAC; an
//! external detector can be substituted through the correspondence file
//! format instead.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;
use crate::registration::Correspondence;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureConfig {
    /// Cap on detected corners (kept in decreasing response order).
    pub max_features: usize,
    /// Matching patch half-width; the patch is `2r+1` square.
    pub patch_radius: usize,
    /// Search window half-width around the source position.
    pub search_radius: usize,
    /// Matches with peak normalized correlation below this are dropped.
    pub min_correlation: f64,
    /// Harris response constant.
    pub harris_k: f64,
    /// Structure tensor window half-width.
    pub smoothing_radius: usize,
    /// Minimum Chebyshev distance between kept corners.
    pub min_distance: usize,
    /// Corner responses below this fraction of the maximum are ignored.
    pub response_floor: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            max_features: 200,
            patch_radius: 7,
            search_radius: 20,
            min_correlation: 0.7,
            harris_k: 0.04,
            smoothing_radius: 2,
            min_distance: 8,
            response_floor: 0.01,
        }
    }
}

impl FeatureConfig {
    fn validate(&self) -> Result<()> {
        if self.max_features < 4 {
            return Err(Error::InvalidConfig("max_features must be at least 4".into()));
        }
        if self.patch_radius == 0 || self.search_radius == 0 {
            return Err(Error::InvalidConfig("patch and search radii must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.min_correlation) {
            return Err(Error::InvalidConfig(format!(
                "min_correlation must lie in [0, 1], got {}",
                self.min_correlation
            )));
        }
        if !(0.0..1.0).contains(&self.response_floor) {
            return Err(Error::InvalidConfig(format!(
                "response_floor must lie in [0, 1), got {}",
                self.response_floor
            )));
        }
        Ok(())
    }

    fn margin(&self) -> usize {
        self.patch_radius.max(self.smoothing_radius + 1) + 1
    }
}

/// Harris corner response over the full image; entries within `margin` of
/// the border are left at zero.
fn harris_response(img: &DMatrix<f64>, k: f64, radius: usize, margin: usize) -> DMatrix<f64> {
    let (h, w) = img.shape();
    let mut gx = DMatrix::zeros(h, w);
    let mut gy = DMatrix::zeros(h, w);
    for i in 1..h - 1 {
        for j in 1..w - 1 {
            gx[(i, j)] = (img[(i, j + 1)] - img[(i, j - 1)]) / 2.0;
            gy[(i, j)] = (img[(i + 1, j)] - img[(i - 1, j)]) / 2.0;
        }
    }
    let mut resp = DMatrix::zeros(h, w);
    if h <= 2 * margin || w <= 2 * margin {
        return resp;
    }
    for i in margin..h - margin {
        for j in margin..w - margin {
            let mut sxx = 0.0;
            let mut sxy = 0.0;
            let mut syy = 0.0;
            for di in 0..=2 * radius {
                for dj in 0..=2 * radius {
                    let (r, c) = (i + di - radius, j + dj - radius);
                    sxx += gx[(r, c)] * gx[(r, c)];
                    sxy += gx[(r, c)] * gy[(r, c)];
                    syy += gy[(r, c)] * gy[(r, c)];
                }
            }
            resp[(i, j)] = sxx * syy - sxy * sxy - k * (sxx + syy).powi(2);
        }
    }
    resp
}

/// Corner pixels `(row, col)` in decreasing response order, thinned so no
/// two survivors are closer than `min_distance` in Chebyshev distance.
fn detect_corners(resp: &DMatrix<f64>, cfg: &FeatureConfig) -> Vec<(usize, usize)> {
    let (h, w) = resp.shape();
    let max_resp = resp.iter().cloned().fold(0.0_f64, f64::max);
    // an exactly flat image produces an all-zero response; no corners then
    let floor = (cfg.response_floor * max_resp).max(1e-12);
    let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
    for i in 1..h.saturating_sub(1) {
        for j in 1..w.saturating_sub(1) {
            let r = resp[(i, j)];
            if r < floor {
                continue;
            }
            let mut local_max = true;
            for di in -1i64..=1 {
                for dj in -1i64..=1 {
                    if (di, dj) != (0, 0)
                        && resp[((i as i64 + di) as usize, (j as i64 + dj) as usize)] > r
                    {
                        local_max = false;
                    }
                }
            }
            if local_max {
                candidates.push((r, i, j));
            }
        }
    }
    candidates.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(std::cmp::Ordering::Equal));
    let mut kept: Vec<(usize, usize)> = Vec::new();
    for &(_, i, j) in &candidates {
        if kept.len() >= cfg.max_features {
            break;
        }
        let far = kept.iter().all(|&(ki, kj)| {
            ki.abs_diff(i).max(kj.abs_diff(j)) >= cfg.min_distance
        });
        if far {
            kept.push((i, j));
        }
    }
    kept
}

struct Patch {
    values: Vec<f64>,
    mean: f64,
    norm: f64,
}

fn extract_patch(img: &DMatrix<f64>, center: (usize, usize), radius: usize) -> Patch {
    let side = 2 * radius + 1;
    let mut values = Vec::with_capacity(side * side);
    for di in 0..side {
        for dj in 0..side {
            values.push(img[(center.0 + di - radius, center.1 + dj - radius)]);
        }
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let norm = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>().sqrt();
    Patch { values, mean, norm }
}

fn ncc(a: &Patch, b: &Patch) -> f64 {
    let mut dot = 0.0;
    for (x, y) in a.values.iter().zip(&b.values) {
        dot += (x - a.mean) * (y - b.mean);
    }
    dot / (a.norm * b.norm)
}

/// Detects Harris corners in `frame_a` and matches each into `frame_b` by
/// normalized cross-correlation over a bounded search window. Points are
/// reported as `(x, y)` with `x` the column coordinate.
pub fn find_correspondences(
    frame_a: &Image,
    frame_b: &Image,
    cfg: &FeatureConfig,
) -> Result<Vec<Correspondence>> {
    cfg.validate()?;
    if frame_a.height() != frame_b.height() || frame_a.width() != frame_b.width() {
        return Err(Error::DimensionMismatch {
            context: "find_correspondences",
            expected: format!("{}x{}", frame_a.height(), frame_a.width()),
            got: format!("{}x{}", frame_b.height(), frame_b.width()),
        });
    }
    let a = frame_a.as_matrix();
    let b = frame_b.as_matrix();
    let (h, w) = a.shape();
    let margin = cfg.margin();
    let resp = harris_response(a, cfg.harris_k, cfg.smoothing_radius, margin);
    let corners = detect_corners(&resp, cfg);

    let pr = cfg.patch_radius;
    let mut matches = Vec::new();
    for (ci, cj) in corners {
        let source_patch = extract_patch(a, (ci, cj), pr);
        if source_patch.norm < 1e-12 {
            continue;
        }
        let lo_i = ci.saturating_sub(cfg.search_radius).max(pr);
        let hi_i = (ci + cfg.search_radius).min(h - 1 - pr);
        let lo_j = cj.saturating_sub(cfg.search_radius).max(pr);
        let hi_j = (cj + cfg.search_radius).min(w - 1 - pr);
        let mut best_score = f64::NEG_INFINITY;
        let mut best_pos = (ci, cj);
        for ti in lo_i..=hi_i {
            for tj in lo_j..=hi_j {
                let target_patch = extract_patch(b, (ti, tj), pr);
                if target_patch.norm < 1e-12 {
                    continue;
                }
                let score = ncc(&source_patch, &target_patch);
                if score > best_score {
                    best_score = score;
                    best_pos = (ti, tj);
                }
            }
        }
        if best_score >= cfg.min_correlation {
            matches.push(Correspondence {
                source: (cj as f64, ci as f64),
                target: (best_pos.1 as f64, best_pos.0 as f64),
            });
        }
    }
    if matches.len() < 4 {
        return Err(Error::InsufficientFeatures {
            found: matches.len(),
            needed: 4,
        });
    }
    Ok(matches)
}
