//! Frame registration onto a panoramic canvas.
//!
//! Consecutive frames are matched (Harris corners + patch correlation, or
//! imported correspondences), pairwise homographies are fit robustly,
//! chained to an anchor frame, and every frame is warped into anchor
//! coordinates. The result is a `FrameStack`: the registered intensities
//! plus the observation mask marking which canvas pixels each frame saw.

mod dlt;
mod features;
mod homography;
mod io;
mod ransac;
mod warp;

pub use dlt::estimate_homography_dlt;
pub use features::{find_correspondences, FeatureConfig};
pub use homography::Homography;
pub use io::{
    format_correspondences, format_homography, parse_correspondences, parse_homography,
};
pub use ransac::{estimate_homography_ransac, RansacConfig, RansacResult};
pub use warp::{warp_frames, CanvasGeometry};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;
use crate::stack::FrameStack;

/// A matched point pair: `source` in the earlier frame, `target` in the
/// later one, both `(x, y)` with `x` the column coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correspondence {
    pub source: (f64, f64),
    pub target: (f64, f64),
}

/// Composes the consecutive-frame links `H_1..H_{p-1}` (each mapping frame
/// `k` into frame `k+1` coordinates) into per-frame maps onto the anchor:
/// the forward chain below the anchor, the identity at it, and inverted
/// links above it. Frame indices are zero-based.
pub fn chain_to_anchor(links: &[Homography], anchor: usize) -> Result<Vec<Homography>> {
    let p = links.len() + 1;
    if anchor >= p {
        return Err(Error::InvalidConfig(format!(
            "anchor {anchor} out of range for {p} frames"
        )));
    }
    let mut maps = vec![Homography::identity(); p];
    for k in (0..anchor).rev() {
        // frame k -> anchor: apply the k -> k+1 link, then continue upward
        maps[k] = links[k].then(&maps[k + 1])?;
    }
    for k in anchor + 1..p {
        maps[k] = links[k - 1].inverse()?.then(&maps[k - 1])?;
    }
    Ok(maps)
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct RegistrationConfig {
    /// Anchor frame index; the middle frame when unset.
    pub anchor: Option<usize>,
    pub features: FeatureConfig,
    pub ransac: RansacConfig,
}

/// A registered video: the stacked warped frames plus the estimated maps
/// and canvas extent.
#[derive(Debug, Clone)]
pub struct VideoRegistration {
    pub stack: FrameStack,
    pub canvas: CanvasGeometry,
    pub anchor: usize,
    /// Consecutive-frame links `H_k`: frame `k` into frame `k+1` coordinates.
    pub links: Vec<Homography>,
    /// Per-frame maps into anchor coordinates.
    pub to_anchor: Vec<Homography>,
}

/// Registers a video end to end: matches consecutive frames, fits links
/// robustly, chains them to the anchor, and warps everything onto the
/// common canvas.
pub fn register_video(frames: &[Image], cfg: &RegistrationConfig) -> Result<VideoRegistration> {
    if frames.is_empty() {
        return Err(Error::EmptyInput("register_video needs at least one frame"));
    }
    let p = frames.len();
    let anchor = cfg.anchor.unwrap_or(p / 2);
    if anchor >= p {
        return Err(Error::InvalidConfig(format!(
            "anchor {anchor} out of range for {p} frames"
        )));
    }
    let mut links = Vec::with_capacity(p.saturating_sub(1));
    for k in 0..p - 1 {
        let corrs = find_correspondences(&frames[k], &frames[k + 1], &cfg.features)?;
        let ransac_cfg = RansacConfig {
            // decorrelate the sampling across links, still deterministic
            seed: cfg.ransac.seed.wrapping_add(k as u64),
            ..cfg.ransac
        };
        let fit = estimate_homography_ransac(&corrs, &ransac_cfg)?;
        links.push(fit.homography);
    }
    let to_anchor = chain_to_anchor(&links, anchor)?;
    let (stack, canvas) = warp_frames(frames, &to_anchor)?;
    Ok(VideoRegistration {
        stack,
        canvas,
        anchor,
        links,
        to_anchor,
    })
}
