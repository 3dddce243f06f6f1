//! Canvas geometry and inverse warping of frames onto the panorama.
//!
//! The canvas is the axis-aligned bounding box of the projected corner
//! points of all frames in anchor coordinates, shifted by an integer offset
//! so pixel indices start at zero. Each frame is resampled by mapping every
//! canvas pixel back through the inverse homography and interpolating
//! bilinearly; the observation mask marks canvas pixels whose back-mapped
//! location falls inside the source frame.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;
use crate::registration::Homography;
use crate::stack::FrameStack;

/// Hard cap on either canvas dimension, to catch runaway registrations
/// before they allocate absurd buffers.
const MAX_CANVAS_DIM: i64 = 1 << 15;

/// Corner coordinates this close to an integer are snapped to it before
/// the floor/ceil bounding step. Estimated homographies reproduce integer
/// translations only to solver precision, and without snapping that error
/// inflates the canvas by a border pixel.
const EDGE_SNAP: f64 = 1e-6;

fn snap(v: f64) -> f64 {
    if (v - v.round()).abs() < EDGE_SNAP {
        v.round()
    } else {
        v
    }
}

/// Integer canvas extent in anchor-plane coordinates: canvas pixel
/// `(row r, col c)` sits at anchor point `(x_min + c, y_min + r)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CanvasGeometry {
    pub height: usize,
    pub width: usize,
    pub x_min: i64,
    pub y_min: i64,
}

impl CanvasGeometry {
    /// Bounding box of the projected corners of `frames.len()` frames with
    /// the given per-frame maps into anchor coordinates.
    pub fn bounding(sizes: &[(usize, usize)], maps: &[Homography]) -> Result<Self> {
        if sizes.is_empty() || sizes.len() != maps.len() {
            return Err(Error::DimensionMismatch {
                context: "CanvasGeometry::bounding",
                expected: format!("{} maps", sizes.len()),
                got: format!("{}", maps.len()),
            });
        }
        let mut x_lo = f64::INFINITY;
        let mut x_hi = f64::NEG_INFINITY;
        let mut y_lo = f64::INFINITY;
        let mut y_hi = f64::NEG_INFINITY;
        for (&(h, w), map) in sizes.iter().zip(maps) {
            if h < 2 || w < 2 {
                return Err(Error::EmptyInput("frames must be at least 2x2 to warp"));
            }
            let (hf, wf) = ((h - 1) as f64, (w - 1) as f64);
            for corner in [(0.0, 0.0), (wf, 0.0), (0.0, hf), (wf, hf)] {
                let (x, y) = map.apply(corner)?;
                if !x.is_finite() || !y.is_finite() {
                    return Err(Error::NonFinite("projected frame corner"));
                }
                x_lo = x_lo.min(x);
                x_hi = x_hi.max(x);
                y_lo = y_lo.min(y);
                y_hi = y_hi.max(y);
            }
        }
        let x_min = snap(x_lo).floor() as i64;
        let x_max = snap(x_hi).ceil() as i64;
        let y_min = snap(y_lo).floor() as i64;
        let y_max = snap(y_hi).ceil() as i64;
        let width = x_max - x_min + 1;
        let height = y_max - y_min + 1;
        if width > MAX_CANVAS_DIM || height > MAX_CANVAS_DIM {
            return Err(Error::InvalidConfig(format!(
                "canvas {height}x{width} exceeds the {MAX_CANVAS_DIM} per-axis limit"
            )));
        }
        Ok(Self {
            height: height as usize,
            width: width as usize,
            x_min,
            y_min,
        })
    }
}

/// Bilinear sample of `img` at `(x, y)` together with the observation bit.
/// The bit is 1 exactly when the 2x2 neighbor block lies inside the image,
/// i.e. when `0 <= x <= w-1` and `0 <= y <= h-1`; points on the far edge
/// reuse the last interior block with weight on its far side.
fn sample_bilinear(img: &DMatrix<f64>, x: f64, y: f64) -> Option<f64> {
    let (h, w) = img.shape();
    let (hf, wf) = ((h - 1) as f64, (w - 1) as f64);
    if !(0.0..=wf).contains(&x) || !(0.0..=hf).contains(&y) {
        return None;
    }
    let j0 = (x.floor() as usize).min(w - 2);
    let i0 = (y.floor() as usize).min(h - 2);
    let fx = x - j0 as f64;
    let fy = y - i0 as f64;
    let v = (1.0 - fx) * (1.0 - fy) * img[(i0, j0)]
        + fx * (1.0 - fy) * img[(i0, j0 + 1)]
        + (1.0 - fx) * fy * img[(i0 + 1, j0)]
        + fx * fy * img[(i0 + 1, j0 + 1)];
    Some(v.clamp(0.0, 1.0))
}

/// Warps each frame onto the common canvas through its map into anchor
/// coordinates, producing the stacked data and observation mask.
pub fn warp_frames(frames: &[Image], maps: &[Homography]) -> Result<(FrameStack, CanvasGeometry)> {
    let sizes: Vec<(usize, usize)> = frames.iter().map(|f| (f.height(), f.width())).collect();
    let canvas = CanvasGeometry::bounding(&sizes, maps)?;
    let (ch, cw) = (canvas.height, canvas.width);
    let p = frames.len();
    let mut data = DMatrix::zeros(ch * cw, p);
    let mut mask = DMatrix::zeros(ch * cw, p);
    for (k, (frame, map)) in frames.iter().zip(maps).enumerate() {
        let inv = map.inverse()?;
        let img = frame.as_matrix();
        for c in 0..cw {
            let x = (canvas.x_min + c as i64) as f64;
            for r in 0..ch {
                let y = (canvas.y_min + r as i64) as f64;
                // back-map the canvas pixel into the source frame; snapping
                // keeps boundary samples observed under estimated maps
                let Ok((sx, sy)) = inv.apply((x, y)) else {
                    continue;
                };
                if let Some(v) = sample_bilinear(img, snap(sx), snap(sy)) {
                    let row = r + ch * c;
                    data[(row, k)] = v;
                    mask[(row, k)] = 1.0;
                }
            }
        }
    }
    let stack = FrameStack::new(ch, cw, data, mask)?;
    Ok((stack, canvas))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gradient_image(h: usize, w: usize) -> Image {
        Image::from_fn(h, w, |i, j| {
            (i as f64 / (2 * h) as f64) + (j as f64 / (2 * w) as f64)
        })
    }

    #[test]
    fn identity_warp_reproduces_frame() {
        let img = gradient_image(5, 7);
        let (stack, canvas) = warp_frames(&[img.clone()], &[Homography::identity()]).unwrap();
        assert_eq!((canvas.height, canvas.width), (5, 7));
        assert_eq!((canvas.x_min, canvas.y_min), (0, 0));
        assert!(stack.mask().iter().all(|&b| b == 1.0));
        let diff = (stack.frame_matrix(0) - img.as_matrix()).abs().max();
        assert!(diff < 1e-12);
    }

    #[test]
    fn integer_translation_extends_canvas() {
        let img = gradient_image(6, 8);
        let maps = [Homography::identity(), Homography::translation(5.0, 0.0)];
        let (stack, canvas) = warp_frames(&[img.clone(), img.clone()], &maps).unwrap();
        assert_eq!(canvas.width, 8 + 5);
        assert_eq!(canvas.height, 6);
        assert_eq!(canvas.x_min, 0);
        // frame 0 occupies columns 0..8, frame 1 columns 5..13
        let m0 = stack.mask_matrix(0);
        let m1 = stack.mask_matrix(1);
        for c in 0..13 {
            assert_eq!(m0[(0, c)], f64::from(c < 8), "frame 0 col {c}");
            assert_eq!(m1[(0, c)], f64::from(c >= 5), "frame 1 col {c}");
        }
        // integer shift resamples exactly
        let f1 = stack.frame_matrix(1);
        for i in 0..6 {
            for j in 0..8 {
                assert!((f1[(i, j + 5)] - img.as_matrix()[(i, j)]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn fractional_translation_interpolates_linearly() {
        // a linear ramp is reproduced exactly by bilinear interpolation
        let img = Image::from_fn(4, 6, |_, j| j as f64 / 10.0);
        let maps = [Homography::translation(0.5, 0.0)];
        let (stack, canvas) = warp_frames(&[img], &maps).unwrap();
        // corners project to x in [0.5, 5.5] -> canvas x in [0, 6]
        assert_eq!(canvas.width, 7);
        let f = stack.frame_matrix(0);
        let m = stack.mask_matrix(0);
        // canvas x=1 maps back to source x=0.5: ramp value 0.05
        assert_eq!(m[(1, 1)], 1.0);
        assert!((f[(1, 1)] - 0.05).abs() < 1e-12);
        // canvas x=0 maps back to source x=-0.5: outside
        assert_eq!(m[(1, 0)], 0.0);
        assert_eq!(f[(1, 0)], 0.0);
    }

    #[test]
    fn mask_counts_match_brute_force() {
        let img = gradient_image(6, 6);
        let map = Homography::new(nalgebra::Matrix3::from_row_slice(&[
            1.02, 0.05, 0.0, -0.03, 0.97, 0.0, 1.3, -0.8, 1.0,
        ]))
        .unwrap();
        let (stack, canvas) = warp_frames(&[img], &[map.clone()]).unwrap();
        let inv = map.inverse().unwrap();
        let mut expected = 0usize;
        for c in 0..canvas.width {
            for r in 0..canvas.height {
                let x = (canvas.x_min + c as i64) as f64;
                let y = (canvas.y_min + r as i64) as f64;
                if let Ok((sx, sy)) = inv.apply((x, y)) {
                    if (0.0..=5.0).contains(&sx) && (0.0..=5.0).contains(&sy) {
                        expected += 1;
                    }
                }
            }
        }
        let ones = stack.mask().iter().filter(|&&b| b == 1.0).count();
        assert_eq!(ones, expected);
    }

    #[test]
    fn tiny_frames_are_rejected() {
        let img = Image::zeros(1, 5);
        assert!(warp_frames(&[img], &[Homography::identity()]).is_err());
    }
}
