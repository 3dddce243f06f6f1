//! Synthetic scenes with known ground truth.
//!
//! A scene is a smooth seeded background panorama, a bright object moving
//! along a linear trajectory in panorama coordinates, and a camera that is
//! either static or pans by an integer translation per frame. Everything
//! the evaluation needs is known by construction: the clean frames, the
//! per-frame object masks, the background, and the exact inter-frame
//! homographies.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;
use crate::registration::{chain_to_anchor, warp_frames, CanvasGeometry, Homography};
use crate::stack::FrameStack;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CameraMotion {
    Static,
    /// Integer pan per frame; the window slides across a panorama that is
    /// wide (and tall) enough for the full run.
    Pan { dx: i64, dy: i64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectShape {
    /// Axis-aligned square, `side` pixels across; zero side means no object.
    Square { side: usize },
    Disc { radius: usize },
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneConfig {
    /// Camera window size.
    pub height: usize,
    pub width: usize,
    pub frames: usize,
    pub motion: CameraMotion,
    pub shape: ObjectShape,
    /// Object center at frame 0, panorama coordinates `(x, y)`.
    pub start: (f64, f64),
    /// Object displacement per frame.
    pub velocity: (f64, f64),
    pub object_intensity: f64,
    /// Texture seed for the background.
    pub seed: u64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            height: 64,
            width: 64,
            frames: 40,
            motion: CameraMotion::Static,
            shape: ObjectShape::Square { side: 8 },
            start: (16.0, 20.0),
            velocity: (0.8, 0.5),
            object_intensity: 0.95,
            seed: 0,
        }
    }
}

/// A generated scene: clean frames, their foreground masks (window
/// coordinates), the ground-truth background panorama, the camera offsets,
/// and the consecutive-frame homography links.
#[derive(Debug, Clone)]
pub struct SyntheticScene {
    pub frames: Vec<Image>,
    pub masks: Vec<Image>,
    pub background: Image,
    /// Window origin per frame in panorama coordinates `(ox, oy)`.
    pub offsets: Vec<(i64, i64)>,
    /// `links[k]` maps frame `k` into frame `k+1` coordinates.
    pub links: Vec<Homography>,
}

/// A scene registered onto its canvas with ground-truth homographies.
#[derive(Debug, Clone)]
pub struct RegisteredScene {
    /// Clean registered stack (data plus observation mask).
    pub stack: FrameStack,
    pub canvas: CanvasGeometry,
    pub anchor: usize,
    pub to_anchor: Vec<Homography>,
    /// Per-frame object support on the canvas, `m*n x p` binary.
    pub object_mask: DMatrix<f64>,
    /// Ground-truth background over the canvas extent.
    pub background: Image,
}

/// Smooth seeded texture: a few low-frequency waves, well inside [0, 1].
fn background_panorama(h: usize, w: usize, seed: u64) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut waves = Vec::new();
    for _ in 0..3 {
        let fx: f64 = rng.random_range(0.5..2.5);
        let fy: f64 = rng.random_range(0.5..2.5);
        let phase: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let amp: f64 = rng.random_range(0.06..0.13);
        waves.push((fx, fy, phase, amp));
    }
    let (hf, wf) = (h as f64, w as f64);
    Image::from_fn(h, w, |i, j| {
        let (x, y) = (j as f64 / wf, i as f64 / hf);
        let mut v = 0.42;
        for &(fx, fy, phase, amp) in &waves {
            v += amp * (std::f64::consts::TAU * (fx * x + fy * y) + phase).sin();
        }
        v.clamp(0.02, 0.85)
    })
}

/// Integer pixel footprint of the object at center `(cx, cy)`; pixels in
/// panorama coordinates. Empty for a zero-size object.
fn object_pixels(shape: ObjectShape, cx: f64, cy: f64) -> Vec<(i64, i64)> {
    let mut out = Vec::new();
    match shape {
        ObjectShape::Square { side } => {
            if side == 0 {
                return out;
            }
            let left = (cx - side as f64 / 2.0).ceil() as i64;
            let top = (cy - side as f64 / 2.0).ceil() as i64;
            for y in top..top + side as i64 {
                for x in left..left + side as i64 {
                    out.push((x, y));
                }
            }
        }
        ObjectShape::Disc { radius } => {
            let r = radius as i64;
            let r2 = (radius * radius) as f64;
            let (icx, icy) = (cx.round() as i64, cy.round() as i64);
            for y in icy - r..=icy + r {
                for x in icx - r..=icx + r {
                    let (dx, dy) = (x as f64 - cx, y as f64 - cy);
                    if dx * dx + dy * dy <= r2 {
                        out.push((x, y));
                    }
                }
            }
        }
    }
    out
}

/// Builds the scene. The object trajectory is linear:
/// `center_k = start + k * velocity`, and every frame's footprint must lie
/// inside the panorama.
pub fn make_synthetic_scene(cfg: &SceneConfig) -> Result<SyntheticScene> {
    if cfg.height < 2 || cfg.width < 2 || cfg.frames == 0 {
        return Err(Error::InvalidConfig(format!(
            "scene needs a window of at least 2x2 and one frame, got {}x{}x{}",
            cfg.height, cfg.width, cfg.frames
        )));
    }
    if !(0.0..=1.0).contains(&cfg.object_intensity) {
        return Err(Error::InvalidConfig(format!(
            "object intensity must lie in [0, 1], got {}",
            cfg.object_intensity
        )));
    }
    let p = cfg.frames;
    let (dx, dy) = match cfg.motion {
        CameraMotion::Static => (0, 0),
        CameraMotion::Pan { dx, dy } => (dx, dy),
    };
    let span = (p - 1) as i64;
    let pan_w = cfg.width + (dx.abs() * span) as usize;
    let pan_h = cfg.height + (dy.abs() * span) as usize;
    // offsets stay nonnegative whichever way the camera pans
    let offsets: Vec<(i64, i64)> = (0..p as i64)
        .map(|k| {
            let ox = if dx >= 0 { dx * k } else { -dx * (span - k) };
            let oy = if dy >= 0 { dy * k } else { -dy * (span - k) };
            (ox, oy)
        })
        .collect();

    let background = background_panorama(pan_h, pan_w, cfg.seed);

    let mut frames = Vec::with_capacity(p);
    let mut masks = Vec::with_capacity(p);
    for k in 0..p {
        let cx = cfg.start.0 + k as f64 * cfg.velocity.0;
        let cy = cfg.start.1 + k as f64 * cfg.velocity.1;
        let pixels = object_pixels(cfg.shape, cx, cy);
        for &(x, y) in &pixels {
            if x < 0 || y < 0 || x >= pan_w as i64 || y >= pan_h as i64 {
                return Err(Error::TrajectoryOutOfBounds { frame: k });
            }
        }
        let (ox, oy) = offsets[k];
        let mut frame = DMatrix::zeros(cfg.height, cfg.width);
        let mut mask = DMatrix::zeros(cfg.height, cfg.width);
        for i in 0..cfg.height {
            for j in 0..cfg.width {
                frame[(i, j)] =
                    background.as_matrix()[((i as i64 + oy) as usize, (j as i64 + ox) as usize)];
            }
        }
        for &(x, y) in &pixels {
            let (wx, wy) = (x - ox, y - oy);
            if wx >= 0 && wy >= 0 && (wx as usize) < cfg.width && (wy as usize) < cfg.height {
                frame[(wy as usize, wx as usize)] = cfg.object_intensity;
                mask[(wy as usize, wx as usize)] = 1.0;
            }
        }
        frames.push(Image::new(frame)?);
        masks.push(Image::new(mask)?);
    }

    let links = (0..p.saturating_sub(1))
        .map(|k| {
            let (ox0, oy0) = offsets[k];
            let (ox1, oy1) = offsets[k + 1];
            Homography::translation((ox0 - ox1) as f64, (oy0 - oy1) as f64)
        })
        .collect();

    Ok(SyntheticScene {
        frames,
        masks,
        background,
        offsets,
        links,
    })
}

impl SyntheticScene {
    pub fn frame_count(&self) -> usize {
        self.frames.len()
    }

    /// Ground-truth per-frame maps into the anchor frame's coordinates.
    pub fn to_anchor(&self, anchor: usize) -> Result<Vec<Homography>> {
        chain_to_anchor(&self.links, anchor)
    }

    /// Warps the clean frames onto the canvas with the ground-truth maps
    /// and assembles the canvas-coordinate ground truth alongside.
    pub fn registered(&self, anchor: usize) -> Result<RegisteredScene> {
        let to_anchor = self.to_anchor(anchor)?;
        let (stack, canvas) = warp_frames(&self.frames, &to_anchor)?;
        let (mask_stack, mask_canvas) = warp_frames(&self.masks, &to_anchor)?;
        debug_assert_eq!(canvas, mask_canvas);
        // translations are integer, so warped masks stay exactly binary
        let object_mask = mask_stack.data().map(|v| f64::from(v > 0.5));

        let (oax, oay) = self.offsets[anchor];
        let bg = self.background.as_matrix();
        let background = Image::from_fn(canvas.height, canvas.width, |r, c| {
            let x = canvas.x_min + c as i64 + oax;
            let y = canvas.y_min + r as i64 + oay;
            bg[(y as usize, x as usize)]
        });
        Ok(RegisteredScene {
            stack,
            canvas,
            anchor,
            to_anchor,
            object_mask,
            background,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_size_object_gives_rank_one_scene() {
        let cfg = SceneConfig {
            shape: ObjectShape::Square { side: 0 },
            frames: 6,
            ..SceneConfig::default()
        };
        let scene = make_synthetic_scene(&cfg).unwrap();
        for mask in &scene.masks {
            assert!(mask.as_matrix().iter().all(|&v| v == 0.0));
        }
        let reg = scene.registered(3).unwrap();
        let svals = reg.stack.data().clone().svd(false, false).singular_values;
        assert!(svals[0] > 1e-6);
        for i in 1..svals.len() {
            assert!(svals[i] < 1e-10, "sigma_{i} = {}", svals[i]);
        }
    }

    #[test]
    fn static_mask_centroid_tracks_trajectory() {
        let cfg = SceneConfig {
            start: (20.0, 30.0),
            velocity: (1.0, -0.5),
            frames: 10,
            ..SceneConfig::default()
        };
        let scene = make_synthetic_scene(&cfg).unwrap();
        for (k, mask) in scene.masks.iter().enumerate() {
            let m = mask.as_matrix();
            let mut sx = 0.0;
            let mut sy = 0.0;
            let mut count = 0.0;
            for i in 0..m.nrows() {
                for j in 0..m.ncols() {
                    if m[(i, j)] == 1.0 {
                        sx += j as f64;
                        sy += i as f64;
                        count += 1.0;
                    }
                }
            }
            assert_eq!(count, 64.0, "square has 8x8 pixels");
            let cx = cfg.start.0 + k as f64 * cfg.velocity.0;
            let cy = cfg.start.1 + k as f64 * cfg.velocity.1;
            assert!((sx / count - cx).abs() <= 1.0, "frame {k} x centroid");
            assert!((sy / count - cy).abs() <= 1.0, "frame {k} y centroid");
        }
    }

    #[test]
    fn panning_camera_spans_expected_panorama() {
        // 2 px/frame over 20 frames with a 64-wide window: union is 64 + 38
        let cfg = SceneConfig {
            motion: CameraMotion::Pan { dx: 2, dy: 0 },
            frames: 20,
            start: (40.0, 30.0),
            velocity: (1.5, 0.0),
            ..SceneConfig::default()
        };
        let scene = make_synthetic_scene(&cfg).unwrap();
        assert_eq!(scene.background.width(), 64 + 38);
        let reg = scene.registered(10).unwrap();
        assert_eq!(reg.canvas.width, 64 + 38);
        assert_eq!(reg.canvas.height, 64);
        assert_eq!(reg.background.width(), reg.canvas.width);
        // every canvas pixel inside some window is observed
        let observed = reg.stack.mask().column_sum();
        assert!(observed.iter().all(|&v| v >= 1.0));
    }

    #[test]
    fn registered_frames_match_background_off_object() {
        let cfg = SceneConfig {
            motion: CameraMotion::Pan { dx: -2, dy: 1 },
            frames: 8,
            start: (30.0, 30.0),
            velocity: (0.0, 0.0),
            ..SceneConfig::default()
        };
        let scene = make_synthetic_scene(&cfg).unwrap();
        let reg = scene.registered(4).unwrap();
        let y = reg.stack.data();
        let m = reg.stack.mask();
        let bgv: Vec<f64> = reg.background.as_matrix().as_slice().to_vec();
        for k in 0..scene.frame_count() {
            for idx in 0..y.nrows() {
                if m[(idx, k)] == 1.0 && reg.object_mask[(idx, k)] == 0.0 {
                    assert!(
                        (y[(idx, k)] - bgv[idx]).abs() < 1e-12,
                        "frame {k} pixel {idx}"
                    );
                }
            }
        }
    }

    #[test]
    fn trajectory_escaping_panorama_errors() {
        let cfg = SceneConfig {
            start: (60.0, 32.0),
            velocity: (2.0, 0.0),
            frames: 10,
            ..SceneConfig::default()
        };
        assert!(matches!(
            make_synthetic_scene(&cfg),
            Err(Error::TrajectoryOutOfBounds { .. })
        ));
    }

    #[test]
    fn seeded_scenes_are_identical() {
        let cfg = SceneConfig::default();
        let a = make_synthetic_scene(&cfg).unwrap();
        let b = make_synthetic_scene(&cfg).unwrap();
        assert_eq!(a.background.as_matrix(), b.background.as_matrix());
        for (fa, fb) in a.frames.iter().zip(&b.frames) {
            assert_eq!(fa.as_matrix(), fb.as_matrix());
        }
    }
}
