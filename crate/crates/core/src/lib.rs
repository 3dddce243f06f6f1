//! Panoramic robust PCA for corrupted, possibly moving-camera video.
//!
//! The pipeline registers video frames onto a common panoramic canvas and
//! decomposes the stacked frames into three components:
//!
//! * `L`: a low-rank background spanning the full field of view,
//! * `S1`: sparse corruptions (outliers),
//! * `S2`: a smooth dynamic foreground, regularized by weighted
//!   anisotropic total variation.
//!
//! The low-rank update uses OptShrink, a data-driven singular-value
//! shrinkage built from the trailing (noise) spectrum; a plain SVT mode is
//! available as a baseline. Frames that only partially cover the canvas are
//! handled through an observation mask: the data-fit term, the TV weights,
//! and the corruption models all restrict themselves to observed pixels.
//!
//! Modules:
//!
//! * [`image`], [`stack`], [`tv`]: canonical data types, masked projection,
//!   frame stacking, and the weighted-TV value / difference operator.
//! * [`registration`]: homography estimation (DLT + RANSAC), corner
//!   matching, chaining to an anchor frame, and warping onto the canvas.
//! * [`optshrink`]: OptShrink low-rank estimation and SVT.
//! * [`tvprox`]: the TV proximal operator solved by ADMM (CG or FFT inner
//!   solve).
//! * [`solver`]: the outer masked proximal-gradient loop.
//! * [`evalsim`]: synthetic scenes, corruption injection, and evaluation
//!   metrics (PSNR over regions, F-measure).

pub mod error;
pub mod evalsim;
pub mod image;
pub mod optshrink;
pub mod registration;
pub mod solver;
pub mod stack;
pub mod tv;
pub mod tvprox;

mod svd;

pub use error::{Error, Result};
pub use image::Image;
pub use stack::{project_mask, stack_frames, Decomposition, FrameStack};
pub use tv::{tv_value, DiffOp, TvWeights};
