//! Synthetic scenes, seeded corruption, and evaluation metrics.
//!
//! Everything here exists to exercise the pipeline against known ground
//! truth: scenes are generated with their background, object masks, and
//! camera motion recorded; corruption is injected reproducibly; metrics
//! follow the foreground/background PSNR and F-measure conventions.

mod corrupt;
mod metrics;
mod scene;

pub use corrupt::{add_gaussian_snr, add_salt_pepper};
pub use metrics::{
    f_measure, foreground_mask, psnr_region, FMeasure, MetricReport, ThresholdMode, PSNR_CAP_DB,
};
pub use scene::{
    make_synthetic_scene, CameraMotion, ObjectShape, RegisteredScene, SceneConfig, SyntheticScene,
};
