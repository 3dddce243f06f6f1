//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by registration, shrinkage, and solver routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: String,
        got: String,
    },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("mask entries must be 0 or 1 (found {found})")]
    NonBinaryMask { found: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("homography maps point ({x}, {y}) to infinity")]
    PointAtInfinity { x: f64, y: f64 },

    #[error("need at least {needed} correspondences, got {got}")]
    NotEnoughCorrespondences { needed: usize, got: usize },

    #[error("degenerate correspondence configuration (constraint matrix rank-deficient)")]
    DegenerateConfiguration,

    #[error("homography normalization failed: |h9| = {h9:e} below threshold")]
    NormalizationFailure { h9: f64 },

    #[error("homography is singular (|det| = {det:e})")]
    SingularHomography { det: f64 },

    #[error("found only {found} feature matches, need at least {needed}")]
    InsufficientFeatures { found: usize, needed: usize },

    #[error("ransac consensus too small: best inlier fraction {best_fraction:.3} < {required:.3}")]
    NoConsensus { best_fraction: f64, required: f64 },

    #[error("rank {rank} out of range for a {rows}x{cols} matrix")]
    RankOutOfRange { rank: usize, rows: usize, cols: usize },

    #[error("svd failed to converge")]
    SvdFailed,

    #[error("solver diverged (non-finite iterate) at iteration {iteration}")]
    Diverged { iteration: usize },

    #[error("signal power is zero; SNR is undefined")]
    ZeroSignal,

    #[error("evaluation region is empty")]
    EmptyRegion,

    #[error("object trajectory leaves the scene at frame {frame}")]
    TrajectoryOutOfBounds { frame: usize },

    #[error("parse error in {context}: {message}")]
    Parse { context: &'static str, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;
