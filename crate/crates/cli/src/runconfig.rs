//! Run configuration file shared by all subcommands.
//!
//! A run config is a JSON document whose sections mirror the library
//! config structs. Every section is optional; a missing section means the
//! library defaults, and individual command-line flags override whatever
//! the file provides.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use panorpca::evalsim::{SceneConfig, ThresholdMode};
use panorpca::registration::RegistrationConfig;
use panorpca::solver::SolverConfig;
use serde::{Deserialize, Serialize};

#[derive(Debug, Default, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Seed applied wherever a command needs randomness and no `--seed`
    /// flag is given.
    pub seed: Option<u64>,
    pub scene: Option<SceneConfig>,
    pub registration: Option<RegistrationConfig>,
    pub solver: Option<SolverConfig>,
    pub corruption: Option<CorruptionSettings>,
    pub threshold: Option<ThresholdMode>,
    /// Montage sampling stride for `decompose`.
    pub sample_stride: Option<usize>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorruptionSettings {
    pub kind: CorruptionKind,
    pub probability: Option<f64>,
    pub snr_db: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum CorruptionKind {
    /// Salt and pepper: each pixel flips to 0 or 1 with the given
    /// probability.
    SaltPepper,
    /// Additive white Gaussian noise at a given SNR in dB.
    Gaussian,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text =
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn load_optional(path: Option<&Path>) -> Result<RunConfig> {
        match path {
            Some(p) => Self::load(p),
            None => Ok(RunConfig::default()),
        }
    }
}
