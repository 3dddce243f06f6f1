//! `register`: align an image sequence onto a panoramic canvas.

use std::path::PathBuf;

use anyhow::{Context, Result};
use log::info;
use panorpca::registration::{register_video, RegistrationConfig};
use panorpca::Image;

use crate::commands::{self, Phases};
use crate::io::{self, ValueRange};
use crate::manifest::{Contents, Manifest, RegistrationManifest};
use crate::runconfig::RunConfig;

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Directory holding the ordered image sequence (PNG or PGM; frames
    /// are taken in file name order).
    #[arg(long, short = 'i')]
    pub input: PathBuf,
    /// Output directory for the registered stack.
    #[arg(long, short = 'o')]
    pub out: PathBuf,
    /// Run configuration file (JSON).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// RANSAC sampling seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Anchor frame index (default: middle frame).
    #[arg(long)]
    pub anchor: Option<usize>,
    /// Cap on detected corners per frame.
    #[arg(long)]
    pub max_features: Option<usize>,
    /// Matching patch half-width.
    #[arg(long)]
    pub patch_radius: Option<usize>,
    /// Match search window half-width.
    #[arg(long)]
    pub search_radius: Option<usize>,
    /// Minimum normalized patch correlation for a match.
    #[arg(long)]
    pub min_correlation: Option<f64>,
    /// RANSAC minimal samples drawn per link.
    #[arg(long)]
    pub ransac_iterations: Option<usize>,
    /// RANSAC inlier reprojection threshold in pixels.
    #[arg(long)]
    pub inlier_threshold: Option<f64>,
    /// Smallest accepted consensus as a fraction of the matches.
    #[arg(long)]
    pub min_inlier_fraction: Option<f64>,
}

fn effective_config(args: &Args, run_cfg: &RunConfig) -> RegistrationConfig {
    let mut cfg = run_cfg.registration.unwrap_or_default();
    if args.anchor.is_some() {
        cfg.anchor = args.anchor;
    }
    if let Some(v) = args.max_features {
        cfg.features.max_features = v;
    }
    if let Some(v) = args.patch_radius {
        cfg.features.patch_radius = v;
    }
    if let Some(v) = args.search_radius {
        cfg.features.search_radius = v;
    }
    if let Some(v) = args.min_correlation {
        cfg.features.min_correlation = v;
    }
    if let Some(v) = args.ransac_iterations {
        cfg.ransac.iterations = v;
    }
    if let Some(v) = args.inlier_threshold {
        cfg.ransac.inlier_threshold = v;
    }
    if let Some(v) = args.min_inlier_fraction {
        cfg.ransac.min_inlier_fraction = v;
    }
    if let Some(seed) = args.seed.or(run_cfg.seed) {
        cfg.ransac.seed = seed;
    }
    cfg
}

pub fn run(args: Args) -> Result<()> {
    let mut phases = Phases::start();
    let run_cfg = RunConfig::load_optional(args.config.as_deref())?;
    let cfg = effective_config(&args, &run_cfg);

    let paths = io::list_images(&args.input)?;
    let mut frames = Vec::with_capacity(paths.len());
    for path in &paths {
        frames.push(Image::new(io::load_gray(path)?).with_context(|| {
            format!("loading {}", path.display())
        })?);
    }
    phases.mark("load");
    info!("loaded {} frames from {}", frames.len(), args.input.display());

    let reg = register_video(&frames, &cfg).context("registering sequence")?;
    phases.mark("register");
    info!(
        "canvas {}x{} at ({}, {}), anchor {}",
        reg.canvas.height, reg.canvas.width, reg.canvas.x_min, reg.canvas.y_min, reg.anchor
    );

    io::ensure_dir(&args.out)?;
    let (h, w) = (reg.canvas.height, reg.canvas.width);
    let frame_rels =
        commands::write_component16(&args.out, "frames", "frame", reg.stack.data(), h, w, ValueRange::UNIT)?;
    let mask_rels = commands::write_masks8(&args.out, "masks", "mask", reg.stack.mask(), h, w)?;
    let homography_rels =
        commands::write_homographies(&args.out, "homographies", "to_anchor", &reg.to_anchor)?;
    let link_rels = commands::write_homographies(&args.out, "links", "link", &reg.links)?;
    phases.mark("write");

    let contents = Contents::Registration(RegistrationManifest {
        canvas: reg.canvas,
        anchor: reg.anchor,
        frames: frame_rels,
        value_range: ValueRange::UNIT,
        masks: mask_rels,
        homographies: homography_rels,
        links: link_rels,
    });
    let mut manifest = Manifest::new(contents, serde_json::to_value(cfg)?, Some(cfg.ransac.seed));
    manifest.durations_ms = phases.finish();
    let path = manifest.save(&args.out)?;

    println!(
        "register: {} frames -> canvas {}x{} (anchor {}) -> {}",
        frames.len(),
        h,
        w,
        reg.anchor,
        path.display()
    );
    Ok(())
}
