//! `synth`: generate a synthetic scene with ground-truth annotations.

use std::path::PathBuf;

use anyhow::{Context, Result};
use log::info;
use panorpca::evalsim::{make_synthetic_scene, SceneConfig};

use crate::commands::{self, Phases};
use crate::io::{self, ValueRange};
use crate::manifest::{Contents, Manifest, SceneManifest};
use crate::parse;
use crate::runconfig::RunConfig;

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Output directory for the scene.
    #[arg(long, short = 'o')]
    pub out: PathBuf,
    /// Run configuration file (JSON).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Background texture seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Camera window height in pixels.
    #[arg(long)]
    pub height: Option<usize>,
    /// Camera window width in pixels.
    #[arg(long)]
    pub width: Option<usize>,
    /// Number of frames.
    #[arg(long)]
    pub frames: Option<usize>,
    /// Camera motion: `static` or `pan:DX,DY` pixels per frame.
    #[arg(long, value_parser = parse::parse_motion)]
    pub motion: Option<panorpca::evalsim::CameraMotion>,
    /// Object shape: `square:SIDE` or `disc:RADIUS`.
    #[arg(long, value_parser = parse::parse_shape)]
    pub shape: Option<panorpca::evalsim::ObjectShape>,
    /// Object center at frame 0, panorama coordinates `X,Y`.
    #[arg(long, value_parser = parse::parse_pair_f64)]
    pub start: Option<(f64, f64)>,
    /// Object displacement per frame, `X,Y`.
    #[arg(long, value_parser = parse::parse_pair_f64)]
    pub velocity: Option<(f64, f64)>,
    /// Object intensity in `[0, 1]`.
    #[arg(long)]
    pub object_intensity: Option<f64>,
}

fn effective_config(args: &Args, run_cfg: &RunConfig) -> SceneConfig {
    let mut cfg = run_cfg.scene.unwrap_or_default();
    if let Some(v) = args.height {
        cfg.height = v;
    }
    if let Some(v) = args.width {
        cfg.width = v;
    }
    if let Some(v) = args.frames {
        cfg.frames = v;
    }
    if let Some(v) = args.motion {
        cfg.motion = v;
    }
    if let Some(v) = args.shape {
        cfg.shape = v;
    }
    if let Some(v) = args.start {
        cfg.start = v;
    }
    if let Some(v) = args.velocity {
        cfg.velocity = v;
    }
    if let Some(v) = args.object_intensity {
        cfg.object_intensity = v;
    }
    if let Some(seed) = args.seed.or(run_cfg.seed) {
        cfg.seed = seed;
    }
    cfg
}

pub fn run(args: Args) -> Result<()> {
    let mut phases = Phases::start();
    let run_cfg = RunConfig::load_optional(args.config.as_deref())?;
    let cfg = effective_config(&args, &run_cfg);

    let scene = make_synthetic_scene(&cfg).context("generating scene")?;
    phases.mark("generate");
    info!(
        "generated {} frames of {}x{} ({} panorama)",
        scene.frame_count(),
        cfg.height,
        cfg.width,
        format_args!("{}x{}", scene.background.height(), scene.background.width()),
    );

    io::ensure_dir(&args.out)?;
    let frames_dir = args.out.join("frames");
    let masks_dir = args.out.join("object_masks");
    io::ensure_dir(&frames_dir)?;
    io::ensure_dir(&masks_dir)?;

    let mut frame_rels = Vec::with_capacity(scene.frames.len());
    let mut mask_rels = Vec::with_capacity(scene.masks.len());
    for (k, (frame, mask)) in scene.frames.iter().zip(&scene.masks).enumerate() {
        let frame_name = format!("frame_{k:03}.png");
        let mask_name = format!("mask_{k:03}.png");
        io::save_gray16(&frames_dir.join(&frame_name), frame.as_matrix(), ValueRange::UNIT)?;
        io::save_gray8(&masks_dir.join(&mask_name), mask.as_matrix())?;
        frame_rels.push(format!("frames/{frame_name}"));
        mask_rels.push(format!("object_masks/{mask_name}"));
    }
    io::save_gray16(
        &args.out.join("background.png"),
        scene.background.as_matrix(),
        ValueRange::UNIT,
    )?;
    let link_rels = commands::write_homographies(&args.out, "links", "link", &scene.links)?;
    phases.mark("write");

    let contents = Contents::Scene(SceneManifest {
        height: cfg.height,
        width: cfg.width,
        frames: frame_rels,
        value_range: ValueRange::UNIT,
        object_masks: mask_rels,
        background: "background.png".to_string(),
        offsets: scene.offsets.clone(),
        links: link_rels,
    });
    let mut manifest = Manifest::new(contents, serde_json::to_value(cfg)?, Some(cfg.seed));
    manifest.durations_ms = phases.finish();
    let path = manifest.save(&args.out)?;

    println!(
        "synth: {} frames ({}x{}) -> {}",
        cfg.frames,
        cfg.height,
        cfg.width,
        path.display()
    );
    Ok(())
}
