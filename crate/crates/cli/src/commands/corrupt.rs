//! `corrupt`: perturb the frames a manifest points at, reproducibly.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use log::info;
use panorpca::evalsim::{add_gaussian_snr, add_salt_pepper};

use crate::commands::{self, Phases};
use crate::io::{self, ValueRange};
use crate::manifest::{self, Contents, Manifest};
use crate::runconfig::{CorruptionKind, CorruptionSettings, RunConfig};

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Scene or registration manifest to corrupt.
    #[arg(long, short = 'i')]
    pub input: PathBuf,
    /// Output directory for the corrupted copy.
    #[arg(long, short = 'o')]
    pub out: PathBuf,
    /// Run configuration file (JSON).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Corruption seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Corruption model.
    #[arg(long, value_enum)]
    pub kind: Option<CorruptionKind>,
    /// Per-pixel flip probability for salt-and-pepper.
    #[arg(long, short = 'p')]
    pub probability: Option<f64>,
    /// Target SNR in dB for Gaussian noise.
    #[arg(long)]
    pub snr_db: Option<f64>,
}

fn effective_settings(args: &Args, run_cfg: &RunConfig) -> Result<CorruptionSettings> {
    let base = run_cfg.corruption;
    let kind = match args.kind.or(base.map(|c| c.kind)) {
        Some(kind) => kind,
        None => bail!("no corruption model: pass --kind or a config with a corruption section"),
    };
    Ok(CorruptionSettings {
        kind,
        probability: args.probability.or(base.and_then(|c| c.probability)),
        snr_db: args.snr_db.or(base.and_then(|c| c.snr_db)),
    })
}

fn copy_rel(base: &Path, out: &Path, rel: &str) -> Result<()> {
    let to = out.join(rel);
    if let Some(parent) = to.parent() {
        io::ensure_dir(parent)?;
    }
    io::atomic_copy(&base.join(rel), &to)
}

pub fn run(args: Args) -> Result<()> {
    let mut phases = Phases::start();
    let run_cfg = RunConfig::load_optional(args.config.as_deref())?;
    let settings = effective_settings(&args, &run_cfg)?;
    let seed = args.seed.or(run_cfg.seed).unwrap_or(0);

    let (src, base) = Manifest::load(&args.input)?;
    let loaded = manifest::load_stack(&src, &base)?;
    phases.mark("load");

    let corrupted = match settings.kind {
        CorruptionKind::SaltPepper => {
            let p = settings
                .probability
                .context("salt-and-pepper corruption needs --probability")?;
            add_salt_pepper(&loaded.stack, p, seed)?
        }
        CorruptionKind::Gaussian => {
            let snr = settings
                .snr_db
                .context("gaussian corruption needs --snr-db")?;
            add_gaussian_snr(&loaded.stack, snr, seed)?
        }
    };
    phases.mark("corrupt");
    info!(
        "corrupted {} frames ({:?}, seed {seed})",
        corrupted.frame_count(),
        settings.kind
    );

    io::ensure_dir(&args.out)?;
    let range = ValueRange::for_data(corrupted.data());
    let frame_rels = commands::write_component16(
        &args.out,
        "frames",
        "frame",
        corrupted.data(),
        loaded.height,
        loaded.width,
        range,
    )?;

    // carry every ground-truth and registration artifact over unchanged
    let contents = match &src.contents {
        Contents::Scene(scene) => {
            let mut scene = scene.clone();
            for rel in scene.object_masks.iter().chain(&scene.links) {
                copy_rel(&base, &args.out, rel)?;
            }
            copy_rel(&base, &args.out, &scene.background)?;
            scene.frames = frame_rels;
            scene.value_range = range;
            Contents::Scene(scene)
        }
        Contents::Registration(reg) => {
            let mut reg = reg.clone();
            for rel in reg.masks.iter().chain(&reg.homographies).chain(&reg.links) {
                copy_rel(&base, &args.out, rel)?;
            }
            reg.frames = frame_rels;
            reg.value_range = range;
            Contents::Registration(reg)
        }
        Contents::Decomposition(_) => unreachable!("load_stack rejects decomposition manifests"),
    };
    phases.mark("write");

    let params = serde_json::json!({
        "source": args.input.display().to_string(),
        "corruption": settings,
    });
    let mut out_manifest = Manifest::new(contents, params, Some(seed));
    out_manifest.durations_ms = phases.finish();
    let path = out_manifest.save(&args.out)?;

    println!(
        "corrupt: {} frames -> {}",
        corrupted.frame_count(),
        path.display()
    );
    Ok(())
}
