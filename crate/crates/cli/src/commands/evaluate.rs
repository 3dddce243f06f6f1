//! `evaluate`: score an estimate against scene ground truth.
//!
//! The truth must be a scene manifest. The estimate is either another
//! scene-shaped manifest (its frames are scored directly, its object masks
//! taken as the detected foreground) or a decomposition manifest (the
//! reconstruction and low-rank dumps are scored, the foreground detected
//! by thresholding `|S2|`).

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use nalgebra::DMatrix;
use panorpca::evalsim::{f_measure, foreground_mask, psnr_region, MetricReport, ThresholdMode};

use crate::io;
use crate::manifest::{self, Contents, Manifest, SCHEMA_VERSION};
use crate::parse;
use crate::runconfig::RunConfig;
use serde::Serialize;

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Scene manifest holding the ground truth.
    #[arg(long, short = 't')]
    pub truth: PathBuf,
    /// Scene or decomposition manifest to score.
    #[arg(long, short = 'e')]
    pub estimate: PathBuf,
    /// Report JSON output path.
    #[arg(long, short = 'o')]
    pub out: PathBuf,
    /// Run configuration file (JSON).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Foreground threshold: `otsu` or `fixed:VALUE`.
    #[arg(long, value_parser = parse::parse_threshold)]
    pub threshold: Option<ThresholdMode>,
}

#[derive(Serialize)]
struct EvalReport {
    schema_version: u32,
    truth: String,
    estimate: String,
    #[serde(flatten)]
    metrics: MetricReport,
}

fn binarize(m: DMatrix<f64>) -> DMatrix<f64> {
    m.map(|v| f64::from(v > 0.5))
}

pub fn run(args: Args) -> Result<()> {
    let run_cfg = RunConfig::load_optional(args.config.as_deref())?;
    let mode = args
        .threshold
        .or(run_cfg.threshold)
        .unwrap_or(ThresholdMode::Otsu);

    let (truth_manifest, truth_base) = Manifest::load(&args.truth)?;
    let Contents::Scene(scene) = &truth_manifest.contents else {
        bail!("ground truth must be a scene manifest");
    };
    let truth = manifest::stack_files(&truth_base, &scene.frames, Some(scene.value_range))?;
    let object = binarize(manifest::stack_files(
        &truth_base,
        &scene.object_masks,
        None,
    )?);

    let (est_manifest, est_base) = Manifest::load(&args.estimate)?;
    let (recon, background_est, foreground, observed) = match &est_manifest.contents {
        Contents::Scene(est) => {
            let frames = manifest::stack_files(&est_base, &est.frames, Some(est.value_range))?;
            let fg = binarize(manifest::stack_files(&est_base, &est.object_masks, None)?);
            let ones = DMatrix::from_element(frames.nrows(), frames.ncols(), 1.0);
            (frames.clone(), frames, fg, ones)
        }
        Contents::Decomposition(dec) => {
            let recon = manifest::stack_files(
                &est_base,
                &dec.reconstruction.frames,
                Some(dec.reconstruction.value_range),
            )?;
            let low_rank =
                manifest::stack_files(&est_base, &dec.low_rank.frames, Some(dec.low_rank.value_range))?;
            let smooth =
                manifest::stack_files(&est_base, &dec.smooth.frames, Some(dec.smooth.value_range))?;
            let masks = binarize(manifest::stack_files(&est_base, &dec.masks, None)?);
            (recon, low_rank, foreground_mask(&smooth, mode), masks)
        }
        Contents::Registration(_) => {
            bail!("estimate must be a scene or decomposition manifest")
        }
    };

    if recon.shape() != truth.shape() {
        bail!(
            "truth and estimate cover different extents ({}x{} vs {}x{} stacked)",
            truth.nrows(),
            truth.ncols(),
            recon.nrows(),
            recon.ncols()
        );
    }

    let fg_region = object.component_mul(&observed);
    let bg_region = object.map(|v| 1.0 - v).component_mul(&observed);
    let f_psnr = psnr_region(&truth, &recon, &fg_region)?;
    let b_psnr = psnr_region(&truth, &background_est, &bg_region)?;
    let fm = f_measure(&foreground, &object)?;

    let metrics = MetricReport {
        f_psnr,
        b_psnr,
        precision: fm.precision,
        recall: fm.recall,
        f_measure: fm.f_measure,
        degenerate: fm.degenerate,
        threshold: MetricReport::threshold_label(mode),
    };
    let report = EvalReport {
        schema_version: SCHEMA_VERSION,
        truth: args.truth.display().to_string(),
        estimate: args.estimate.display().to_string(),
        metrics,
    };
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        io::ensure_dir(parent)?;
    }
    io::write_json(&args.out, &report).context("writing report")?;

    println!(
        "evaluate: f-PSNR {:.2} dB, b-PSNR {:.2} dB, F {:.4} -> {}",
        f_psnr,
        b_psnr,
        fm.f_measure,
        args.out.display()
    );
    Ok(())
}
