//! `decompose`: split a registered stack into its three components.
//!
//! The trace JSON is written before the solver result is inspected, so a
//! diverging run still leaves its iteration history behind for diagnosis.

use std::path::PathBuf;

use anyhow::{Context, Result};
use log::info;
use nalgebra::DMatrix;
use panorpca::solver::{decompose_traced, IterationRecord, LowRankMode, SolverConfig};
use panorpca::stack::unvec;
use panorpca::FrameStack;

use crate::commands::{self, Phases};
use crate::io::{self, ValueRange};
use crate::manifest::{
    self, ComponentDump, Contents, DecompositionManifest, Manifest, SCHEMA_VERSION,
};
use crate::parse::{self, LowRankArg};
use crate::runconfig::RunConfig;
use serde::Serialize;

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Scene or registration manifest holding the stack to decompose.
    #[arg(long, short = 'i')]
    pub input: PathBuf,
    /// Output directory for the components.
    #[arg(long, short = 'o')]
    pub out: PathBuf,
    /// Run configuration file (JSON).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Gradient step size.
    #[arg(long)]
    pub step: Option<f64>,
    /// Target rank for the OptShrink update.
    #[arg(long)]
    pub rank: Option<usize>,
    /// Sparsity penalty weight.
    #[arg(long)]
    pub lambda_sparse: Option<f64>,
    /// TV penalty weight.
    #[arg(long)]
    pub lambda_tv: Option<f64>,
    /// Iteration cap.
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Relative change stopping tolerance.
    #[arg(long)]
    pub rel_tol: Option<f64>,
    /// Low-rank update: `optshrink`, `svt`, or `svt:LAMBDA`.
    #[arg(long, value_parser = parse::parse_low_rank)]
    pub low_rank: Option<LowRankArg>,
    /// ADMM penalty parameter for the TV step.
    #[arg(long)]
    pub admm_rho: Option<f64>,
    /// ADMM outer iteration cap.
    #[arg(long)]
    pub admm_outer: Option<usize>,
    /// ADMM residual tolerance.
    #[arg(long)]
    pub admm_tol: Option<f64>,
    /// Conjugate gradient tolerance inside the ADMM x-update.
    #[arg(long)]
    pub admm_cg_tol: Option<f64>,
    /// Conjugate gradient iteration cap.
    #[arg(long)]
    pub admm_cg_max: Option<usize>,
    /// Write a montage every Nth frame (default: about six montages).
    #[arg(long)]
    pub sample_stride: Option<usize>,
}

fn effective_config(args: &Args, run_cfg: &RunConfig, stack: &FrameStack) -> SolverConfig {
    let mut cfg = run_cfg.solver.unwrap_or_default();
    if let Some(v) = args.step {
        cfg.step = v;
    }
    if let Some(v) = args.rank {
        cfg.rank = v;
    }
    if let Some(v) = args.lambda_sparse {
        cfg.lambda_sparse = v;
    }
    if let Some(v) = args.lambda_tv {
        cfg.lambda_tv = v;
    }
    if let Some(v) = args.max_iter {
        cfg.max_iter = v;
    }
    if let Some(v) = args.rel_tol {
        cfg.rel_tol = v;
    }
    if let Some(arg) = args.low_rank {
        cfg.low_rank_mode = match arg {
            LowRankArg::OptShrink => LowRankMode::OptShrink,
            LowRankArg::SvtDefault => {
                LowRankMode::svt_default(stack.data().nrows(), stack.data().ncols())
            }
            LowRankArg::Svt(lambda_nuclear) => LowRankMode::Svt { lambda_nuclear },
        };
    }
    if let Some(v) = args.admm_rho {
        cfg.admm.rho = v;
    }
    if let Some(v) = args.admm_outer {
        cfg.admm.max_outer = v;
    }
    if let Some(v) = args.admm_tol {
        cfg.admm.tol = v;
    }
    if let Some(v) = args.admm_cg_tol {
        cfg.admm.cg_tol = v;
    }
    if let Some(v) = args.admm_cg_max {
        cfg.admm.cg_max = v;
    }
    cfg
}

#[derive(Serialize)]
struct TraceFile<'a> {
    schema_version: u32,
    converged: bool,
    iterations: &'a [IterationRecord],
}

/// Maps a signed component into display range: zero at mid-gray, the
/// largest magnitude at black or white.
fn signed_panel(m: &DMatrix<f64>, scale: f64) -> DMatrix<f64> {
    if scale <= 0.0 {
        return DMatrix::from_element(m.nrows(), m.ncols(), 0.5);
    }
    m.map(|v| 0.5 + v / (2.0 * scale))
}

fn dump_component(
    out: &std::path::Path,
    sub: &str,
    data: &DMatrix<f64>,
    height: usize,
    width: usize,
) -> Result<ComponentDump> {
    let range = ValueRange::for_data(data);
    let frames = commands::write_component16(out, sub, "frame", data, height, width, range)?;
    Ok(ComponentDump {
        frames,
        value_range: range,
    })
}

pub fn run(args: Args) -> Result<()> {
    let mut phases = Phases::start();
    let run_cfg = RunConfig::load_optional(args.config.as_deref())?;

    let (src, base) = Manifest::load(&args.input)?;
    let loaded = manifest::load_stack(&src, &base)?;
    let (height, width) = (loaded.height, loaded.width);
    let stack = loaded.stack;
    let cfg = effective_config(&args, &run_cfg, &stack);
    phases.mark("load");
    info!(
        "decomposing {} frames of {}x{} (max {} iterations)",
        stack.frame_count(),
        height,
        width,
        cfg.max_iter
    );

    let (result, trace) = decompose_traced(&stack, &cfg);
    phases.mark("solve");

    io::ensure_dir(&args.out)?;
    let trace_path = args.out.join("trace.json");
    io::write_json(
        &trace_path,
        &TraceFile {
            schema_version: SCHEMA_VERSION,
            converged: trace.converged,
            iterations: &trace.iterations,
        },
    )?;
    let dec = result.with_context(|| {
        format!("solve failed; partial trace retained at {}", trace_path.display())
    })?;

    let reconstruction = dec.reconstruction();
    let low_rank = dump_component(&args.out, "low_rank", &dec.low_rank, height, width)?;
    let sparse = dump_component(&args.out, "sparse", &dec.sparse, height, width)?;
    let smooth = dump_component(&args.out, "smooth", &dec.smooth, height, width)?;
    let recon_dump = dump_component(&args.out, "reconstruction", &reconstruction, height, width)?;
    let mask_rels = commands::write_masks8(&args.out, "masks", "mask", stack.mask(), height, width)?;

    let p = stack.frame_count();
    let stride = args
        .sample_stride
        .or(run_cfg.sample_stride)
        .unwrap_or_else(|| p.div_ceil(6).max(1));
    let montage_dir = args.out.join("montages");
    io::ensure_dir(&montage_dir)?;
    let s1_scale = dec.sparse.amax();
    let s2_scale = dec.smooth.amax();
    let mut montage_rels = Vec::new();
    for k in (0..p).step_by(stride) {
        let panels = [
            stack.frame_matrix(k),
            unvec(dec.low_rank.column(k).as_slice(), height, width),
            signed_panel(&unvec(dec.sparse.column(k).as_slice(), height, width), s1_scale),
            signed_panel(&unvec(dec.smooth.column(k).as_slice(), height, width), s2_scale),
            unvec(reconstruction.column(k).as_slice(), height, width),
        ];
        let name = format!("frame_{k:03}.png");
        io::save_montage(&montage_dir.join(&name), &panels)?;
        montage_rels.push(format!("montages/{name}"));
    }
    phases.mark("write");

    let contents = Contents::Decomposition(DecompositionManifest {
        source: args.input.display().to_string(),
        height,
        width,
        low_rank,
        sparse,
        smooth,
        reconstruction: recon_dump,
        masks: mask_rels,
        trace: "trace.json".to_string(),
        montages: montage_rels,
        converged: trace.converged,
    });
    let params = serde_json::json!({
        "solver": cfg,
        "sample_stride": stride,
    });
    let mut out_manifest = Manifest::new(contents, params, None);
    out_manifest.durations_ms = phases.finish();
    let path = out_manifest.save(&args.out)?;

    let iterations = trace.iterations.len();
    println!(
        "decompose: {} frames, {} iterations ({}) -> {}",
        p,
        iterations,
        if trace.converged { "converged" } else { "iteration cap reached" },
        path.display()
    );
    Ok(())
}
