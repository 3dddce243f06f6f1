//! Versioned JSON manifests chaining the pipeline stages together.
//!
//! Each command writes a `manifest.json` into its output directory; file
//! references inside are relative to that directory, so a manifest
//! directory is self-contained and can be moved as a unit.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use nalgebra::DMatrix;
use panorpca::registration::CanvasGeometry;
use panorpca::{stack_frames, FrameStack, Image};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::io::{self, ValueRange};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    /// Tool name and version that produced the manifest.
    pub tool: String,
    /// Seed the producing command ran under, when it used one.
    pub seed: Option<u64>,
    /// Effective configuration of the producing command.
    pub parameters: Value,
    /// Wall-clock phase timings. Provenance only; not covered by the
    /// byte-identical reproducibility guarantee.
    pub durations_ms: BTreeMap<String, f64>,
    #[serde(flatten)]
    pub contents: Contents,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Contents {
    Scene(SceneManifest),
    Registration(RegistrationManifest),
    Decomposition(DecompositionManifest),
}

/// A synthetic scene: data frames plus ground-truth annotations.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SceneManifest {
    pub height: usize,
    pub width: usize,
    /// 16-bit grayscale data frames, in order.
    pub frames: Vec<String>,
    pub value_range: ValueRange,
    /// Per-frame binary object-support masks.
    pub object_masks: Vec<String>,
    /// Ground-truth background panorama.
    pub background: String,
    /// Camera window origin per frame in panorama coordinates.
    pub offsets: Vec<(i64, i64)>,
    /// Consecutive-frame homography text files (`k` into `k+1`).
    pub links: Vec<String>,
}

/// A registered stack: warped canvas frames with observation masks.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegistrationManifest {
    pub canvas: CanvasGeometry,
    pub anchor: usize,
    /// 16-bit grayscale canvas frames, in order.
    pub frames: Vec<String>,
    pub value_range: ValueRange,
    /// Per-frame binary observation masks.
    pub masks: Vec<String>,
    /// Per-frame map into anchor coordinates, one text file each.
    pub homographies: Vec<String>,
    /// Estimated consecutive-frame links.
    pub links: Vec<String>,
}

/// Solver output: the three component sequences plus diagnostics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecompositionManifest {
    /// Input manifest path, as given on the command line.
    pub source: String,
    pub height: usize,
    pub width: usize,
    pub low_rank: ComponentDump,
    pub sparse: ComponentDump,
    pub smooth: ComponentDump,
    /// Reconstructed scene `L + S2`.
    pub reconstruction: ComponentDump,
    /// Observation masks carried over from the input.
    pub masks: Vec<String>,
    pub trace: String,
    pub montages: Vec<String>,
    pub converged: bool,
}

/// One 16-bit image sequence together with its dump range.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComponentDump {
    pub frames: Vec<String>,
    pub value_range: ValueRange,
}

impl Manifest {
    pub fn new(contents: Contents, parameters: Value, seed: Option<u64>) -> Manifest {
        Manifest {
            schema_version: SCHEMA_VERSION,
            tool: format!("panorpca {}", env!("CARGO_PKG_VERSION")),
            seed,
            parameters,
            durations_ms: BTreeMap::new(),
            contents,
        }
    }

    pub fn save(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join("manifest.json");
        io::write_json(&path, self)?;
        Ok(path)
    }

    /// Reads a manifest and returns it with its base directory, against
    /// which the referenced files resolve.
    pub fn load(path: &Path) -> Result<(Manifest, PathBuf)> {
        let text =
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let manifest: Manifest = serde_json::from_str(&text)
            .with_context(|| format!("parsing {}", path.display()))?;
        if manifest.schema_version != SCHEMA_VERSION {
            bail!(
                "unsupported manifest schema version {} in {} (expected {})",
                manifest.schema_version,
                path.display(),
                SCHEMA_VERSION
            );
        }
        let base = path
            .parent()
            .filter(|p| !p.as_os_str().is_empty())
            .unwrap_or(Path::new("."))
            .to_path_buf();
        Ok((manifest, base))
    }
}

/// A manifest's pixel data in stacked column form.
pub struct LoadedStack {
    pub stack: FrameStack,
    pub height: usize,
    pub width: usize,
}

/// Loads the data stack a scene or registration manifest points at.
/// Scene frames are fully observed; registration frames carry their masks.
pub fn load_stack(manifest: &Manifest, base: &Path) -> Result<LoadedStack> {
    match &manifest.contents {
        Contents::Scene(scene) => {
            let frames = load_frames(base, &scene.frames, scene.value_range)?;
            let ones = Image::constant(scene.height, scene.width, 1.0);
            let masks = vec![ones; frames.len()];
            let stack = stack_frames(&frames, &masks)?;
            Ok(LoadedStack {
                stack,
                height: scene.height,
                width: scene.width,
            })
        }
        Contents::Registration(reg) => {
            let frames = load_frames(base, &reg.frames, reg.value_range)?;
            let mut masks = Vec::with_capacity(reg.masks.len());
            for rel in &reg.masks {
                masks.push(Image::new(io::load_gray(&base.join(rel))?)?);
            }
            let stack = stack_frames(&frames, &masks)?;
            Ok(LoadedStack {
                stack,
                height: reg.canvas.height,
                width: reg.canvas.width,
            })
        }
        Contents::Decomposition(_) => {
            bail!("decomposition manifests hold solver output, not an input stack")
        }
    }
}

fn load_frames(base: &Path, rels: &[String], range: ValueRange) -> Result<Vec<Image>> {
    let mut frames = Vec::with_capacity(rels.len());
    for rel in rels {
        frames.push(Image::new(io::load_gray16(&base.join(rel), range)?)?);
    }
    Ok(frames)
}

/// Stacks a sequence of same-sized grayscale files as `m*n x p` columns.
pub fn stack_files(base: &Path, rels: &[String], range: Option<ValueRange>) -> Result<DMatrix<f64>> {
    if rels.is_empty() {
        bail!("manifest references an empty image sequence");
    }
    let mut columns: Vec<DMatrix<f64>> = Vec::with_capacity(rels.len());
    for rel in rels {
        let path = base.join(rel);
        let m = match range {
            Some(range) => io::load_gray16(&path, range)?,
            None => io::load_gray(&path)?,
        };
        columns.push(m);
    }
    let (h, w) = columns[0].shape();
    let mut out = DMatrix::zeros(h * w, columns.len());
    for (k, col) in columns.iter().enumerate() {
        if col.shape() != (h, w) {
            bail!("sequence images differ in size ({}x{} vs {}x{})", h, w, col.nrows(), col.ncols());
        }
        out.column_mut(k).copy_from_slice(col.as_slice());
    }
    Ok(out)
}
