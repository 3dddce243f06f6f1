//! The five subcommands and their shared output plumbing.

pub mod corrupt;
pub mod decompose;
pub mod evaluate;
pub mod register;
pub mod synth;

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use anyhow::Result;
use nalgebra::DMatrix;
use panorpca::registration::{format_homography, Homography};
use panorpca::stack::unvec;

use crate::io::{self, ValueRange};

/// Named wall-clock phase timings, recorded into the output manifest.
pub struct Phases {
    started: Instant,
    last: Instant,
    timings: BTreeMap<String, f64>,
}

impl Phases {
    pub fn start() -> Phases {
        let now = Instant::now();
        Phases {
            started: now,
            last: now,
            timings: BTreeMap::new(),
        }
    }

    /// Closes the current phase under the given name.
    pub fn mark(&mut self, name: &str) {
        let now = Instant::now();
        let ms = now.duration_since(self.last).as_secs_f64() * 1e3;
        *self.timings.entry(name.to_string()).or_insert(0.0) += ms;
        self.last = now;
    }

    pub fn finish(mut self) -> BTreeMap<String, f64> {
        let total = self.started.elapsed().as_secs_f64() * 1e3;
        self.timings.insert("total".to_string(), total);
        self.timings
    }
}

fn seq_name(prefix: &str, k: usize, ext: &str) -> String {
    format!("{prefix}_{k:03}.{ext}")
}

/// Writes the columns of an `m*n x p` matrix as 16-bit frames under
/// `dir/sub`, returning the manifest-relative paths.
pub fn write_component16(
    dir: &Path,
    sub: &str,
    prefix: &str,
    data: &DMatrix<f64>,
    height: usize,
    width: usize,
    range: ValueRange,
) -> Result<Vec<String>> {
    let subdir = dir.join(sub);
    io::ensure_dir(&subdir)?;
    let mut rels = Vec::with_capacity(data.ncols());
    for k in 0..data.ncols() {
        let name = seq_name(prefix, k, "png");
        let frame = unvec(data.column(k).as_slice(), height, width);
        io::save_gray16(&subdir.join(&name), &frame, range)?;
        rels.push(format!("{sub}/{name}"));
    }
    Ok(rels)
}

/// Writes the columns of a binary `m*n x p` mask as 8-bit frames.
pub fn write_masks8(
    dir: &Path,
    sub: &str,
    prefix: &str,
    mask: &DMatrix<f64>,
    height: usize,
    width: usize,
) -> Result<Vec<String>> {
    let subdir = dir.join(sub);
    io::ensure_dir(&subdir)?;
    let mut rels = Vec::with_capacity(mask.ncols());
    for k in 0..mask.ncols() {
        let name = seq_name(prefix, k, "png");
        let frame = unvec(mask.column(k).as_slice(), height, width);
        io::save_gray8(&subdir.join(&name), &frame)?;
        rels.push(format!("{sub}/{name}"));
    }
    Ok(rels)
}

/// Writes one homography text file per map under `dir/sub`.
pub fn write_homographies(
    dir: &Path,
    sub: &str,
    prefix: &str,
    maps: &[Homography],
) -> Result<Vec<String>> {
    let subdir = dir.join(sub);
    io::ensure_dir(&subdir)?;
    let mut rels = Vec::with_capacity(maps.len());
    for (k, h) in maps.iter().enumerate() {
        let name = seq_name(prefix, k, "txt");
        io::atomic_write(&subdir.join(&name), format_homography(h).as_bytes())?;
        rels.push(format!("{sub}/{name}"));
    }
    Ok(rels)
}
