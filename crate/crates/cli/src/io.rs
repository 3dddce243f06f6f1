//! Grayscale image and JSON file I/O.
//!
//! All outputs are written atomically: bytes are staged in a dot-prefixed
//! temporary next to the target and renamed over it, so a crash never
//! leaves a half-written file behind.
//!
//! Float data travels as 16-bit grayscale PNG. A dump maps `[lo, hi]`
//! linearly onto the 16-bit grid; the range is recorded in the manifest so
//! readers can invert it. Data already inside `[0, 1]` keeps the unit
//! range, which makes repeated load/save cycles lossless.

use std::fs;
use std::io::Cursor;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use image::{DynamicImage, ImageBuffer, ImageFormat, Luma};
use nalgebra::DMatrix;
use serde::Serialize;

/// Linear value range of a 16-bit component dump.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct ValueRange {
    pub lo: f64,
    pub hi: f64,
}

impl ValueRange {
    pub const UNIT: ValueRange = ValueRange { lo: 0.0, hi: 1.0 };

    /// Unit range when the data already sits inside `[0, 1]` (lossless
    /// round-trips), otherwise the actual extrema, widened when flat.
    pub fn for_data(m: &DMatrix<f64>) -> ValueRange {
        let lo = m.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = m.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if lo >= 0.0 && hi <= 1.0 {
            ValueRange::UNIT
        } else if hi - lo < 1e-12 {
            ValueRange { lo, hi: lo + 1.0 }
        } else {
            ValueRange { lo, hi }
        }
    }
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn temp_path(path: &Path) -> PathBuf {
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!(".{name}.tmp"))
}

pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = temp_path(path);
    fs::write(&tmp, bytes).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("renaming into {}", path.display()))
}

pub fn atomic_copy(from: &Path, to: &Path) -> Result<()> {
    let tmp = temp_path(to);
    fs::copy(from, &tmp)
        .with_context(|| format!("copying {} to {}", from.display(), tmp.display()))?;
    fs::rename(&tmp, to).with_context(|| format!("renaming into {}", to.display()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).context("serializing JSON")?;
    text.push('\n');
    atomic_write(path, text.as_bytes())
}

/// Loads an 8- or 16-bit grayscale PNG/PGM as floats in `[0, 1]`. Color
/// inputs are reduced to luma.
pub fn load_gray(path: &Path) -> Result<DMatrix<f64>> {
    let img = image::open(path).with_context(|| format!("reading {}", path.display()))?;
    let mat = if is_sixteen_bit(&img) {
        let buf = img.to_luma16();
        let (w, h) = buf.dimensions();
        DMatrix::from_fn(h as usize, w as usize, |r, c| {
            f64::from(buf.get_pixel(c as u32, r as u32)[0]) / f64::from(u16::MAX)
        })
    } else {
        let buf = img.to_luma8();
        let (w, h) = buf.dimensions();
        DMatrix::from_fn(h as usize, w as usize, |r, c| {
            f64::from(buf.get_pixel(c as u32, r as u32)[0]) / f64::from(u8::MAX)
        })
    };
    Ok(mat)
}

/// Loads a 16-bit dump written by [`save_gray16`], mapping the grid back
/// onto the recorded range.
pub fn load_gray16(path: &Path, range: ValueRange) -> Result<DMatrix<f64>> {
    let img = image::open(path).with_context(|| format!("reading {}", path.display()))?;
    if !is_sixteen_bit(&img) {
        bail!("{} is not a 16-bit grayscale image", path.display());
    }
    let buf = img.to_luma16();
    let (w, h) = buf.dimensions();
    let span = range.hi - range.lo;
    Ok(DMatrix::from_fn(h as usize, w as usize, |r, c| {
        let k = f64::from(buf.get_pixel(c as u32, r as u32)[0]);
        range.lo + span * (k / f64::from(u16::MAX))
    }))
}

fn is_sixteen_bit(img: &DynamicImage) -> bool {
    matches!(
        img,
        DynamicImage::ImageLuma16(_)
            | DynamicImage::ImageLumaA16(_)
            | DynamicImage::ImageRgb16(_)
            | DynamicImage::ImageRgba16(_)
    )
}

/// Writes an 8-bit grayscale PNG; values are clamped to `[0, 1]`.
pub fn save_gray8(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let (h, w) = m.shape();
    let mut raw = Vec::with_capacity(h * w);
    for r in 0..h {
        for c in 0..w {
            raw.push((m[(r, c)].clamp(0.0, 1.0) * 255.0).round() as u8);
        }
    }
    let buf: ImageBuffer<Luma<u8>, Vec<u8>> =
        ImageBuffer::from_raw(w as u32, h as u32, raw).expect("buffer sized to the matrix");
    encode_png(path, &DynamicImage::ImageLuma8(buf))
}

/// Writes a 16-bit grayscale PNG mapping `[range.lo, range.hi]` onto the
/// full grid.
pub fn save_gray16(path: &Path, m: &DMatrix<f64>, range: ValueRange) -> Result<()> {
    let (h, w) = m.shape();
    let span = range.hi - range.lo;
    if !(span > 0.0) {
        bail!("degenerate value range [{}, {}]", range.lo, range.hi);
    }
    let mut raw = Vec::with_capacity(h * w);
    for r in 0..h {
        for c in 0..w {
            let t = ((m[(r, c)] - range.lo) / span).clamp(0.0, 1.0);
            raw.push((t * f64::from(u16::MAX)).round() as u16);
        }
    }
    let buf: ImageBuffer<Luma<u16>, Vec<u16>> =
        ImageBuffer::from_raw(w as u32, h as u32, raw).expect("buffer sized to the matrix");
    encode_png(path, &DynamicImage::ImageLuma16(buf))
}

fn encode_png(path: &Path, img: &DynamicImage) -> Result<()> {
    let mut bytes = Vec::new();
    img.write_to(&mut Cursor::new(&mut bytes), ImageFormat::Png)
        .with_context(|| format!("encoding {}", path.display()))?;
    atomic_write(path, &bytes)
}

/// Writes equally sized panels side by side with white gutters, 8-bit.
/// Panels are expected in display range `[0, 1]`.
pub fn save_montage(path: &Path, panels: &[DMatrix<f64>]) -> Result<()> {
    const GUTTER: usize = 2;
    if panels.is_empty() {
        bail!("montage needs at least one panel");
    }
    let (h, w) = panels[0].shape();
    if panels.iter().any(|p| p.shape() != (h, w)) {
        bail!("montage panels differ in size");
    }
    let total_w = panels.len() * w + (panels.len() - 1) * GUTTER;
    let mut strip = DMatrix::from_element(h, total_w, 1.0);
    for (i, panel) in panels.iter().enumerate() {
        strip.view_mut((0, i * (w + GUTTER)), (h, w)).copy_from(panel);
    }
    save_gray8(path, &strip)
}

/// Lists the image files of a directory in name order.
pub fn list_images(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in
        fs::read_dir(dir).with_context(|| format!("listing {}", dir.display()))?
    {
        let path = entry?.path();
        let ext = path
            .extension()
            .map(|e| e.to_string_lossy().to_ascii_lowercase());
        if matches!(ext.as_deref(), Some("png" | "pgm" | "pnm")) {
            files.push(path);
        }
    }
    files.sort();
    if files.is_empty() {
        bail!("no .png/.pgm images found in {}", dir.display());
    }
    Ok(files)
}
