//! Evaluation metrics: region PSNR, foreground thresholding, F-measure.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// PSNR cap reported when the regional MSE is (numerically) zero.
pub const PSNR_CAP_DB: f64 = 99.0;

/// Peak signal-to-noise ratio over the pixels where `region` is 1, with
/// peak intensity 1.0. Values are capped at [`PSNR_CAP_DB`].
pub fn psnr_region(
    truth: &DMatrix<f64>,
    estimate: &DMatrix<f64>,
    region: &DMatrix<f64>,
) -> Result<f64> {
    if truth.shape() != estimate.shape() || truth.shape() != region.shape() {
        return Err(Error::DimensionMismatch {
            context: "psnr_region",
            expected: format!("{}x{}", truth.nrows(), truth.ncols()),
            got: format!(
                "estimate {}x{}, region {}x{}",
                estimate.nrows(),
                estimate.ncols(),
                region.nrows(),
                region.ncols()
            ),
        });
    }
    let mut se = 0.0;
    let mut count = 0.0;
    for ((t, e), r) in truth.iter().zip(estimate.iter()).zip(region.iter()) {
        match *r {
            1.0 => {
                se += (t - e).powi(2);
                count += 1.0;
            }
            0.0 => {}
            other => return Err(Error::NonBinaryMask { found: other }),
        }
    }
    if count == 0.0 {
        return Err(Error::EmptyRegion);
    }
    let mse = se / count;
    if mse == 0.0 {
        return Ok(PSNR_CAP_DB);
    }
    Ok((10.0 * (1.0 / mse).log10()).min(PSNR_CAP_DB))
}

/// Threshold selection for turning `|S2|` into a foreground mask.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdMode {
    Fixed(f64),
    /// Otsu's method on a 256-bin histogram of `|S2|`.
    Otsu,
}

/// Otsu threshold of the (nonnegative) values: the histogram split that
/// maximizes the between-class variance. Returns a value in `(min, max)`,
/// or `max` when the values are all equal (empty mask downstream).
fn otsu_threshold(values: impl Iterator<Item = f64> + Clone) -> f64 {
    const BINS: usize = 256;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut count = 0usize;
    for v in values.clone() {
        lo = lo.min(v);
        hi = hi.max(v);
        count += 1;
    }
    if count == 0 || hi <= lo {
        return hi.max(0.0);
    }
    let width = (hi - lo) / BINS as f64;
    let mut hist = [0f64; BINS];
    for v in values {
        let bin = (((v - lo) / width) as usize).min(BINS - 1);
        hist[bin] += 1.0;
    }
    let total = count as f64;
    let total_mean: f64 = hist
        .iter()
        .enumerate()
        .map(|(b, h)| b as f64 * h)
        .sum::<f64>()
        / total;
    let mut w0 = 0.0;
    let mut sum0 = 0.0;
    let mut best = (0.0, 0usize);
    for b in 0..BINS - 1 {
        w0 += hist[b];
        sum0 += b as f64 * hist[b];
        let w1 = total - w0;
        if w0 == 0.0 || w1 == 0.0 {
            continue;
        }
        let mu0 = sum0 / w0;
        let mu1 = (total_mean * total - sum0) / w1;
        let between = w0 * w1 * (mu0 - mu1).powi(2);
        if between > best.0 {
            best = (between, b);
        }
    }
    // boundary between bin b and b+1
    lo + width * (best.1 + 1) as f64
}

/// Binary foreground mask `|S2| > t`, with `t` fixed or Otsu-selected.
pub fn foreground_mask(s2: &DMatrix<f64>, mode: ThresholdMode) -> DMatrix<f64> {
    let t = match mode {
        ThresholdMode::Fixed(t) => t,
        ThresholdMode::Otsu => otsu_threshold(s2.iter().map(|v| v.abs())),
    };
    s2.map(|v| f64::from(v.abs() > t))
}

/// Precision, recall, and their harmonic mean for a pair of binary masks.
/// `degenerate` is set when any denominator (including precision + recall)
/// was empty; the corresponding scores are reported as 0.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FMeasure {
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
    pub degenerate: bool,
}

pub fn f_measure(est: &DMatrix<f64>, truth: &DMatrix<f64>) -> Result<FMeasure> {
    if est.shape() != truth.shape() {
        return Err(Error::DimensionMismatch {
            context: "f_measure",
            expected: format!("{}x{}", truth.nrows(), truth.ncols()),
            got: format!("{}x{}", est.nrows(), est.ncols()),
        });
    }
    let mut tp = 0.0;
    let mut fp = 0.0;
    let mut fne = 0.0;
    for (e, t) in est.iter().zip(truth.iter()) {
        if *e != 0.0 && *e != 1.0 {
            return Err(Error::NonBinaryMask { found: *e });
        }
        if *t != 0.0 && *t != 1.0 {
            return Err(Error::NonBinaryMask { found: *t });
        }
        match (*e == 1.0, *t == 1.0) {
            (true, true) => tp += 1.0,
            (true, false) => fp += 1.0,
            (false, true) => fne += 1.0,
            (false, false) => {}
        }
    }
    let mut degenerate = false;
    let precision = if tp + fp > 0.0 {
        tp / (tp + fp)
    } else {
        degenerate = true;
        0.0
    };
    let recall = if tp + fne > 0.0 {
        tp / (tp + fne)
    } else {
        degenerate = true;
        0.0
    };
    let f = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        degenerate = true;
        0.0
    };
    Ok(FMeasure {
        precision,
        recall,
        f_measure: f,
        degenerate,
    })
}

/// Evaluation summary serialized by the command-line tools.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricReport {
    /// Foreground PSNR: reconstruction vs truth over the object support.
    pub f_psnr: f64,
    /// Background PSNR: low-rank estimate vs truth off the object support.
    pub b_psnr: f64,
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
    pub degenerate: bool,
    /// How the foreground threshold was chosen ("otsu" or "fixed(t)").
    pub threshold: String,
}

impl MetricReport {
    pub fn threshold_label(mode: ThresholdMode) -> String {
        match mode {
            ThresholdMode::Fixed(t) => format!("fixed({t})"),
            ThresholdMode::Otsu => "otsu".to_string(),
        }
    }
}
