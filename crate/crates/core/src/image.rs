//! Grayscale image type.
//!
//! Images are `height x width` matrices of `f64` intensities in `[0, 1]`,
//! stored column-major (nalgebra's native layout). Column-major storage
//! means `vec(F)` of a frame is just the underlying data slice, which is
//! the vectorization convention used by the frame stack.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// A single grayscale frame with intensities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    data: DMatrix<f64>,
}

impl Image {
    /// Wraps a matrix of intensities. Fails on empty matrices, non-finite
    /// values, or values outside `[0, 1]`.
    pub fn new(data: DMatrix<f64>) -> Result<Self> {
        if data.nrows() == 0 || data.ncols() == 0 {
            return Err(Error::EmptyInput("image must have at least one pixel"));
        }
        for &v in data.iter() {
            if !v.is_finite() {
                return Err(Error::NonFinite("image intensities"));
            }
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidConfig(format!(
                    "image intensity {v} outside [0, 1]"
                )));
            }
        }
        Ok(Self { data })
    }

    /// Builds an image from a per-pixel closure `(row, col) -> intensity`.
    /// The closure output is clamped to `[0, 1]`.
    pub fn from_fn(height: usize, width: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let data = DMatrix::from_fn(height, width, |i, j| f(i, j).clamp(0.0, 1.0));
        Self { data }
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self {
            data: DMatrix::zeros(height, width),
        }
    }

    pub fn constant(height: usize, width: usize, value: f64) -> Self {
        Self {
            data: DMatrix::from_element(height, width, value.clamp(0.0, 1.0)),
        }
    }

    /// Loads 8-bit grayscale samples (row-major) by dividing by 255.
    pub fn from_u8(samples: &[u8], height: usize, width: usize) -> Result<Self> {
        if samples.len() != height * width {
            return Err(Error::DimensionMismatch {
                context: "from_u8",
                expected: format!("{} samples", height * width),
                got: format!("{}", samples.len()),
            });
        }
        let data = DMatrix::from_fn(height, width, |i, j| {
            f64::from(samples[i * width + j]) / 255.0
        });
        Self::new(data)
    }

    /// Loads 16-bit grayscale samples (row-major) by dividing by 65535.
    pub fn from_u16(samples: &[u16], height: usize, width: usize) -> Result<Self> {
        if samples.len() != height * width {
            return Err(Error::DimensionMismatch {
                context: "from_u16",
                expected: format!("{} samples", height * width),
                got: format!("{}", samples.len()),
            });
        }
        let data = DMatrix::from_fn(height, width, |i, j| {
            f64::from(samples[i * width + j]) / 65535.0
        });
        Self::new(data)
    }

    /// Converts interleaved 8-bit RGB samples (row-major) to grayscale
    /// luminance `0.299 R + 0.587 G + 0.114 B`.
    pub fn from_rgb_u8(samples: &[u8], height: usize, width: usize) -> Result<Self> {
        if samples.len() != height * width * 3 {
            return Err(Error::DimensionMismatch {
                context: "from_rgb_u8",
                expected: format!("{} samples", height * width * 3),
                got: format!("{}", samples.len()),
            });
        }
        let data = DMatrix::from_fn(height, width, |i, j| {
            let base = (i * width + j) * 3;
            let r = f64::from(samples[base]);
            let g = f64::from(samples[base + 1]);
            let b = f64::from(samples[base + 2]);
            (0.299 * r + 0.587 * g + 0.114 * b) / 255.0
        });
        Self::new(data)
    }

    /// Quantizes to 8-bit samples (row-major), clamping to `[0, 1]`.
    pub fn to_u8(&self) -> Vec<u8> {
        let (h, w) = (self.height(), self.width());
        let mut out = Vec::with_capacity(h * w);
        for i in 0..h {
            for j in 0..w {
                out.push((self.data[(i, j)].clamp(0.0, 1.0) * 255.0).round() as u8);
            }
        }
        out
    }

    /// Quantizes to 16-bit samples (row-major), clamping to `[0, 1]`.
    pub fn to_u16(&self) -> Vec<u16> {
        let (h, w) = (self.height(), self.width());
        let mut out = Vec::with_capacity(h * w);
        for i in 0..h {
            for j in 0..w {
                out.push((self.data[(i, j)].clamp(0.0, 1.0) * 65535.0).round() as u16);
            }
        }
        out
    }

    pub fn height(&self) -> usize {
        self.data.nrows()
    }

    pub fn width(&self) -> usize {
        self.data.ncols()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[(row, col)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.data
    }

    /// True when every pixel is exactly 0 or 1 (a bilevel mask image).
    pub fn is_binary(&self) -> bool {
        self.data.iter().all(|&v| v == 0.0 || v == 1.0)
    }
}
