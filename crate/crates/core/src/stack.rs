//! Stacked registered frames and the masked projection.
//!
//! A video of `p` registered frames on an `m x n` canvas is kept as the
//! matrix `Y` of size `m*n x p` whose column `k` is the column-major
//! vectorization of frame `k`, together with a binary mask `M` of the same
//! size marking which canvas pixels frame `k` actually observed.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::image::Image;

/// Registered frame stack: data matrix `Y` and observation mask `M`,
/// both `m*n x p`. Unobserved entries of `Y` are exactly zero.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameStack {
    canvas_height: usize,
    canvas_width: usize,
    data: DMatrix<f64>,
    mask: DMatrix<f64>,
}

impl FrameStack {
    /// Builds a stack from raw matrices. The data is projected onto the
    /// mask so the "unobserved entries are zero" invariant holds by
    /// construction.
    pub fn new(
        canvas_height: usize,
        canvas_width: usize,
        data: DMatrix<f64>,
        mask: DMatrix<f64>,
    ) -> Result<Self> {
        let mn = canvas_height * canvas_width;
        if mn == 0 || data.ncols() == 0 {
            return Err(Error::EmptyInput("frame stack must be non-empty"));
        }
        if data.nrows() != mn {
            return Err(Error::DimensionMismatch {
                context: "FrameStack::new",
                expected: format!("{mn} rows"),
                got: format!("{}", data.nrows()),
            });
        }
        if mask.shape() != data.shape() {
            return Err(Error::DimensionMismatch {
                context: "FrameStack::new",
                expected: format!("mask {}x{}", data.nrows(), data.ncols()),
                got: format!("mask {}x{}", mask.nrows(), mask.ncols()),
            });
        }
        for &v in mask.iter() {
            if v != 0.0 && v != 1.0 {
                return Err(Error::NonBinaryMask { found: v });
            }
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("frame stack data"));
        }
        let data = project_mask(&data, &mask)?;
        Ok(Self {
            canvas_height,
            canvas_width,
            data,
            mask,
        })
    }

    pub fn canvas_height(&self) -> usize {
        self.canvas_height
    }

    pub fn canvas_width(&self) -> usize {
        self.canvas_width
    }

    pub fn frame_count(&self) -> usize {
        self.data.ncols()
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn mask(&self) -> &DMatrix<f64> {
        &self.mask
    }

    /// Extracts column `k` back into an `m x n` image-shaped matrix.
    pub fn frame_matrix(&self, k: usize) -> DMatrix<f64> {
        unvec(
            self.data.column(k).as_slice(),
            self.canvas_height,
            self.canvas_width,
        )
    }

    /// Extracts column `k` of the mask as an `m x n` matrix.
    pub fn mask_matrix(&self, k: usize) -> DMatrix<f64> {
        unvec(
            self.mask.column(k).as_slice(),
            self.canvas_height,
            self.canvas_width,
        )
    }

    /// Replaces the data matrix, re-projecting onto the existing mask.
    pub fn with_data(&self, data: DMatrix<f64>) -> Result<Self> {
        Self::new(
            self.canvas_height,
            self.canvas_width,
            data,
            self.mask.clone(),
        )
    }
}

/// Reshapes a column-major slice into an `m x n` matrix.
pub fn unvec(slice: &[f64], m: usize, n: usize) -> DMatrix<f64> {
    DMatrix::from_column_slice(m, n, slice)
}

/// Orthogonal projection onto the observed support: keeps `x` where the
/// mask is 1 and zeroes it elsewhere.
pub fn project_mask(x: &DMatrix<f64>, mask: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if x.shape() != mask.shape() {
        return Err(Error::DimensionMismatch {
            context: "project_mask",
            expected: format!("{}x{}", x.nrows(), x.ncols()),
            got: format!("{}x{}", mask.nrows(), mask.ncols()),
        });
    }
    Ok(x.zip_map(mask, |v, m| if m == 1.0 { v } else { 0.0 }))
}

/// Stacks frames into a `FrameStack`. Column `k` of the data is the
/// column-major vectorization of frame `k` with unobserved pixels zeroed.
pub fn stack_frames(frames: &[Image], masks: &[Image]) -> Result<FrameStack> {
    if frames.is_empty() {
        return Err(Error::EmptyInput("stack_frames needs at least one frame"));
    }
    if masks.len() != frames.len() {
        return Err(Error::DimensionMismatch {
            context: "stack_frames",
            expected: format!("{} masks", frames.len()),
            got: format!("{}", masks.len()),
        });
    }
    let (h, w) = (frames[0].height(), frames[0].width());
    let mn = h * w;
    let p = frames.len();
    let mut data = DMatrix::zeros(mn, p);
    let mut mask = DMatrix::zeros(mn, p);
    for (k, (frame, fmask)) in frames.iter().zip(masks.iter()).enumerate() {
        if frame.height() != h || frame.width() != w || fmask.height() != h || fmask.width() != w {
            return Err(Error::DimensionMismatch {
                context: "stack_frames",
                expected: format!("{h}x{w}"),
                got: format!(
                    "frame {k}: {}x{} (mask {}x{})",
                    frame.height(),
                    frame.width(),
                    fmask.height(),
                    fmask.width()
                ),
            });
        }
        if !fmask.is_binary() {
            return Err(Error::NonBinaryMask {
                found: fmask
                    .as_matrix()
                    .iter()
                    .copied()
                    .find(|&v| v != 0.0 && v != 1.0)
                    .unwrap_or(f64::NAN),
            });
        }
        // column-major vectorization: nalgebra's storage order
        data.column_mut(k).copy_from_slice(frame.as_matrix().as_slice());
        mask.column_mut(k).copy_from_slice(fmask.as_matrix().as_slice());
    }
    FrameStack::new(h, w, data, mask)
}

/// The three-component decomposition of a frame stack: low-rank background,
/// sparse corruptions, and smooth foreground.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    /// Low-rank background `L`.
    pub low_rank: DMatrix<f64>,
    /// Sparse corruption component `S1`.
    pub sparse: DMatrix<f64>,
    /// TV-smooth foreground component `S2`.
    pub smooth: DMatrix<f64>,
}

impl Decomposition {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            low_rank: DMatrix::zeros(rows, cols),
            sparse: DMatrix::zeros(rows, cols),
            smooth: DMatrix::zeros(rows, cols),
        }
    }

    /// Reconstructed scene `L + S2` (background plus foreground, without
    /// the isolated corruptions).
    pub fn reconstruction(&self) -> DMatrix<f64> {
        &self.low_rank + &self.smooth
    }

    pub fn is_finite(&self) -> bool {
        self.low_rank.iter().all(|v| v.is_finite())
            && self.sparse.iter().all(|v| v.is_finite())
            && self.smooth.iter().all(|v| v.is_finite())
    }
}
