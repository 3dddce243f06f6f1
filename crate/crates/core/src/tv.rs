//! Weighted anisotropic total variation and its first-difference operator.
//!
//! The TV of a stack `X` (`m*n x p`, columns are vectorized `m x n` frames)
//! sums absolute first differences along image rows, image columns, and
//! frames. Each difference carries a 0/1 weight; a weight is 1 only when
//! both endpoint pixels are observed, so differences touching unobserved
//! canvas pixels are dropped.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// 0/1 indicator weights for first differences along x (image rows),
/// y (image columns), and z (frames).
#[derive(Debug, Clone, PartialEq)]
pub struct TvWeights {
    m: usize,
    n: usize,
    p: usize,
    wx: Vec<f64>,
    wy: Vec<f64>,
    wz: Vec<f64>,
}

impl TvWeights {
    /// All differences active (fully observed stack).
    pub fn all_ones(m: usize, n: usize, p: usize) -> Self {
        Self {
            m,
            n,
            p,
            wx: vec![1.0; (m.saturating_sub(1)) * n * p],
            wy: vec![1.0; m * (n.saturating_sub(1)) * p],
            wz: vec![1.0; m * n * (p.saturating_sub(1))],
        }
    }

    /// Derives weights from an observation mask (`m*n x p`, 0/1 entries):
    /// a difference weight is 1 only if both endpoints are observed.
    pub fn from_mask(m: usize, n: usize, mask: &DMatrix<f64>) -> Result<Self> {
        if mask.nrows() != m * n {
            return Err(Error::DimensionMismatch {
                context: "TvWeights::from_mask",
                expected: format!("{} rows", m * n),
                got: format!("{}", mask.nrows()),
            });
        }
        let p = mask.ncols();
        let at = |i: usize, j: usize, k: usize| mask[(i + m * j, k)];
        let mut w = Self::all_ones(m, n, p);
        for k in 0..p {
            for j in 0..n {
                for i in 0..m.saturating_sub(1) {
                    w.wx[i + (m - 1) * (j + n * k)] = at(i, j, k) * at(i + 1, j, k);
                }
            }
        }
        for k in 0..p {
            for j in 0..n.saturating_sub(1) {
                for i in 0..m {
                    w.wy[i + m * (j + (n - 1) * k)] = at(i, j, k) * at(i, j + 1, k);
                }
            }
        }
        for k in 0..p.saturating_sub(1) {
            for j in 0..n {
                for i in 0..m {
                    w.wz[i + m * (j + n * k)] = at(i, j, k) * at(i, j, k + 1);
                }
            }
        }
        Ok(w)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn wx(&self, i: usize, j: usize, k: usize) -> f64 {
        self.wx[i + (self.m - 1) * (j + self.n * k)]
    }

    pub fn wy(&self, i: usize, j: usize, k: usize) -> f64 {
        self.wy[i + self.m * (j + (self.n - 1) * k)]
    }

    pub fn wz(&self, i: usize, j: usize, k: usize) -> f64 {
        self.wz[i + self.m * (j + self.n * k)]
    }

    pub fn all_zero(&self) -> bool {
        self.wx.iter().chain(&self.wy).chain(&self.wz).all(|&w| w == 0.0)
    }

    pub fn all_one(&self) -> bool {
        self.wx.iter().chain(&self.wy).chain(&self.wz).all(|&w| w == 1.0)
    }
}

/// Weighted anisotropic TV of a stack: the sum of weighted absolute first
/// differences along rows, columns, and frames.
pub fn tv_value(x: &DMatrix<f64>, w: &TvWeights) -> Result<f64> {
    let (m, n, p) = (w.m, w.n, w.p);
    if x.nrows() != m * n || x.ncols() != p {
        return Err(Error::DimensionMismatch {
            context: "tv_value",
            expected: format!("{}x{}", m * n, p),
            got: format!("{}x{}", x.nrows(), x.ncols()),
        });
    }
    let at = |i: usize, j: usize, k: usize| x[(i + m * j, k)];
    let mut total = 0.0;
    for k in 0..p {
        for j in 0..n {
            for i in 0..m.saturating_sub(1) {
                total += w.wx(i, j, k) * (at(i + 1, j, k) - at(i, j, k)).abs();
            }
        }
    }
    for k in 0..p {
        for j in 0..n.saturating_sub(1) {
            for i in 0..m {
                total += w.wy(i, j, k) * (at(i, j + 1, k) - at(i, j, k)).abs();
            }
        }
    }
    for k in 0..p.saturating_sub(1) {
        for j in 0..n {
            for i in 0..m {
                total += w.wz(i, j, k) * (at(i, j, k + 1) - at(i, j, k)).abs();
            }
        }
    }
    Ok(total)
}

/// Boundary handling for the difference operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    /// Out-of-range differences are omitted (the weighted-TV convention).
    Drop,
    /// Differences wrap around each axis; valid only for fully observed
    /// stacks. Makes the normal matrix circulant so an FFT solve applies.
    Circulant,
}

/// Sparse first-difference operator. Each row computes `x[plus] - x[minus]`
/// for one active (weight-1) difference; zero-weight rows are not stored
/// because every use multiplies by the weight diagonal first.
#[derive(Debug, Clone)]
pub struct DiffOp {
    m: usize,
    n: usize,
    p: usize,
    boundary: Boundary,
    plus: Vec<u32>,
    minus: Vec<u32>,
}

impl DiffOp {
    /// Builds the weighted difference operator with drop boundaries.
    pub fn new(w: &TvWeights) -> Self {
        let (m, n, p) = (w.m, w.n, w.p);
        let idx = |i: usize, j: usize, k: usize| (i + m * j + m * n * k) as u32;
        let mut plus = Vec::new();
        let mut minus = Vec::new();
        for k in 0..p {
            for j in 0..n {
                for i in 0..m.saturating_sub(1) {
                    if w.wx(i, j, k) == 1.0 {
                        plus.push(idx(i + 1, j, k));
                        minus.push(idx(i, j, k));
                    }
                }
            }
        }
        for k in 0..p {
            for j in 0..n.saturating_sub(1) {
                for i in 0..m {
                    if w.wy(i, j, k) == 1.0 {
                        plus.push(idx(i, j + 1, k));
                        minus.push(idx(i, j, k));
                    }
                }
            }
        }
        for k in 0..p.saturating_sub(1) {
            for j in 0..n {
                for i in 0..m {
                    if w.wz(i, j, k) == 1.0 {
                        plus.push(idx(i, j, k + 1));
                        minus.push(idx(i, j, k));
                    }
                }
            }
        }
        Self {
            m,
            n,
            p,
            boundary: Boundary::Drop,
            plus,
            minus,
        }
    }

    /// Builds the circulant-boundary operator (all weights 1, differences
    /// wrap around each axis). Axes of extent 1 contribute no rows.
    pub fn circulant(m: usize, n: usize, p: usize) -> Self {
        let idx = |i: usize, j: usize, k: usize| (i + m * j + m * n * k) as u32;
        let mut plus = Vec::new();
        let mut minus = Vec::new();
        if m > 1 {
            for k in 0..p {
                for j in 0..n {
                    for i in 0..m {
                        plus.push(idx((i + 1) % m, j, k));
                        minus.push(idx(i, j, k));
                    }
                }
            }
        }
        if n > 1 {
            for k in 0..p {
                for j in 0..n {
                    for i in 0..m {
                        plus.push(idx(i, (j + 1) % n, k));
                        minus.push(idx(i, j, k));
                    }
                }
            }
        }
        if p > 1 {
            for k in 0..p {
                for j in 0..n {
                    for i in 0..m {
                        plus.push(idx(i, j, (k + 1) % p));
                        minus.push(idx(i, j, k));
                    }
                }
            }
        }
        Self {
            m,
            n,
            p,
            boundary: Boundary::Circulant,
            plus,
            minus,
        }
    }

    pub fn nrows(&self) -> usize {
        self.plus.len()
    }

    /// Length of the vectorized stack the operator acts on.
    pub fn ndim(&self) -> usize {
        self.m * self.n * self.p
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.m, self.n, self.p)
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    /// `out = C x` (active rows only).
    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.ndim());
        debug_assert_eq!(out.len(), self.nrows());
        for r in 0..self.plus.len() {
            out[r] = x[self.plus[r] as usize] - x[self.minus[r] as usize];
        }
    }

    /// `out = C^T d` (accumulating scatter; `out` is overwritten).
    pub fn apply_transpose(&self, d: &[f64], out: &mut [f64]) {
        debug_assert_eq!(d.len(), self.nrows());
        debug_assert_eq!(out.len(), self.ndim());
        out.fill(0.0);
        for r in 0..self.plus.len() {
            out[self.plus[r] as usize] += d[r];
            out[self.minus[r] as usize] -= d[r];
        }
    }

    /// `out = x + rho * C^T C x`, the normal operator of the ADMM x-update.
    pub fn normal_apply(&self, rho: f64, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.ndim());
        debug_assert_eq!(out.len(), self.ndim());
        out.copy_from_slice(x);
        for r in 0..self.plus.len() {
            let d = rho * (x[self.plus[r] as usize] - x[self.minus[r] as usize]);
            out[self.plus[r] as usize] += d;
            out[self.minus[r] as usize] -= d;
        }
    }

    /// `sum_r |(C x)_r|`; with drop boundaries this equals the weighted TV.
    pub fn l1_of_apply(&self, x: &[f64]) -> f64 {
        let mut total = 0.0;
        for r in 0..self.plus.len() {
            total += (x[self.plus[r] as usize] - x[self.minus[r] as usize]).abs();
        }
        total
    }
}
