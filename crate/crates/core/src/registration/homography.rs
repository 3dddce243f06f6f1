//! Planar projective transformations.
//!
//! A homography maps a point `p = (x, y, 1)` to the dehomogenized
//! `H^T p`, so the matrix composes on the right: applying `A` then `B`
//! multiplies as `A * B`. The bottom-right entry is pinned to 1, which
//! fixes the projective scale.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

/// Tolerance below which the third homogeneous coordinate counts as zero.
const INFINITY_TOL: f64 = 1e-12;

/// Tolerance on `|det H|` below which the map is rejected as singular.
const SINGULAR_TOL: f64 = 1e-12;

/// A 3x3 planar projective map with `H_33 = 1`, acting on points by
/// `(x, y) -> dehom(H^T (x, y, 1))`.
#[derive(Debug, Clone, PartialEq)]
pub struct Homography {
    h: Matrix3<f64>,
}

impl Homography {
    /// Normalizes the matrix to `H_33 = 1` and validates invertibility.
    pub fn new(h: Matrix3<f64>) -> Result<Self> {
        if h.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("homography entries"));
        }
        let h9 = h[(2, 2)];
        if h9.abs() < INFINITY_TOL {
            return Err(Error::NormalizationFailure { h9 });
        }
        let h = h / h9;
        let det = h.determinant();
        if !det.is_finite() || det.abs() < SINGULAR_TOL {
            return Err(Error::SingularHomography { det });
        }
        Ok(Self { h })
    }

    pub fn identity() -> Self {
        Self {
            h: Matrix3::identity(),
        }
    }

    /// Pure translation by `(tx, ty)`.
    pub fn translation(tx: f64, ty: f64) -> Self {
        let mut h = Matrix3::identity();
        h[(2, 0)] = tx;
        h[(2, 1)] = ty;
        Self { h }
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.h
    }

    /// Maps a point: `H^T (x, y, 1)` divided by its third coordinate.
    pub fn apply(&self, point: (f64, f64)) -> Result<(f64, f64)> {
        let (x, y) = point;
        let q = self.h.transpose() * Vector3::new(x, y, 1.0);
        if q[2].abs() < INFINITY_TOL {
            return Err(Error::PointAtInfinity { x, y });
        }
        Ok((q[0] / q[2], q[1] / q[2]))
    }

    pub fn inverse(&self) -> Result<Homography> {
        let inv = self
            .h
            .try_inverse()
            .ok_or(Error::SingularHomography { det: self.h.determinant() })?;
        Homography::new(inv)
    }

    /// Composition "apply `self`, then `other`", which is `self.h * other.h`
    /// in the transpose-acting convention.
    pub fn then(&self, other: &Homography) -> Result<Homography> {
        Homography::new(self.h * other.h)
    }

    /// Entries in row-major reading order.
    pub fn to_row_major(&self) -> [f64; 9] {
        let mut out = [0.0; 9];
        for r in 0..3 {
            for c in 0..3 {
                out[3 * r + c] = self.h[(r, c)];
            }
        }
        out
    }

    pub fn from_row_major(vals: &[f64; 9]) -> Result<Homography> {
        Homography::new(Matrix3::from_row_slice(vals))
    }
}
