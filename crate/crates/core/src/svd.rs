//! Internal SVD helpers.
//!
//! Stacked video matrices are very tall and skinny (`m*n x p` with
//! `p` at most a few hundred), so the full spectrum is computed from the
//! `p x p` Gram matrix eigendecomposition instead of a dense SVD whenever
//! the aspect ratio warrants it. Both routes return singular values in
//! descending order.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Thin SVD `Z = U diag(sigma) V^T` with `q = min(rows, cols)` triplets.
/// Columns of `u` belonging to (near-)zero singular values are zero.
pub(crate) struct ThinSvd {
    pub u: DMatrix<f64>,
    pub v: DMatrix<f64>,
    pub sigma: Vec<f64>,
}

impl ThinSvd {
    /// Reconstructs `sum_i w_i u_i v_i^T` for the leading `w.len()` triplets.
    pub fn weighted_reconstruction(&self, weights: &[f64]) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.u.nrows(), self.v.nrows());
        for (i, &w) in weights.iter().enumerate() {
            if w != 0.0 {
                let ui = self.u.column(i);
                let vi = self.v.column(i);
                out.ger(w, &ui, &vi, 1.0);
            }
        }
        out
    }
}

const GRAM_ASPECT: usize = 2;

/// Relative cutoff below which a singular value is treated as zero when
/// forming left singular vectors in the Gram route.
const SIGMA_CUTOFF: f64 = 1e-12;

pub(crate) fn thin_svd(z: &DMatrix<f64>) -> Result<ThinSvd> {
    let (m, n) = z.shape();
    if m == 0 || n == 0 {
        return Err(Error::EmptyInput("svd of empty matrix"));
    }
    if m >= GRAM_ASPECT * n {
        gram_svd(z)
    } else if n >= GRAM_ASPECT * m {
        let t = gram_svd(&z.transpose())?;
        Ok(ThinSvd {
            u: t.v,
            v: t.u,
            sigma: t.sigma,
        })
    } else {
        direct_svd(z)
    }
}

fn direct_svd(z: &DMatrix<f64>) -> Result<ThinSvd> {
    let svd = z.clone().try_svd(true, true, f64::EPSILON, 0).ok_or(Error::SvdFailed)?;
    let u = svd.u.ok_or(Error::SvdFailed)?;
    let v_t = svd.v_t.ok_or(Error::SvdFailed)?;
    let sigma: Vec<f64> = svd.singular_values.iter().copied().collect();
    if sigma.iter().any(|s| !s.is_finite()) {
        return Err(Error::SvdFailed);
    }
    Ok(ThinSvd {
        u,
        v: v_t.transpose(),
        sigma,
    })
}

/// SVD of a tall matrix via the eigendecomposition of `Z^T Z`.
fn gram_svd(z: &DMatrix<f64>) -> Result<ThinSvd> {
    let n = z.ncols();
    let gram = z.transpose() * z;
    let eig = gram.symmetric_eigen();
    // an overflowing Gram product yields NaN eigenvalues, which would
    // otherwise be clamped into silent zeros below
    if eig.eigenvalues.iter().any(|l| !l.is_finite()) {
        return Err(Error::SvdFailed);
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });

    let mut sigma = Vec::with_capacity(n);
    let mut v = DMatrix::zeros(n, n);
    for (col, &src) in order.iter().enumerate() {
        sigma.push(eig.eigenvalues[src].max(0.0).sqrt());
        v.column_mut(col).copy_from(&eig.eigenvectors.column(src));
    }

    let cutoff = sigma.first().copied().unwrap_or(0.0) * SIGMA_CUTOFF;
    let mut u = DMatrix::zeros(z.nrows(), n);
    for i in 0..n {
        if sigma[i] > cutoff && sigma[i] > 0.0 {
            let zv = z * v.column(i);
            u.column_mut(i).copy_from(&(zv / sigma[i]));
        }
    }
    Ok(ThinSvd { u, v, sigma })
}

/// All singular values in descending order, without singular vectors.
pub(crate) fn singular_values(z: &DMatrix<f64>) -> Result<Vec<f64>> {
    let (m, n) = z.shape();
    if m >= GRAM_ASPECT * n || n >= GRAM_ASPECT * m {
        let gram = if m >= n {
            z.transpose() * z
        } else {
            z * z.transpose()
        };
        let eig = gram.symmetric_eigen();
        if eig.eigenvalues.iter().any(|l| !l.is_finite()) {
            return Err(Error::SvdFailed);
        }
        let mut vals: Vec<f64> = eig.eigenvalues.iter().map(|&l| l.max(0.0).sqrt()).collect();
        vals.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
        Ok(vals)
    } else {
        let svd = z.clone().try_svd(false, false, f64::EPSILON, 0).ok_or(Error::SvdFailed)?;
        let vals: Vec<f64> = svd.singular_values.iter().copied().collect();
        if vals.iter().any(|s| !s.is_finite()) {
            return Err(Error::SvdFailed);
        }
        Ok(vals)
    }
}

/// Sum of singular values.
pub(crate) fn nuclear_norm(z: &DMatrix<f64>) -> Result<f64> {
    Ok(singular_values(z)?.iter().sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reconstruction_error(z: &DMatrix<f64>, svd: &ThinSvd) -> f64 {
        let weights = svd.sigma.clone();
        let rec = svd.weighted_reconstruction(&weights);
        (z - rec).norm()
    }

    #[test]
    fn gram_route_matches_direct_route() {
        // 12x3 tall matrix: Gram route; compare against nalgebra's SVD.
        let z = DMatrix::from_fn(12, 3, |i, j| ((i * 7 + j * 3 + 1) as f64 * 0.37).sin());
        let gram = gram_svd(&z).unwrap();
        let direct = direct_svd(&z).unwrap();
        for i in 0..3 {
            assert!(
                (gram.sigma[i] - direct.sigma[i]).abs() < 1e-8,
                "sigma {i}: {} vs {}",
                gram.sigma[i],
                direct.sigma[i]
            );
        }
        let ge = reconstruction_error(&z, &gram);
        let de = reconstruction_error(&z, &direct);
        assert!(ge < 1e-8, "gram reconstruction error {ge:.3e}");
        assert!(de < 1e-8, "direct reconstruction error {de:.3e}");
    }

    #[test]
    fn wide_matrices_use_transposed_gram() {
        let z = DMatrix::from_fn(3, 14, |i, j| ((i * 5 + j * 11 + 2) as f64 * 0.21).cos());
        let svd = thin_svd(&z).unwrap();
        assert_eq!(svd.u.shape(), (3, 3));
        assert_eq!(svd.v.shape(), (14, 3));
        assert!(reconstruction_error(&z, &svd) < 1e-8);
    }

    #[test]
    fn singular_values_descending() {
        let z = DMatrix::from_fn(10, 4, |i, j| ((i + 2 * j) as f64).sqrt());
        let vals = singular_values(&z).unwrap();
        for i in 1..vals.len() {
            assert!(vals[i - 1] >= vals[i]);
        }
    }

    #[test]
    fn nuclear_norm_of_diagonal() {
        let z = DMatrix::from_partial_diagonal(4, 4, &[5.0, 3.0, 1.0]);
        assert!((nuclear_norm(&z).unwrap() - 9.0).abs() < 1e-10);
    }

    #[test]
    fn overflowing_gram_reports_failure() {
        // finite entries whose Gram product overflows to infinity
        let z = DMatrix::from_element(8, 2, 1e200);
        assert!(matches!(thin_svd(&z), Err(Error::SvdFailed)));
        assert!(matches!(singular_values(&z), Err(Error::SvdFailed)));
    }
}
