//! Direct linear transform estimation of a homography.
//!
//! Stacks two linear constraints per correspondence into `A` and takes the
//! smallest right singular vector of `A` as vec(H), scaled so the last
//! component is 1. The least-squares system is formed on centered, scaled
//! coordinates for conditioning and the result is mapped back afterwards;
//! the returned map is expressed in the original pixel coordinates.

use nalgebra::{Matrix3, SMatrix, SVector};

use crate::error::{Error, Result};
use crate::registration::{Correspondence, Homography};

/// Relative gap between the two smallest singular values of `A` below
/// which the correspondence set is declared degenerate.
const DEGENERACY_GAP: f64 = 1e-10;

/// Minimum mean point spread accepted by the conditioning transform.
const MIN_SPREAD: f64 = 1e-12;

/// Similarity that centers a point cloud and scales its mean distance from
/// the origin to sqrt(2). Expressed in the transpose-acting convention, so
/// it is itself a homography matrix.
fn conditioning_transform(points: impl Iterator<Item = (f64, f64)> + Clone) -> Result<Matrix3<f64>> {
    let mut cx = 0.0;
    let mut cy = 0.0;
    let mut count = 0.0;
    for (x, y) in points.clone() {
        cx += x;
        cy += y;
        count += 1.0;
    }
    cx /= count;
    cy /= count;
    let mut dist = 0.0;
    for (x, y) in points {
        dist += ((x - cx).powi(2) + (y - cy).powi(2)).sqrt();
    }
    dist /= count;
    if dist < MIN_SPREAD {
        return Err(Error::DegenerateConfiguration);
    }
    let s = std::f64::consts::SQRT_2 / dist;
    let mut t = Matrix3::identity();
    t[(0, 0)] = s;
    t[(1, 1)] = s;
    t[(2, 0)] = -s * cx;
    t[(2, 1)] = -s * cy;
    Ok(t)
}

fn apply_affine(t: &Matrix3<f64>, p: (f64, f64)) -> (f64, f64) {
    (
        t[(0, 0)] * p.0 + t[(2, 0)],
        t[(1, 1)] * p.1 + t[(2, 1)],
    )
}

/// Fits a homography to at least four correspondences by minimizing
/// `||A h||` over unit vec(H), then rescaling so `h_9 = 1`.
pub fn estimate_homography_dlt(corrs: &[Correspondence]) -> Result<Homography> {
    if corrs.len() < 4 {
        return Err(Error::NotEnoughCorrespondences {
            needed: 4,
            got: corrs.len(),
        });
    }
    for c in corrs {
        if ![c.source.0, c.source.1, c.target.0, c.target.1]
            .iter()
            .all(|v| v.is_finite())
        {
            return Err(Error::NonFinite("correspondence coordinates"));
        }
    }

    let t_src = conditioning_transform(corrs.iter().map(|c| c.source))?;
    let t_tgt = conditioning_transform(corrs.iter().map(|c| c.target))?;

    // normal matrix A^T A of the stacked constraints, on conditioned points
    let mut gram: SMatrix<f64, 9, 9> = SMatrix::zeros();
    for c in corrs {
        let (x, y) = apply_affine(&t_src, c.source);
        let (tx, ty) = apply_affine(&t_tgt, c.target);
        let rows = [
            [x, y, 1.0, 0.0, 0.0, 0.0, -tx * x, -tx * y, -tx],
            [0.0, 0.0, 0.0, x, y, 1.0, -ty * x, -ty * y, -ty],
        ];
        for row in rows {
            let a = SVector::<f64, 9>::from_row_slice(&row);
            gram += a * a.transpose();
        }
    }

    let eig = gram.symmetric_eigen();
    let mut order: Vec<usize> = (0..9).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[a]
            .partial_cmp(&eig.eigenvalues[b])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let sigma = |i: usize| eig.eigenvalues[order[i]].max(0.0).sqrt();
    let largest = sigma(8);
    if (sigma(1) - sigma(0)).abs() < DEGENERACY_GAP * largest || largest == 0.0 {
        return Err(Error::DegenerateConfiguration);
    }

    let h_vec = eig.eigenvectors.column(order[0]);
    // vec(H) stacks the columns of H
    let h_cond = Matrix3::from_column_slice(h_vec.as_slice());

    let t_tgt_inv = t_tgt
        .try_inverse()
        .ok_or(Error::SingularHomography { det: 0.0 })?;
    Homography::new(t_src * h_cond * t_tgt_inv)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exact_corrs(h: &Homography, points: &[(f64, f64)]) -> Vec<Correspondence> {
        points
            .iter()
            .map(|&p| Correspondence {
                source: p,
                target: h.apply(p).unwrap(),
            })
            .collect()
    }

    #[test]
    fn identity_from_four_points() {
        let h = Homography::identity();
        let corrs = exact_corrs(&h, &[(0.0, 0.0), (10.0, 0.0), (0.0, 10.0), (10.0, 10.0)]);
        let est = estimate_homography_dlt(&corrs).unwrap();
        for (a, b) in est.to_row_major().iter().zip(h.to_row_major()) {
            assert!((a - b).abs() < 1e-8, "got {:?}", est.to_row_major());
        }
    }

    #[test]
    fn recovers_random_homography_from_twenty_points() {
        let truth = Homography::from_row_major(&[
            1.05, 0.08, 2e-4, -0.06, 0.93, -1e-4, 6.0, -3.0, 1.0,
        ])
        .unwrap();
        let mut points = Vec::new();
        for i in 0..5 {
            for j in 0..4 {
                points.push((7.0 + 13.0 * i as f64, 3.0 + 11.0 * j as f64));
            }
        }
        let corrs = exact_corrs(&truth, &points);
        let est = estimate_homography_dlt(&corrs).unwrap();
        for (a, b) in est.to_row_major().iter().zip(truth.to_row_major()) {
            assert!((a - b).abs() < 1e-6, "entry error {}", (a - b).abs());
        }
    }

    #[test]
    fn collinear_sources_are_degenerate() {
        let corrs: Vec<Correspondence> = (0..6)
            .map(|i| Correspondence {
                source: (i as f64, 2.0 * i as f64),
                target: (i as f64 + 1.0, 2.0 * i as f64 - 3.0),
            })
            .collect();
        assert!(matches!(
            estimate_homography_dlt(&corrs),
            Err(Error::DegenerateConfiguration)
        ));
    }

    #[test]
    fn too_few_correspondences() {
        let corrs = vec![
            Correspondence {
                source: (0.0, 0.0),
                target: (0.0, 0.0)
            };
            3
        ];
        assert!(matches!(
            estimate_homography_dlt(&corrs),
            Err(Error::NotEnoughCorrespondences { needed: 4, got: 3 })
        ));
    }

    #[test]
    fn coincident_points_are_degenerate() {
        let corrs = vec![
            Correspondence {
                source: (5.0, 5.0),
                target: (1.0, 2.0)
            };
            8
        ];
        assert!(matches!(
            estimate_homography_dlt(&corrs),
            Err(Error::DegenerateConfiguration)
        ));
    }

    #[test]
    fn scaling_coordinates_conjugates_the_estimate() {
        // fitting on s-scaled coordinates must give D_s^-1 H^T D_s = H'^T
        let truth = Homography::from_row_major(&[
            0.98, -0.05, 1e-4, 0.04, 1.02, -2e-4, 2.0, 5.0, 1.0,
        ])
        .unwrap();
        let points: Vec<(f64, f64)> = (0..8)
            .map(|i| (3.0 + 17.0 * (i % 4) as f64, 2.0 + 9.0 * (i / 4) as f64 + i as f64))
            .collect();
        let corrs = exact_corrs(&truth, &points);
        let s = 3.5;
        let scaled: Vec<Correspondence> = corrs
            .iter()
            .map(|c| Correspondence {
                source: (s * c.source.0, s * c.source.1),
                target: (s * c.target.0, s * c.target.1),
            })
            .collect();
        let base = estimate_homography_dlt(&corrs).unwrap();
        let scaled_fit = estimate_homography_dlt(&scaled).unwrap();
        // compare actions instead of raw entries
        for &p in &[(4.0, 7.0), (30.0, 11.0)] {
            let q = base.apply(p).unwrap();
            let q_scaled = scaled_fit.apply((s * p.0, s * p.1)).unwrap();
            assert!((q_scaled.0 - s * q.0).abs() < 1e-6);
            assert!((q_scaled.1 - s * q.1).abs() < 1e-6);
        }
    }
}
