//! The outer masked proximal-gradient loop.
//!
//! Minimizes, over the decomposition `(L, S1, S2)` of a registered stack,
//!
//! ```text
//! 0.5 ||P_M(Y - L - S1 - S2)||_F^2  +  (low-rank penalty on L)
//!     + lambda_sparse ||S1||_1  +  lambda_tv TV(S2)
//! ```
//!
//! by alternating one masked gradient step shared across the three blocks
//! with each block's proximal (or OptShrink) update. `U` is formed from
//! the current iterates and all blocks step against that same `U`. The
//! low-rank update is either OptShrink at a fixed rank (default) or
//! singular-value thresholding; in SVT mode the scheme is a true proximal
//! gradient on the objective above, and with `step <= 1/3` (the joint
//! data-fit gradient is 3-Lipschitz across the blocks) the objective is
//! non-increasing.
//!
//! A zero `lambda_sparse` or `lambda_tv` disables its block entirely: the
//! component stays identically zero instead of turning into an
//! unregularized free variable.

use std::time::Instant;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optshrink::{optshrink, svt};
use crate::stack::{Decomposition, FrameStack};
use crate::svd::nuclear_norm;
use crate::tv::{tv_value, TvWeights};
use crate::tvprox::{AdmmConfig, TvDenoiser};

/// Low-rank update rule for the `L` block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LowRankMode {
    /// OptShrink at the configured rank (the default).
    OptShrink,
    /// Singular-value thresholding at `step * lambda_nuclear`; the plain
    /// robust-PCA baseline.
    Svt { lambda_nuclear: f64 },
}

impl LowRankMode {
    /// SVT with the standard robust-PCA scaling `1/sqrt(max(rows, cols))`.
    pub fn svt_default(rows: usize, cols: usize) -> Self {
        Self::Svt {
            lambda_nuclear: 1.0 / (rows.max(cols) as f64).sqrt(),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Gradient step size `tau`.
    pub step: f64,
    /// Target rank for the OptShrink update.
    pub rank: usize,
    /// Weight of the `||S1||_1` sparsity penalty.
    pub lambda_sparse: f64,
    /// Weight of the TV penalty on `S2`.
    pub lambda_tv: f64,
    pub max_iter: usize,
    /// Stop when the largest relative block change drops below this.
    pub rel_tol: f64,
    pub low_rank_mode: LowRankMode,
    /// Inner ADMM settings for the TV proximal step.
    pub admm: AdmmConfig,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            step: 0.33,
            rank: 1,
            lambda_sparse: 0.001,
            lambda_tv: 0.001,
            max_iter: 200,
            rel_tol: 1e-4,
            low_rank_mode: LowRankMode::OptShrink,
            admm: AdmmConfig::default(),
        }
    }
}

impl SolverConfig {
    fn validate(&self) -> Result<()> {
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "step must be positive, got {}",
                self.step
            )));
        }
        if self.lambda_sparse < 0.0 || self.lambda_tv < 0.0 {
            return Err(Error::InvalidConfig("penalty weights must be nonnegative".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidConfig("max_iter must be at least 1".into()));
        }
        if !(self.rel_tol > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "rel_tol must be positive, got {}",
                self.rel_tol
            )));
        }
        if self.rank == 0 {
            return Err(Error::InvalidConfig("rank must be at least 1".into()));
        }
        if let LowRankMode::Svt { lambda_nuclear } = self.low_rank_mode {
            if lambda_nuclear < 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "nuclear weight must be nonnegative, got {lambda_nuclear}"
                )));
            }
        }
        Ok(())
    }
}

/// Element-wise shrinkage `sign(z) (|z| - lambda)_+`.
pub fn soft_threshold(z: &DMatrix<f64>, lambda: f64) -> DMatrix<f64> {
    debug_assert!(lambda >= 0.0);
    z.map(|v| v.signum() * (v.abs() - lambda).max(0.0))
}

/// One iteration's worth of diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// `||P_M(Y - L - S1 - S2)||_F` after the iteration's updates.
    pub data_fit: f64,
    /// `0.5 data_fit^2 + lambda_sparse ||S1||_1 + lambda_tv TV(S2)`. The
    /// nuclear norm is reported separately because the OptShrink update is
    /// not the proximal map of a nuclear-norm penalty.
    pub objective: f64,
    /// `||L||_*` after the update.
    pub nuclear_norm: f64,
    /// Largest relative change among the three blocks.
    pub delta: f64,
    pub elapsed_ms: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolverTrace {
    pub iterations: Vec<IterationRecord>,
    pub converged: bool,
}

impl SolverTrace {
    /// Full objective value at iteration `i` in SVT mode, with the nuclear
    /// term folded back in at the given weight.
    pub fn full_objective(&self, i: usize, lambda_nuclear: f64) -> f64 {
        let rec = &self.iterations[i];
        rec.objective + lambda_nuclear * rec.nuclear_norm
    }
}

/// Term-by-term value of the decomposition objective, with the nuclear
/// norm of `L` kept out of `total` and reported on its own.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ObjectiveBreakdown {
    /// `||P_M(Y - L - S1 - S2)||_F` (unsquared).
    pub data_fit: f64,
    /// `||S1||_1`, unweighted.
    pub sparse_l1: f64,
    /// `TV(S2)` with the mask-derived weights, unweighted.
    pub tv: f64,
    /// `0.5 data_fit^2 + lambda_sparse sparse_l1 + lambda_tv tv`.
    pub total: f64,
    /// `||L||_*`.
    pub nuclear_norm: f64,
}

/// Evaluates the objective for an arbitrary decomposition of the stack.
pub fn surrogate_objective(
    stack: &FrameStack,
    d: &Decomposition,
    cfg: &SolverConfig,
) -> Result<ObjectiveBreakdown> {
    let y = stack.data();
    if d.low_rank.shape() != y.shape()
        || d.sparse.shape() != y.shape()
        || d.smooth.shape() != y.shape()
    {
        return Err(Error::DimensionMismatch {
            context: "surrogate_objective",
            expected: format!("{}x{}", y.nrows(), y.ncols()),
            got: format!(
                "L {}x{}, S1 {}x{}, S2 {}x{}",
                d.low_rank.nrows(),
                d.low_rank.ncols(),
                d.sparse.nrows(),
                d.sparse.ncols(),
                d.smooth.nrows(),
                d.smooth.ncols()
            ),
        });
    }
    let mask = stack.mask();
    let mut fit2 = 0.0;
    for i in 0..y.nrows() {
        for j in 0..y.ncols() {
            if mask[(i, j)] == 1.0 {
                let r = y[(i, j)] - d.low_rank[(i, j)] - d.sparse[(i, j)] - d.smooth[(i, j)];
                fit2 += r * r;
            }
        }
    }
    let weights = TvWeights::from_mask(stack.canvas_height(), stack.canvas_width(), mask)?;
    let sparse_l1: f64 = d.sparse.iter().map(|v| v.abs()).sum();
    let tv = tv_value(&d.smooth, &weights)?;
    Ok(ObjectiveBreakdown {
        data_fit: fit2.sqrt(),
        sparse_l1,
        tv,
        total: 0.5 * fit2 + cfg.lambda_sparse * sparse_l1 + cfg.lambda_tv * tv,
        nuclear_norm: nuclear_norm(&d.low_rank)?,
    })
}

fn relative_change(next: &DMatrix<f64>, prev: &DMatrix<f64>) -> f64 {
    let diff = (next - prev).norm();
    if diff == 0.0 {
        0.0
    } else {
        diff / prev.norm().max(1e-12)
    }
}

/// Runs the decomposition loop on a registered stack.
///
/// Initialization: `L = Y`, `S1 = S2 = 0`. Each iteration forms
/// `U = P_M(L + S1 + S2 - Y)` once and updates the three blocks from it.
/// Stops when the largest relative block change falls below `rel_tol`.
pub fn decompose(stack: &FrameStack, cfg: &SolverConfig) -> Result<(Decomposition, SolverTrace)> {
    let (dec, trace) = decompose_traced(stack, cfg);
    Ok((dec?, trace))
}

/// Variant of [`decompose`] that hands back the iteration records collected
/// before a failure, so divergence diagnostics can still be persisted.
pub fn decompose_traced(
    stack: &FrameStack,
    cfg: &SolverConfig,
) -> (Result<Decomposition>, SolverTrace) {
    let mut trace = SolverTrace {
        iterations: Vec::new(),
        converged: false,
    };
    let dec = solve_into(stack, cfg, &mut trace);
    (dec, trace)
}

fn solve_into(
    stack: &FrameStack,
    cfg: &SolverConfig,
    trace: &mut SolverTrace,
) -> Result<Decomposition> {
    cfg.validate()?;
    let y = stack.data();
    let mask = stack.mask();
    let (rows, cols) = y.shape();
    let tau = cfg.step;

    let weights = TvWeights::from_mask(stack.canvas_height(), stack.canvas_width(), mask)?;
    let mut denoiser = TvDenoiser::from_weights(&weights, cfg.admm)?;

    let mut l = y.clone();
    let mut s1 = DMatrix::zeros(rows, cols);
    let mut s2 = DMatrix::zeros(rows, cols);
    let mut u = DMatrix::zeros(rows, cols);

    // in SVT mode the TV step is safeguarded so its inexact (ADMM) prox
    // cannot break the monotone descent the mode guarantees
    let safeguard = matches!(cfg.low_rank_mode, LowRankMode::Svt { .. });

    let start = Instant::now();
    for iteration in 0..cfg.max_iter {
        // U = P_M(L + S1 + S2 - Y); exact zeros off the mask
        for j in 0..cols {
            for i in 0..rows {
                u[(i, j)] = if mask[(i, j)] == 1.0 {
                    l[(i, j)] + s1[(i, j)] + s2[(i, j)] - y[(i, j)]
                } else {
                    0.0
                };
            }
        }

        let l_arg = &l - tau * &u;
        let l_next = match cfg.low_rank_mode {
            LowRankMode::OptShrink => optshrink(&l_arg, cfg.rank)?,
            LowRankMode::Svt { lambda_nuclear } => svt(&l_arg, tau * lambda_nuclear)?,
        };

        let s1_next = if cfg.lambda_sparse == 0.0 {
            DMatrix::zeros(rows, cols)
        } else {
            soft_threshold(&(&s1 - tau * &u), tau * cfg.lambda_sparse)
        };

        let s2_next = if cfg.lambda_tv == 0.0 {
            DMatrix::zeros(rows, cols)
        } else {
            let s2_arg = &s2 - tau * &u;
            let candidate = denoiser.prox(&s2_arg, tau * cfg.lambda_tv)?;
            if safeguard {
                // accept only if the prox subproblem value did not get worse
                // than staying put
                let value = |s: &DMatrix<f64>| -> Result<f64> {
                    Ok((s - &s2_arg).norm_squared() / (2.0 * tau)
                        + cfg.lambda_tv * tv_value(s, &weights)?)
                };
                if value(&candidate)? <= value(&s2)? {
                    candidate
                } else {
                    s2.clone()
                }
            } else {
                candidate
            }
        };

        if !(l_next.iter().all(|v| v.is_finite())
            && s1_next.iter().all(|v| v.is_finite())
            && s2_next.iter().all(|v| v.is_finite()))
        {
            return Err(Error::Diverged { iteration });
        }

        let delta = relative_change(&l_next, &l)
            .max(relative_change(&s1_next, &s1))
            .max(relative_change(&s2_next, &s2));
        l = l_next;
        s1 = s1_next;
        s2 = s2_next;

        let d = Decomposition {
            low_rank: l.clone(),
            sparse: s1.clone(),
            smooth: s2.clone(),
        };
        let obj = surrogate_objective(stack, &d, cfg)?;
        trace.iterations.push(IterationRecord {
            iteration,
            data_fit: obj.data_fit,
            objective: obj.total,
            nuclear_norm: obj.nuclear_norm,
            delta,
            elapsed_ms: start.elapsed().as_secs_f64() * 1e3,
        });

        if delta < cfg.rel_tol {
            trace.converged = true;
            break;
        }
    }

    Ok(Decomposition {
        low_rank: l,
        sparse: s1,
        smooth: s2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn full_stack(data: DMatrix<f64>, m: usize, n: usize) -> FrameStack {
        let mask = DMatrix::from_element(data.nrows(), data.ncols(), 1.0);
        FrameStack::new(m, n, data, mask).unwrap()
    }

    #[test]
    fn soft_threshold_examples() {
        let z = DMatrix::from_row_slice(1, 3, &[-3.0, 0.3, 2.0]);
        let out = soft_threshold(&z, 1.0);
        assert_eq!(out[(0, 0)], -2.0);
        assert_eq!(out[(0, 1)], 0.0);
        assert_eq!(out[(0, 2)], 1.0);
        let half = soft_threshold(&DMatrix::from_element(1, 1, 0.3), 0.5);
        assert_eq!(half[(0, 0)], 0.0);
        assert_eq!(soft_threshold(&z, 0.0), z);
    }

    #[test]
    fn zero_stack_is_a_fixed_point() {
        let stack = full_stack(DMatrix::zeros(12, 3), 4, 3);
        let (d, trace) = decompose(&stack, &SolverConfig::default()).unwrap();
        assert_eq!(d.low_rank, DMatrix::zeros(12, 3));
        assert_eq!(d.sparse, DMatrix::zeros(12, 3));
        assert_eq!(d.smooth, DMatrix::zeros(12, 3));
        assert!(trace.converged);
        assert_eq!(trace.iterations.len(), 1);
    }

    #[test]
    fn static_rank_one_scene_lands_in_low_rank() {
        // identical frames, heavy S1/S2 penalties: everything goes to L
        let frame: Vec<f64> = (0..30).map(|i| 0.2 + 0.6 * ((i * 7 % 30) as f64 / 30.0)).collect();
        let mut data = DMatrix::zeros(30, 8);
        for k in 0..8 {
            data.column_mut(k).copy_from_slice(&frame);
        }
        let stack = full_stack(data, 6, 5);
        let cfg = SolverConfig {
            lambda_sparse: 10.0,
            lambda_tv: 10.0,
            max_iter: 100,
            ..SolverConfig::default()
        };
        let (d, _) = decompose(&stack, &cfg).unwrap();
        assert!(d.sparse.norm() < 1e-8, "S1 norm {}", d.sparse.norm());
        assert!(d.smooth.norm() < 1e-8, "S2 norm {}", d.smooth.norm());
        let fit = surrogate_objective(&stack, &d, &cfg).unwrap().data_fit;
        assert!(fit < 1e-3, "data fit {fit}");
    }

    #[test]
    fn objective_matches_naive_computation() {
        let y = DMatrix::from_fn(6, 2, |i, j| ((i * 3 + j * 5) % 7) as f64 / 7.0);
        let mask = DMatrix::from_fn(6, 2, |i, j| f64::from((i + j) % 4 != 0));
        let stack = FrameStack::new(3, 2, y.clone(), mask.clone()).unwrap();
        let d = Decomposition {
            low_rank: DMatrix::from_fn(6, 2, |i, j| 0.1 * (i as f64 - j as f64)),
            sparse: DMatrix::from_fn(6, 2, |i, j| if (i + j) % 3 == 0 { 0.2 } else { 0.0 }),
            smooth: DMatrix::from_fn(6, 2, |i, j| 0.05 * (i + j) as f64),
        };
        let cfg = SolverConfig::default();
        let got = surrogate_objective(&stack, &d, &cfg).unwrap();

        // naive re-evaluation
        let mut fit2 = 0.0;
        for i in 0..6 {
            for j in 0..2 {
                if mask[(i, j)] == 1.0 {
                    // the stack projects Y onto the mask at construction
                    fit2 += (stack.data()[(i, j)]
                        - d.low_rank[(i, j)]
                        - d.sparse[(i, j)]
                        - d.smooth[(i, j)])
                    .powi(2);
                }
            }
        }
        let l1: f64 = d.sparse.iter().map(|v| v.abs()).sum();
        let w = TvWeights::from_mask(3, 2, &mask).unwrap();
        let tv = tv_value(&d.smooth, &w).unwrap();
        let expect = 0.5 * fit2 + cfg.lambda_sparse * l1 + cfg.lambda_tv * tv;
        assert!((got.total - expect).abs() < 1e-12);
        assert!((got.data_fit - fit2.sqrt()).abs() < 1e-12);

        // trivial cases
        let zeros = Decomposition::zeros(6, 2);
        let all = surrogate_objective(&stack, &zeros, &cfg).unwrap();
        let masked_norm2: f64 = stack.data().norm_squared();
        assert!((all.total - 0.5 * masked_norm2).abs() < 1e-12);
    }

    #[test]
    fn masked_entries_stay_zero_in_u_and_sparse() {
        // unobserved pixels can never enter S1: its update only sees P_M
        let y = DMatrix::from_fn(8, 4, |i, j| ((i + 2 * j) % 5) as f64 / 5.0);
        let mask = DMatrix::from_fn(8, 4, |i, j| f64::from((i * 3 + j) % 5 != 0));
        let stack = FrameStack::new(4, 2, y, mask.clone()).unwrap();
        let cfg = SolverConfig {
            max_iter: 20,
            ..SolverConfig::default()
        };
        let (d, _) = decompose(&stack, &cfg).unwrap();
        for i in 0..8 {
            for j in 0..4 {
                if mask[(i, j)] == 0.0 {
                    assert_eq!(d.sparse[(i, j)], 0.0, "S1 leaked at ({i},{j})");
                }
            }
        }
    }

    #[test]
    fn disabled_blocks_stay_zero() {
        let y = DMatrix::from_fn(12, 4, |i, j| ((i * j + 3) % 9) as f64 / 9.0);
        let stack = full_stack(y, 4, 3);
        let cfg = SolverConfig {
            lambda_sparse: 0.0,
            lambda_tv: 0.0,
            max_iter: 15,
            ..SolverConfig::default()
        };
        let (d, _) = decompose(&stack, &cfg).unwrap();
        assert_eq!(d.sparse, DMatrix::zeros(12, 4));
        assert_eq!(d.smooth, DMatrix::zeros(12, 4));
    }

    #[test]
    fn optshrink_mode_keeps_rank_bounded() {
        let y = DMatrix::from_fn(20, 6, |i, j| ((i * 5 + j * 11) % 13) as f64 / 13.0);
        let stack = full_stack(y, 5, 4);
        let cfg = SolverConfig {
            rank: 2,
            max_iter: 10,
            ..SolverConfig::default()
        };
        let (d, _) = decompose(&stack, &cfg).unwrap();
        let svals = d.low_rank.svd(false, false).singular_values;
        for i in 2..svals.len() {
            assert!(svals[i] < 1e-8, "rank exceeded: sigma_{i} = {}", svals[i]);
        }
    }

    #[test]
    fn trace_records_every_iteration() {
        let y = DMatrix::from_fn(9, 3, |i, j| ((i + j) % 4) as f64 / 4.0);
        let stack = full_stack(y, 3, 3);
        let cfg = SolverConfig {
            max_iter: 7,
            rel_tol: 1e-15,
            ..SolverConfig::default()
        };
        let (_, trace) = decompose(&stack, &cfg).unwrap();
        assert_eq!(trace.iterations.len(), 7);
        assert!(!trace.converged);
        for (k, rec) in trace.iterations.iter().enumerate() {
            assert_eq!(rec.iteration, k);
            assert!(rec.data_fit.is_finite() && rec.objective.is_finite());
        }
    }

    #[test]
    fn rejects_invalid_configs() {
        let stack = full_stack(DMatrix::zeros(4, 2), 2, 2);
        for cfg in [
            SolverConfig {
                step: 0.0,
                ..SolverConfig::default()
            },
            SolverConfig {
                lambda_sparse: -1.0,
                ..SolverConfig::default()
            },
            SolverConfig {
                max_iter: 0,
                ..SolverConfig::default()
            },
            SolverConfig {
                rank: 0,
                ..SolverConfig::default()
            },
        ] {
            assert!(decompose(&stack, &cfg).is_err());
        }
    }
}
