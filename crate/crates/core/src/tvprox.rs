//! Proximal operator of the weighted anisotropic TV, solved by ADMM.
//!
//! `tvdn` approximately minimizes `0.5||z - x||^2 + lambda ||W C x||_1` by
//! alternating an x-update (a regularized least-squares solve), a v-update
//! (soft thresholding), and a scaled dual ascent. The x-update normal
//! equations `(I + rho C^T C) x = z + rho C^T (v - u)` are solved by
//! conjugate gradient; for fully observed stacks with circulant boundaries
//! the normal operator diagonalizes under the 3D FFT and can be inverted
//! exactly in one pass.

use nalgebra::DMatrix;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::stack::unvec;
use crate::tv::{Boundary, DiffOp, TvWeights};

/// Inner solver for the ADMM x-update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum XSolver {
    #[default]
    ConjugateGradient,
    /// Exact solve via 3D FFT diagonalization. Requires a circulant
    /// difference operator (fully observed stack).
    Fft,
}

/// ADMM parameters for the TV proximal operator.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct AdmmConfig {
    /// Augmented Lagrangian penalty.
    pub rho: f64,
    /// Outer ADMM iteration cap.
    pub max_outer: usize,
    /// Relative primal/dual residual tolerance.
    pub tol: f64,
    /// Relative CG residual tolerance.
    pub cg_tol: f64,
    /// CG iteration cap per x-update.
    pub cg_max: usize,
    /// Keep (x, v, u) across calls to warm-start the next prox.
    pub warm_start: bool,
    pub x_solver: XSolver,
}

impl Default for AdmmConfig {
    fn default() -> Self {
        Self {
            rho: 1.0,
            max_outer: 50,
            tol: 1e-4,
            cg_tol: 1e-8,
            cg_max: 200,
            warm_start: true,
            x_solver: XSolver::ConjugateGradient,
        }
    }
}

impl AdmmConfig {
    fn validate(&self) -> Result<()> {
        if self.rho <= 0.0 || !self.rho.is_finite() {
            return Err(Error::InvalidConfig(format!("rho must be positive, got {}", self.rho)));
        }
        if self.tol <= 0.0 || self.cg_tol <= 0.0 {
            return Err(Error::InvalidConfig("tolerances must be positive".into()));
        }
        if self.max_outer == 0 || self.cg_max == 0 {
            return Err(Error::InvalidConfig("iteration caps must be at least 1".into()));
        }
        Ok(())
    }
}

/// Soft thresholding of `wcx + u` by `lambda / rho` (the ADMM v-update).
pub fn v_update(wcx: &[f64], u: &[f64], lambda: f64, rho: f64) -> Vec<f64> {
    let t = lambda / rho;
    wcx.iter()
        .zip(u)
        .map(|(&a, &b)| {
            let s = a + b;
            s.signum() * (s.abs() - t).max(0.0)
        })
        .collect()
}

/// Solves the x-update normal equations
/// `(I + rho C^T C) x = z + rho C^T (v - u)` by conjugate gradient,
/// starting from `z`. Exposed for testing against dense solves.
pub fn x_update(
    z: &[f64],
    v: &[f64],
    u: &[f64],
    rho: f64,
    op: &DiffOp,
    cfg: &AdmmConfig,
) -> Vec<f64> {
    let mut ws = Workspace::new(op.ndim(), op.nrows());
    let mut x = z.to_vec();
    build_rhs(z, v, u, rho, op, &mut ws);
    let rhs = ws.rhs.clone();
    cg_solve(op, rho, &rhs, &mut x, cfg.cg_tol, cfg.cg_max, &mut ws);
    x
}

struct Workspace {
    rhs: Vec<f64>,
    diff: Vec<f64>,
    resid: Vec<f64>,
    dir: Vec<f64>,
    adir: Vec<f64>,
}

impl Workspace {
    fn new(ndim: usize, nrows: usize) -> Self {
        Self {
            rhs: vec![0.0; ndim],
            diff: vec![0.0; nrows],
            resid: vec![0.0; ndim],
            dir: vec![0.0; ndim],
            adir: vec![0.0; ndim],
        }
    }
}

fn build_rhs(z: &[f64], v: &[f64], u: &[f64], rho: f64, op: &DiffOp, ws: &mut Workspace) {
    for (d, (&a, &b)) in ws.diff.iter_mut().zip(v.iter().zip(u)) {
        *d = a - b;
    }
    op.apply_transpose(&ws.diff, &mut ws.rhs);
    for (r, &zi) in ws.rhs.iter_mut().zip(z) {
        *r = zi + rho * *r;
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Returns (iterations, achieved relative residual).
fn cg_solve(
    op: &DiffOp,
    rho: f64,
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
    ws: &mut Workspace,
) -> (usize, f64) {
    let bnorm = dot(b, b).sqrt();
    if bnorm == 0.0 {
        x.fill(0.0);
        return (0, 0.0);
    }
    op.normal_apply(rho, x, &mut ws.adir);
    for i in 0..x.len() {
        ws.resid[i] = b[i] - ws.adir[i];
    }
    ws.dir.copy_from_slice(&ws.resid);
    let mut rs = dot(&ws.resid, &ws.resid);
    if rs.sqrt() <= tol * bnorm {
        return (0, rs.sqrt() / bnorm);
    }
    for iter in 1..=max_iter {
        op.normal_apply(rho, &ws.dir, &mut ws.adir);
        let alpha = rs / dot(&ws.dir, &ws.adir);
        for i in 0..x.len() {
            x[i] += alpha * ws.dir[i];
            ws.resid[i] -= alpha * ws.adir[i];
        }
        let rs_new = dot(&ws.resid, &ws.resid);
        if rs_new.sqrt() <= tol * bnorm {
            return (iter, rs_new.sqrt() / bnorm);
        }
        let beta = rs_new / rs;
        rs = rs_new;
        for i in 0..x.len() {
            ws.dir[i] = ws.resid[i] + beta * ws.dir[i];
        }
    }
    let achieved = rs.sqrt() / bnorm;
    log::warn!("CG reached max iterations ({max_iter}); relative residual {achieved:.3e}");
    (max_iter, achieved)
}

struct FftPlan {
    fwd: [Arc<dyn Fft<f64>>; 3],
    inv: [Arc<dyn Fft<f64>>; 3],
    /// `1 + rho * lambda_ijk`, the diagonalized normal operator.
    denom: Vec<f64>,
    buf: Vec<Complex<f64>>,
}

impl FftPlan {
    fn new(m: usize, n: usize, p: usize, rho: f64) -> Self {
        let mut planner = FftPlanner::new();
        let fwd = [
            planner.plan_fft_forward(m),
            planner.plan_fft_forward(n),
            planner.plan_fft_forward(p),
        ];
        let inv = [
            planner.plan_fft_inverse(m),
            planner.plan_fft_inverse(n),
            planner.plan_fft_inverse(p),
        ];
        let axis_eig = |len: usize, f: usize| -> f64 {
            if len > 1 {
                2.0 - 2.0 * (2.0 * std::f64::consts::PI * f as f64 / len as f64).cos()
            } else {
                0.0
            }
        };
        let mut denom = Vec::with_capacity(m * n * p);
        for k in 0..p {
            for j in 0..n {
                for i in 0..m {
                    let lam = axis_eig(m, i) + axis_eig(n, j) + axis_eig(p, k);
                    denom.push(1.0 + rho * lam);
                }
            }
        }
        Self {
            fwd,
            inv,
            denom,
            buf: vec![Complex::default(); m * n * p],
        }
    }

    /// Solves `(I + rho C^T C) x = b` exactly via 3D FFT diagonalization.
    fn solve(&mut self, m: usize, n: usize, p: usize, b: &[f64], x: &mut [f64]) {
        for (c, &re) in self.buf.iter_mut().zip(b) {
            *c = Complex::new(re, 0.0);
        }
        self.transform(m, n, p, true);
        for (c, &d) in self.buf.iter_mut().zip(&self.denom) {
            *c /= d;
        }
        self.transform(m, n, p, false);
        let scale = 1.0 / (m * n * p) as f64;
        for (xi, c) in x.iter_mut().zip(&self.buf) {
            *xi = c.re * scale;
        }
    }

    fn transform(&mut self, m: usize, n: usize, p: usize, forward: bool) {
        let plans = if forward { &self.fwd } else { &self.inv };
        // axis 0: contiguous runs of length m
        if m > 1 {
            plans[0].process(&mut self.buf);
        }
        // axis 1: stride m within each frame
        if n > 1 {
            let mut scratch = vec![Complex::default(); n];
            for k in 0..p {
                for i in 0..m {
                    for j in 0..n {
                        scratch[j] = self.buf[i + m * j + m * n * k];
                    }
                    plans[1].process(&mut scratch);
                    for j in 0..n {
                        self.buf[i + m * j + m * n * k] = scratch[j];
                    }
                }
            }
        }
        // axis 2: stride m*n
        if p > 1 {
            let mut scratch = vec![Complex::default(); p];
            for j in 0..n {
                for i in 0..m {
                    for k in 0..p {
                        scratch[k] = self.buf[i + m * j + m * n * k];
                    }
                    plans[2].process(&mut scratch);
                    for k in 0..p {
                        self.buf[i + m * j + m * n * k] = scratch[k];
                    }
                }
            }
        }
    }
}

/// Reusable TV-denoising solver bound to one difference operator.
///
/// Holds the ADMM iterates across calls so the outer robust-PCA loop can
/// warm-start each proximal step from the previous one.
pub struct TvDenoiser {
    op: DiffOp,
    cfg: AdmmConfig,
    x: Vec<f64>,
    v: Vec<f64>,
    u: Vec<f64>,
    warm: bool,
    cx: Vec<f64>,
    v_prev: Vec<f64>,
    ws: Workspace,
    fft: Option<FftPlan>,
    /// Outer iterations used by the most recent `prox` call.
    pub last_iterations: usize,
}

impl TvDenoiser {
    pub fn new(op: DiffOp, cfg: AdmmConfig) -> Result<Self> {
        cfg.validate()?;
        if cfg.x_solver == XSolver::Fft && op.boundary() != Boundary::Circulant {
            return Err(Error::InvalidConfig(
                "FFT x-solver requires a circulant difference operator".into(),
            ));
        }
        let (m, n, p) = op.shape();
        let fft = if cfg.x_solver == XSolver::Fft {
            Some(FftPlan::new(m, n, p, cfg.rho))
        } else {
            None
        };
        let ndim = op.ndim();
        let nrows = op.nrows();
        Ok(Self {
            ws: Workspace::new(ndim, nrows),
            x: vec![0.0; ndim],
            v: vec![0.0; nrows],
            u: vec![0.0; nrows],
            warm: false,
            cx: vec![0.0; nrows],
            v_prev: vec![0.0; nrows],
            op,
            cfg,
            fft,
            last_iterations: 0,
        })
    }

    /// Derived-weight constructor with drop boundaries.
    pub fn from_weights(w: &TvWeights, cfg: AdmmConfig) -> Result<Self> {
        Self::new(DiffOp::new(w), cfg)
    }

    pub fn op(&self) -> &DiffOp {
        &self.op
    }

    /// Discards the warm-start state.
    pub fn reset(&mut self) {
        self.warm = false;
    }

    /// Proximal operator of `lambda * TV` at `z`: approximately minimizes
    /// `0.5||z - x||_F^2 + lambda ||W C x||_1`.
    pub fn prox(&mut self, z: &DMatrix<f64>, lambda: f64) -> Result<DMatrix<f64>> {
        let (m, n, p) = self.op.shape();
        if z.nrows() != m * n || z.ncols() != p {
            return Err(Error::DimensionMismatch {
                context: "TvDenoiser::prox",
                expected: format!("{}x{}", m * n, p),
                got: format!("{}x{}", z.nrows(), z.ncols()),
            });
        }
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("tvdn input"));
        }
        if lambda < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "tv weight must be nonnegative, got {lambda}"
            )));
        }
        if lambda == 0.0 {
            self.last_iterations = 0;
            return Ok(z.clone());
        }

        let zf = z.as_slice();
        let rho = self.cfg.rho;
        if !(self.cfg.warm_start && self.warm) {
            self.x.copy_from_slice(zf);
            self.op.apply(&self.x, &mut self.v);
            self.u.fill(0.0);
        }

        let mut iterations = 0;
        for _ in 0..self.cfg.max_outer {
            iterations += 1;
            build_rhs(zf, &self.v, &self.u, rho, &self.op, &mut self.ws);
            match &mut self.fft {
                Some(plan) => {
                    let rhs = &self.ws.rhs;
                    plan.solve(m, n, p, rhs, &mut self.x);
                }
                None => {
                    let rhs = std::mem::take(&mut self.ws.rhs);
                    cg_solve(
                        &self.op,
                        rho,
                        &rhs,
                        &mut self.x,
                        self.cfg.cg_tol,
                        self.cfg.cg_max,
                        &mut self.ws,
                    );
                    self.ws.rhs = rhs;
                }
            }

            self.op.apply(&self.x, &mut self.cx);
            self.v_prev.copy_from_slice(&self.v);
            let t = lambda / rho;
            for r in 0..self.v.len() {
                let s = self.cx[r] + self.u[r];
                self.v[r] = s.signum() * (s.abs() - t).max(0.0);
                self.u[r] += self.cx[r] - self.v[r];
            }

            // relative primal/dual residuals
            let mut primal = 0.0;
            let mut cx_norm = 0.0;
            let mut v_norm = 0.0;
            for r in 0..self.v.len() {
                primal += (self.cx[r] - self.v[r]).powi(2);
                cx_norm += self.cx[r].powi(2);
                v_norm += self.v[r].powi(2);
                self.v_prev[r] = self.v[r] - self.v_prev[r];
            }
            self.op.apply_transpose(&self.v_prev, &mut self.ws.resid);
            let dual = rho * dot(&self.ws.resid, &self.ws.resid).sqrt();
            self.op.apply_transpose(&self.u, &mut self.ws.resid);
            let dual_scale = rho * dot(&self.ws.resid, &self.ws.resid).sqrt();

            let primal_scale = cx_norm.max(v_norm).sqrt();
            if primal.sqrt() <= self.cfg.tol * primal_scale.max(1e-12)
                && dual <= self.cfg.tol * dual_scale.max(1e-12)
            {
                break;
            }
        }
        self.last_iterations = iterations;
        self.warm = true;
        Ok(unvec(&self.x, m * n, p))
    }
}

/// One-shot weighted TV denoising with drop boundaries.
pub fn tvdn(z: &DMatrix<f64>, lambda: f64, w: &TvWeights, cfg: &AdmmConfig) -> Result<DMatrix<f64>> {
    let mut solver = TvDenoiser::from_weights(w, *cfg)?;
    solver.prox(z, lambda)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tv::TvWeights;
    use nalgebra::DMatrix;

    fn tight() -> AdmmConfig {
        AdmmConfig {
            tol: 1e-9,
            max_outer: 2000,
            ..AdmmConfig::default()
        }
    }

    #[test]
    fn lambda_zero_returns_input() {
        let w = TvWeights::all_ones(2, 2, 1);
        let z = DMatrix::from_column_slice(4, 1, &[0.1, 0.9, 0.4, 0.3]);
        let out = tvdn(&z, 0.0, &w, &AdmmConfig::default()).unwrap();
        assert_eq!(out, z);
    }

    #[test]
    fn constant_input_is_fixed_point() {
        let w = TvWeights::all_ones(3, 3, 2);
        let z = DMatrix::from_element(9, 2, 0.6);
        let out = tvdn(&z, 0.5, &w, &tight()).unwrap();
        assert!((out - z).norm() < 1e-8);
    }

    #[test]
    fn two_sample_closed_form() {
        // z = (0, 1), lambda = 0.25: difference shrinks by 2*lambda, mean kept
        let w = TvWeights::all_ones(2, 1, 1);
        let z = DMatrix::from_column_slice(2, 1, &[0.0, 1.0]);
        let out = tvdn(&z, 0.25, &w, &tight()).unwrap();
        assert!((out[(0, 0)] - 0.25).abs() < 1e-6, "got {}", out[(0, 0)]);
        assert!((out[(1, 0)] - 0.75).abs() < 1e-6, "got {}", out[(1, 0)]);
    }

    #[test]
    fn fully_masked_input_passes_through() {
        let m = 3;
        let n = 2;
        let mask = DMatrix::zeros(6, 2);
        let w = TvWeights::from_mask(m, n, &mask).unwrap();
        assert!(w.all_zero());
        let z = DMatrix::from_fn(6, 2, |i, k| (i as f64 + k as f64) / 10.0);
        let out = tvdn(&z, 0.7, &w, &AdmmConfig::default()).unwrap();
        assert_eq!(out, z);
    }

    #[test]
    fn v_update_soft_thresholds() {
        let v = v_update(&[1.2, 0.3, -0.8], &[0.0, 0.0, 0.0], 0.5, 1.0);
        assert!((v[0] - 0.7).abs() < 1e-15);
        assert_eq!(v[1], 0.0);
        assert!((v[2] + 0.3).abs() < 1e-15);
        // lambda = 0 keeps wcx + u
        let v = v_update(&[1.2, -0.4], &[0.1, 0.2], 0.0, 1.0);
        assert!((v[0] - 1.3).abs() < 1e-15);
        assert!((v[1] + 0.2).abs() < 1e-15);
    }

    #[test]
    fn x_update_identity_at_rho_zero() {
        let w = TvWeights::all_ones(2, 2, 1);
        let op = DiffOp::new(&w);
        let z = [0.3, 0.9, 0.2, 0.5];
        let v = vec![0.0; op.nrows()];
        let u = vec![0.0; op.nrows()];
        let x = x_update(&z, &v, &u, 0.0, &op, &AdmmConfig::default());
        for (a, b) in x.iter().zip(&z) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn x_update_fixed_point_when_v_equals_cz() {
        let w = TvWeights::all_ones(3, 1, 1);
        let op = DiffOp::new(&w);
        let z = [0.1, 0.5, 0.2];
        let mut v = vec![0.0; op.nrows()];
        op.apply(&z, &mut v);
        let u = vec![0.0; op.nrows()];
        let x = x_update(&z, &v, &u, 2.5, &op, &AdmmConfig::default());
        for (a, b) in x.iter().zip(&z) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn x_update_matches_dense_solve() {
        let m = 3;
        let n = 2;
        let p = 2;
        let w = TvWeights::all_ones(m, n, p);
        let op = DiffOp::new(&w);
        let nd = op.ndim();
        let z: Vec<f64> = (0..nd).map(|i| ((i * 13 + 7) % 17) as f64 / 17.0).collect();
        let v: Vec<f64> = (0..op.nrows()).map(|r| ((r * 5 + 3) % 11) as f64 / 11.0 - 0.4).collect();
        let u: Vec<f64> = (0..op.nrows()).map(|r| ((r * 7 + 1) % 13) as f64 / 13.0 - 0.5).collect();
        let rho = 1.7;

        // dense normal matrix
        let mut c = DMatrix::zeros(op.nrows(), nd);
        for row in 0..op.nrows() {
            let mut e = vec![0.0; op.nrows()];
            e[row] = 1.0;
            let mut col = vec![0.0; nd];
            op.apply_transpose(&e, &mut col);
            for i in 0..nd {
                c[(row, i)] = col[i];
            }
        }
        let a = DMatrix::identity(nd, nd) + rho * c.transpose() * &c;
        let vm = DMatrix::from_column_slice(op.nrows(), 1, &v);
        let um = DMatrix::from_column_slice(op.nrows(), 1, &u);
        let zm = DMatrix::from_column_slice(nd, 1, &z);
        let rhs = zm + rho * c.transpose() * (vm - um);
        let dense = a.lu().solve(&rhs).unwrap();

        let cfg = AdmmConfig {
            cg_tol: 1e-12,
            cg_max: 500,
            ..AdmmConfig::default()
        };
        let x = x_update(&z, &v, &u, rho, &op, &cfg);
        for i in 0..nd {
            assert!((x[i] - dense[(i, 0)]).abs() < 1e-8, "entry {i}");
        }
    }

    #[test]
    fn fft_and_cg_paths_agree_on_circulant_problem() {
        let (m, n, p) = (6, 5, 3);
        let z = DMatrix::from_fn(m * n, p, |i, k| ((i * 3 + k * 29 + 11) % 23) as f64 / 23.0);
        let cg_cfg = AdmmConfig {
            tol: 1e-10,
            max_outer: 3000,
            cg_tol: 1e-12,
            cg_max: 1000,
            ..AdmmConfig::default()
        };
        let fft_cfg = AdmmConfig {
            x_solver: XSolver::Fft,
            ..cg_cfg
        };
        let mut cg = TvDenoiser::new(DiffOp::circulant(m, n, p), cg_cfg).unwrap();
        let mut fft = TvDenoiser::new(DiffOp::circulant(m, n, p), fft_cfg).unwrap();
        let a = cg.prox(&z, 0.05).unwrap();
        let b = fft.prox(&z, 0.05).unwrap();
        assert!((a - b).norm() < 1e-6);
    }

    #[test]
    fn fft_solver_rejects_drop_boundaries() {
        let w = TvWeights::all_ones(4, 4, 2);
        let cfg = AdmmConfig {
            x_solver: XSolver::Fft,
            ..AdmmConfig::default()
        };
        assert!(TvDenoiser::from_weights(&w, cfg).is_err());
    }
}
