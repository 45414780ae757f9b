//! Block Cimmino iteration and its conjugate gradient acceleration.

use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{FactorError, SolverError};
use crate::partition::PartitionQuality;
use crate::projector::BlockFactor;
use crate::sparse::{dot, norm1, norm_inf, SparseMatrix};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITERS: usize = 10_000;
/// The fixed-point iteration aborts once the backward error exceeds this
/// multiple of its initial value.
pub const DIVERGENCE_FACTOR: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    FixedPoint,
    Cg,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolveConfig {
    pub tol: f64,
    pub max_iters: usize,
    /// Relaxation for the fixed-point variant; CG ignores it.
    pub omega: f64,
    pub variant: Variant,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            max_iters: DEFAULT_MAX_ITERS,
            omega: 1.0,
            variant: Variant::Cg,
        }
    }
}

impl SolveConfig {
    fn validate(&self) -> Result<(), SolverError> {
        if !(self.tol > 0.0) {
            return Err(SolverError::InvalidConfig(format!("tol must be positive, got {}", self.tol)));
        }
        if self.max_iters == 0 {
            return Err(SolverError::InvalidConfig("max_iters must be at least 1".into()));
        }
        if self.variant == Variant::FixedPoint && !(self.omega > 0.0) {
            return Err(SolverError::InvalidConfig(format!("omega must be positive, got {}", self.omega)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    MaxIters,
    Diverged,
    /// The CG residual vanished before the backward error reached `tol`.
    Stalled,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Timings {
    pub factor: f64,
    pub iterate: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub converged: bool,
    pub status: SolveStatus,
    pub iters: usize,
    /// Backward error after each iteration, starting with `x⁰ = 0`.
    pub backward_error_history: Vec<f64>,
    pub final_x: Vec<f64>,
    pub partition_quality: Option<PartitionQuality>,
    pub timings: Timings,
}

impl SolveReport {
    pub fn final_backward_error(&self) -> f64 {
        *self.backward_error_history.last().expect("history includes iteration 0")
    }
}

/// `‖Ax − f‖∞ / (‖A‖∞ ‖x‖₁ + ‖f‖∞)`. A zero denominator gives 0 when the
/// residual is zero and +∞ otherwise.
pub fn backward_error(a: &SparseMatrix, x: &[f64], f: &[f64]) -> Result<f64, SolverError> {
    BackwardError::new(a, f)?.eval(x)
}

struct BackwardError<'a> {
    a: &'a SparseMatrix,
    f: &'a [f64],
    a_norm: f64,
    f_norm: f64,
}

impl<'a> BackwardError<'a> {
    fn new(a: &'a SparseMatrix, f: &'a [f64]) -> Result<Self, SolverError> {
        if f.len() != a.nrows() {
            return Err(crate::error::SparseError::DimensionMismatch {
                op: "backward error rhs",
                expected: a.nrows(),
                found: f.len(),
            }
            .into());
        }
        Ok(Self {
            a,
            f,
            a_norm: a.norm_inf(),
            f_norm: norm_inf(f),
        })
    }

    fn eval(&self, x: &[f64]) -> Result<f64, SolverError> {
        let mut r = self.a.spmv(x)?;
        for (ri, fi) in r.iter_mut().zip(self.f) {
            *ri -= fi;
        }
        let num = norm_inf(&r);
        let den = self.a_norm * norm1(x) + self.f_norm;
        Ok(if den == 0.0 {
            if num == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            num / den
        })
    }
}

/// `f = A·1`.
pub fn make_rhs(a: &SparseMatrix) -> Vec<f64> {
    (0..a.nrows()).map(|i| a.row(i).1.iter().sum()).collect()
}

fn check_blocks(a: &SparseMatrix, f: &[f64], blocks: &[BlockFactor]) -> Result<(), SolverError> {
    let m = a.nrows();
    if f.len() != m {
        return Err(crate::error::SparseError::DimensionMismatch {
            op: "rhs",
            expected: m,
            found: f.len(),
        }
        .into());
    }
    let mut seen = vec![false; m];
    let mut count = 0;
    for b in blocks {
        if b.ncols() != a.ncols() {
            return Err(crate::error::SparseError::DimensionMismatch {
                op: "block columns",
                expected: a.ncols(),
                found: b.ncols(),
            }
            .into());
        }
        for &r in b.rows() {
            if r >= m || seen[r] {
                return Err(SolverError::Coverage {
                    expected: m,
                    found: count + 1,
                });
            }
            seen[r] = true;
            count += 1;
        }
    }
    if count != m {
        return Err(SolverError::Coverage { expected: m, found: count });
    }
    Ok(())
}

/// Sums per-block vectors in block order, so the result does not depend on
/// how the parallel work was scheduled.
fn block_sum<F>(blocks: &[BlockFactor], n: usize, op: F) -> Result<Vec<f64>, FactorError>
where
    F: Fn(&BlockFactor) -> Result<Vec<f64>, FactorError> + Sync + Send,
{
    let parts: Vec<Vec<f64>> = blocks.par_iter().map(op).collect::<Result<_, _>>()?;
    let mut s = vec![0.0; n];
    for p in parts {
        for (si, pi) in s.iter_mut().zip(p) {
            *si += pi;
        }
    }
    Ok(s)
}

/// `x ↦ Σ P_i x`.
pub fn apply_h(blocks: &[BlockFactor], x: &[f64]) -> Result<Vec<f64>, FactorError> {
    block_sum(blocks, x.len(), |b| b.project(x))
}

/// Dispatches on `cfg.variant`.
pub fn solve(a: &SparseMatrix, f: &[f64], blocks: &[BlockFactor], cfg: &SolveConfig) -> Result<SolveReport, SolverError> {
    match cfg.variant {
        Variant::FixedPoint => block_cimmino_fixed(a, f, blocks, cfg),
        Variant::Cg => block_cimmino_cg(a, f, blocks, cfg),
    }
}

fn report(status: SolveStatus, history: Vec<f64>, x: Vec<f64>, start: Instant) -> SolveReport {
    SolveReport {
        converged: status == SolveStatus::Converged,
        status,
        iters: history.len() - 1,
        backward_error_history: history,
        final_x: x,
        partition_quality: None,
        timings: Timings {
            factor: 0.0,
            iterate: start.elapsed().as_secs_f64(),
        },
    }
}

/// `x ← x + ω Σ A_i⁺ (f_i − A_i x)` from `x = 0`.
pub fn block_cimmino_fixed(
    a: &SparseMatrix,
    f: &[f64],
    blocks: &[BlockFactor],
    cfg: &SolveConfig,
) -> Result<SolveReport, SolverError> {
    cfg.validate()?;
    check_blocks(a, f, blocks)?;
    let start = Instant::now();
    let n = a.ncols();
    let be = BackwardError::new(a, f)?;
    let mut x = vec![0.0; n];
    let mut history = vec![be.eval(&x)?];
    let limit = DIVERGENCE_FACTOR * history[0];
    if history[0] < cfg.tol {
        return Ok(report(SolveStatus::Converged, history, x, start));
    }
    for _ in 0..cfg.max_iters {
        let step = block_sum(blocks, n, |b| b.residual_correction(f, &x))?;
        for (xi, si) in x.iter_mut().zip(&step) {
            *xi += cfg.omega * si;
        }
        let e = be.eval(&x)?;
        history.push(e);
        if e < cfg.tol {
            return Ok(report(SolveStatus::Converged, history, x, start));
        }
        if !(e <= limit) {
            log::warn!("fixed-point iteration diverged at iteration {}", history.len() - 1);
            return Ok(report(SolveStatus::Diverged, history, x, start));
        }
    }
    Ok(report(SolveStatus::MaxIters, history, x, start))
}

/// Conjugate gradients on `H x = ξ` with `H = Σ A_i⁺A_i`, `ξ = Σ A_i⁺ f_i`.
/// Convergence is judged by the backward error on `A x = f`.
pub fn block_cimmino_cg(
    a: &SparseMatrix,
    f: &[f64],
    blocks: &[BlockFactor],
    cfg: &SolveConfig,
) -> Result<SolveReport, SolverError> {
    cfg.validate()?;
    check_blocks(a, f, blocks)?;
    let start = Instant::now();
    let n = a.ncols();
    let be = BackwardError::new(a, f)?;
    let mut x = vec![0.0; n];
    let mut history = vec![be.eval(&x)?];
    if history[0] < cfg.tol {
        return Ok(report(SolveStatus::Converged, history, x, start));
    }

    let xi = block_sum(blocks, n, |b| b.minnorm_solve(&b.gather(f)))?;
    let hx = apply_h(blocks, &x)?;
    let mut r: Vec<f64> = xi.iter().zip(&hx).map(|(a, b)| a - b).collect();
    let mut p = r.clone();
    let mut rr = dot(&r, &r);

    for iter in 1..=cfg.max_iters {
        if rr == 0.0 {
            return Ok(report(SolveStatus::Stalled, history, x, start));
        }
        let psi = apply_h(blocks, &p)?;
        let curvature = dot(&p, &psi);
        if !(curvature > 0.0) {
            return Err(SolverError::LostPositiveDefiniteness { iter, curvature });
        }
        let alpha = rr / curvature;
        for ((xj, pj), (rj, sj)) in x.iter_mut().zip(&p).zip(r.iter_mut().zip(&psi)) {
            *xj += alpha * pj;
            *rj -= alpha * sj;
        }
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        rr = rr_new;
        for (pj, rj) in p.iter_mut().zip(&r) {
            *pj = rj + beta * *pj;
        }
        let e = be.eval(&x)?;
        history.push(e);
        log::trace!("cg iteration {iter}: backward error {e:e}");
        if e < cfg.tol {
            return Ok(report(SolveStatus::Converged, history, x, start));
        }
    }
    Ok(report(SolveStatus::MaxIters, history, x, start))
}
