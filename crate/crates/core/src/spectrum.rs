//! Eigenvalues of the iteration operator `H = Σ P_i` for small problems.

use std::io::Write;

use faer::{Mat, Side};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::SpectrumError;
use crate::projector::BlockFactor;

pub const DEFAULT_DENSE_CAP: usize = 6000;
pub const DEFAULT_TAU: f64 = 0.1;
const SYMMETRY_TOL: f64 = 1e-8;
const RESIDUAL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumReport {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub kappa: f64,
    pub cluster_fraction: f64,
    pub tau: f64,
}

/// The scalar part of a report, as written to the summary JSON.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectrumSummary {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub kappa: f64,
    pub cluster_fraction: f64,
}

impl SpectrumReport {
    pub fn from_eigenvalues(mut eigenvalues: Vec<f64>, tau: f64) -> Self {
        eigenvalues.sort_by(f64::total_cmp);
        let lambda_min = eigenvalues.first().copied().unwrap_or(f64::NAN);
        let lambda_max = eigenvalues.last().copied().unwrap_or(f64::NAN);
        let kappa = if lambda_min > 0.0 { lambda_max / lambda_min } else { f64::INFINITY };
        let inside = eigenvalues.iter().filter(|&&l| (l - 1.0).abs() <= tau).count();
        let cluster_fraction = if eigenvalues.is_empty() {
            0.0
        } else {
            inside as f64 / eigenvalues.len() as f64
        };
        Self {
            eigenvalues,
            lambda_min,
            lambda_max,
            kappa,
            cluster_fraction,
            tau,
        }
    }

    pub fn n(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn trace(&self) -> f64 {
        self.eigenvalues.iter().sum()
    }

    pub fn summary(&self) -> SpectrumSummary {
        SpectrumSummary {
            lambda_min: self.lambda_min,
            lambda_max: self.lambda_max,
            kappa: self.kappa,
            cluster_fraction: self.cluster_fraction,
        }
    }

    /// One eigenvalue per line under a `lambda` header.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "lambda")?;
        for l in &self.eigenvalues {
            writeln!(w, "{l:e}")?;
        }
        Ok(())
    }

    pub fn summary_json(&self) -> String {
        serde_json::to_string_pretty(&self.summary()).expect("plain struct serializes")
    }
}

/// `H[:, j] = Σ_i P_i e_j`, symmetrized as `(H + Hᵀ)/2`.
pub fn build_h_dense(blocks: &[BlockFactor], n: usize, cap: usize) -> Result<Mat<f64>, SpectrumError> {
    if n > cap {
        return Err(SpectrumError::TooLarge { n, cap });
    }
    if let Some(b) = blocks.iter().find(|b| b.ncols() != n) {
        return Err(SpectrumError::SizeMismatch(b.ncols(), n));
    }
    let cols: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            let mut col = vec![0.0; n];
            for b in blocks {
                for (c, p) in col.iter_mut().zip(b.project(&e)?) {
                    *c += p;
                }
            }
            Ok(col)
        })
        .collect::<Result<_, SpectrumError>>()?;
    let h = Mat::from_fn(n, n, |i, j| 0.5 * (cols[j][i] + cols[i][j]));
    Ok(h)
}

fn max_asymmetry(h: &Mat<f64>) -> f64 {
    let n = h.nrows();
    let mut worst: f64 = 0.0;
    for j in 0..n {
        for i in j + 1..n {
            worst = worst.max((h[(i, j)] - h[(j, i)]).abs());
        }
    }
    worst
}

/// Full symmetric eigendecomposition. The extreme eigenpairs are checked
/// against `‖Hv − λv‖ ≤ 1e-8 ‖H‖₂`.
pub fn eigen_spectrum(h: &Mat<f64>, tau: f64) -> Result<SpectrumReport, SpectrumError> {
    let n = h.nrows();
    if h.ncols() != n {
        return Err(SpectrumError::SizeMismatch(n, h.ncols()));
    }
    let asym = max_asymmetry(h);
    if asym > SYMMETRY_TOL {
        return Err(SpectrumError::NotSymmetric(asym));
    }
    if n == 0 {
        return Ok(SpectrumReport::from_eigenvalues(Vec::new(), tau));
    }
    let evd = h
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| SpectrumError::Eigen(format!("{e:?}")))?;
    let s = evd.S().column_vector();
    let values: Vec<f64> = (0..n).map(|i| s[i]).collect();
    let u = evd.U();
    let hnorm = values.iter().fold(0.0f64, |m, l| m.max(l.abs()));
    for idx in [0, n - 1] {
        let lambda = values[idx];
        let mut res2 = 0.0;
        for i in 0..n {
            let mut hv = 0.0;
            for k in 0..n {
                hv += h[(i, k)] * u[(k, idx)];
            }
            res2 += (hv - lambda * u[(i, idx)]).powi(2);
        }
        let res = res2.sqrt();
        if res > RESIDUAL_TOL * hnorm.max(f64::MIN_POSITIVE) {
            return Err(SpectrumError::Eigen(format!(
                "eigenpair {idx} residual {res:e} exceeds {RESIDUAL_TOL:e}·‖H‖"
            )));
        }
    }
    Ok(SpectrumReport::from_eigenvalues(values, tau))
}

/// Builds H for the given factors and returns its spectrum.
pub fn spectrum_of(blocks: &[BlockFactor], n: usize, cap: usize, tau: f64) -> Result<SpectrumReport, SpectrumError> {
    eigen_spectrum(&build_h_dense(blocks, n, cap)?, tau)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Winner {
    First,
    Second,
    Tie,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SpectrumComparison {
    /// Larger smallest eigenvalue wins.
    pub lambda_min: Winner,
    /// Smaller condition number wins.
    pub kappa: Winner,
    /// Larger fraction of eigenvalues near 1 wins.
    pub cluster_fraction: Winner,
}

fn larger_wins(a: f64, b: f64) -> Winner {
    let scale = a.abs().max(b.abs());
    if a == b || (a - b).abs() <= 1e-12 * scale {
        Winner::Tie
    } else if a > b {
        Winner::First
    } else {
        Winner::Second
    }
}

pub fn spectrum_compare(a: &SpectrumReport, b: &SpectrumReport) -> Result<SpectrumComparison, SpectrumError> {
    if a.n() != b.n() {
        return Err(SpectrumError::SizeMismatch(a.n(), b.n()));
    }
    Ok(SpectrumComparison {
        lambda_min: larger_wins(a.lambda_min, b.lambda_min),
        kappa: larger_wins(b.kappa, a.kappa),
        cluster_fraction: larger_wins(a.cluster_fraction, b.cluster_fraction),
    })
}
