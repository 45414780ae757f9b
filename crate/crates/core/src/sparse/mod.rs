//! Compressed sparse row storage and the kernels the rest of the crate is
//! built on.
//!
//! Every matrix handed out by this module is canonical: column indices are
//! strictly increasing within a row and no explicit zeros are stored.

pub mod mtx;

use rayon::prelude::*;

use crate::error::SparseError;
use crate::partition::Partition;

pub use mtx::{read_matrix_market, read_matrix_market_from, write_matrix_market, write_matrix_market_to};

/// Row-compressed sparse matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Builds a matrix from raw CSR arrays, checking that they are canonical.
    pub fn from_csr(
        nrows: usize,
        ncols: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self, SparseError> {
        let bad = |msg: &str| Err(SparseError::InvalidStructure(msg.to_string()));
        if row_ptr.len() != nrows + 1 {
            return bad("row_ptr must have nrows + 1 entries");
        }
        if row_ptr[0] != 0 || row_ptr[nrows] != col_idx.len() || col_idx.len() != values.len() {
            return bad("row_ptr endpoints do not match nnz");
        }
        for i in 0..nrows {
            if row_ptr[i] > row_ptr[i + 1] {
                return bad("row_ptr is decreasing");
            }
            let cols = &col_idx[row_ptr[i]..row_ptr[i + 1]];
            if cols.windows(2).any(|w| w[0] >= w[1]) {
                return bad("column indices not strictly increasing within a row");
            }
            if let Some(&c) = cols.last() {
                if c >= ncols {
                    return Err(SparseError::IndexOutOfRange {
                        row: i,
                        col: c,
                        nrows,
                        ncols,
                    });
                }
            }
        }
        if values.contains(&0.0) {
            return bad("explicit zero stored");
        }
        Ok(Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        })
    }

    /// Assembles a canonical matrix from `(row, col, value)` triplets.
    /// Duplicates are summed; entries that end up exactly zero are dropped.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self, SparseError> {
        let mut counts = vec![0usize; nrows + 1];
        for &(r, c, _) in triplets {
            if r >= nrows || c >= ncols {
                return Err(SparseError::IndexOutOfRange {
                    row: r,
                    col: c,
                    nrows,
                    ncols,
                });
            }
            counts[r + 1] += 1;
        }
        for i in 0..nrows {
            counts[i + 1] += counts[i];
        }
        let mut next = counts.clone();
        let mut entries = vec![(0usize, 0.0f64); triplets.len()];
        for &(r, c, v) in triplets {
            entries[next[r]] = (c, v);
            next[r] += 1;
        }
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        for i in 0..nrows {
            let row = &mut entries[counts[i]..counts[i + 1]];
            row.sort_by_key(|e| e.0);
            let mut k = 0;
            while k < row.len() {
                let c = row[k].0;
                let mut sum = 0.0;
                while k < row.len() && row[k].0 == c {
                    sum += row[k].1;
                    k += 1;
                }
                if sum != 0.0 {
                    col_idx.push(c);
                    values.push(sum);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Ok(Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        })
    }

    /// Builds a matrix from a row-major dense array, skipping zeros.
    pub fn from_dense(nrows: usize, ncols: usize, dense: &[f64]) -> Self {
        assert_eq!(dense.len(), nrows * ncols, "dense buffer size");
        let mut row_ptr = vec![0];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        for i in 0..nrows {
            for j in 0..ncols {
                let v = dense[i * ncols + j];
                if v != 0.0 {
                    col_idx.push(j);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            nrows: n,
            ncols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            row_ptr: vec![0; nrows + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    #[inline]
    pub fn nrows(&self) -> usize {
        self.nrows
    }

    #[inline]
    pub fn ncols(&self) -> usize {
        self.ncols
    }

    #[inline]
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn is_square(&self) -> bool {
        self.nrows == self.ncols
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Column indices and values of row `i`.
    #[inline]
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (s, e) = (self.row_ptr[i], self.row_ptr[i + 1]);
        (&self.col_idx[s..e], &self.values[s..e])
    }

    pub fn row_nnz(&self, i: usize) -> usize {
        self.row_ptr[i + 1] - self.row_ptr[i]
    }

    /// Entry `(i, j)`, zero if not stored.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    /// Iterates `(row, col, value)` in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |i| {
            let (cols, vals) = self.row(i);
            cols.iter().zip(vals).map(move |(&j, &v)| (i, j, v))
        })
    }

    /// Row-major dense copy. Meant for small matrices and tests.
    pub fn to_dense(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.nrows * self.ncols];
        for (i, j, v) in self.iter() {
            d[i * self.ncols + j] = v;
        }
        d
    }

    pub fn transpose(&self) -> SparseMatrix {
        let mut counts = vec![0usize; self.ncols + 1];
        for &c in &self.col_idx {
            counts[c + 1] += 1;
        }
        for j in 0..self.ncols {
            counts[j + 1] += counts[j];
        }
        let row_ptr = counts.clone();
        let mut next = counts;
        let mut col_idx = vec![0usize; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        // rows are visited in increasing order, so each output row comes out sorted
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                let dst = next[j];
                col_idx[dst] = i;
                values[dst] = v;
                next[j] += 1;
            }
        }
        SparseMatrix {
            nrows: self.ncols,
            ncols: self.nrows,
            row_ptr,
            col_idx,
            values,
        }
    }

    /// `y = A x`.
    pub fn spmv(&self, x: &[f64]) -> Result<Vec<f64>, SparseError> {
        let mut y = vec![0.0; self.nrows];
        self.spmv_into(x, &mut y)?;
        Ok(y)
    }

    /// `y = A x` into a caller-provided buffer.
    pub fn spmv_into(&self, x: &[f64], y: &mut [f64]) -> Result<(), SparseError> {
        if x.len() != self.ncols {
            return Err(SparseError::DimensionMismatch {
                op: "spmv (x)",
                expected: self.ncols,
                found: x.len(),
            });
        }
        if y.len() != self.nrows {
            return Err(SparseError::DimensionMismatch {
                op: "spmv (y)",
                expected: self.nrows,
                found: y.len(),
            });
        }
        for (i, yi) in y.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            *yi = cols.iter().zip(vals).map(|(&j, &v)| v * x[j]).sum();
        }
        Ok(())
    }

    /// `y += Aᵀ x`, with `x` of length `nrows`.
    pub fn spmv_transpose_add(&self, x: &[f64], y: &mut [f64]) -> Result<(), SparseError> {
        if x.len() != self.nrows || y.len() != self.ncols {
            return Err(SparseError::DimensionMismatch {
                op: "spmv_transpose",
                expected: self.nrows,
                found: x.len(),
            });
        }
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                y[j] += v * xi;
            }
        }
        Ok(())
    }

    /// Row-by-row Gustavson product `A B`. Rows are computed independently
    /// (in parallel), each with the same accumulation order, so the result is
    /// deterministic.
    pub fn spgemm(&self, b: &SparseMatrix) -> Result<SparseMatrix, SparseError> {
        if self.ncols != b.nrows {
            return Err(SparseError::DimensionMismatch {
                op: "spgemm",
                expected: self.ncols,
                found: b.nrows,
            });
        }
        let ncols = b.ncols;
        let rows: Vec<(Vec<usize>, Vec<f64>)> = (0..self.nrows)
            .into_par_iter()
            .map_init(
                || (vec![0.0f64; ncols], vec![usize::MAX; ncols]),
                |(acc, mark), i| {
                    let mut pattern = Vec::new();
                    let (acols, avals) = self.row(i);
                    for (&k, &aik) in acols.iter().zip(avals) {
                        let (bcols, bvals) = b.row(k);
                        for (&j, &bkj) in bcols.iter().zip(bvals) {
                            if mark[j] != i {
                                mark[j] = i;
                                acc[j] = 0.0;
                                pattern.push(j);
                            }
                            acc[j] += aik * bkj;
                        }
                    }
                    pattern.sort_unstable();
                    let mut cols = Vec::with_capacity(pattern.len());
                    let mut vals = Vec::with_capacity(pattern.len());
                    for j in pattern {
                        if acc[j] != 0.0 {
                            cols.push(j);
                            vals.push(acc[j]);
                        }
                    }
                    (cols, vals)
                },
            )
            .collect();
        let nnz = rows.iter().map(|r| r.0.len()).sum();
        let mut row_ptr = Vec::with_capacity(self.nrows + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::with_capacity(nnz);
        let mut values = Vec::with_capacity(nnz);
        for (c, v) in rows {
            col_idx.extend(c);
            values.extend(v);
            row_ptr.push(col_idx.len());
        }
        Ok(SparseMatrix {
            nrows: self.nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        })
    }

    /// Same pattern with every value set to one.
    pub fn pattern(&self) -> SparseMatrix {
        SparseMatrix {
            values: vec![1.0; self.nnz()],
            ..self.clone()
        }
    }

    /// `‖A‖∞`, the maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.nrows)
            .map(|i| self.row(i).1.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn norm_frobenius(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn row_norms2(&self) -> Vec<f64> {
        (0..self.nrows)
            .map(|i| self.row(i).1.iter().map(|v| v * v).sum::<f64>().sqrt())
            .collect()
    }

    pub fn row_max_abs(&self) -> Vec<f64> {
        (0..self.nrows)
            .map(|i| self.row(i).1.iter().fold(0.0f64, |m, v| m.max(v.abs())))
            .collect()
    }

    pub fn col_max_abs(&self) -> Vec<f64> {
        let mut m = vec![0.0f64; self.ncols];
        for (&j, v) in self.col_idx.iter().zip(&self.values) {
            m[j] = m[j].max(v.abs());
        }
        m
    }

    pub fn col_counts(&self) -> Vec<usize> {
        let mut c = vec![0usize; self.ncols];
        for &j in &self.col_idx {
            c[j] += 1;
        }
        c
    }

    /// `diag(row) · A · diag(col)`; either side may be omitted.
    pub fn scaled(&self, row: Option<&[f64]>, col: Option<&[f64]>) -> SparseMatrix {
        let mut out = self.clone();
        for i in 0..self.nrows {
            let r = row.map_or(1.0, |s| s[i]);
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                let c = col.map_or(1.0, |s| s[self.col_idx[p]]);
                out.values[p] = r * self.values[p] * c;
            }
        }
        out
    }

    /// Submatrix made of the given rows, in the order given.
    pub fn select_rows(&self, rows: &[usize]) -> SparseMatrix {
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        row_ptr.push(0);
        let nnz: usize = rows.iter().map(|&r| self.row_nnz(r)).sum();
        let mut col_idx = Vec::with_capacity(nnz);
        let mut values = Vec::with_capacity(nnz);
        for &r in rows {
            let (c, v) = self.row(r);
            col_idx.extend_from_slice(c);
            values.extend_from_slice(v);
            row_ptr.push(col_idx.len());
        }
        SparseMatrix {
            nrows: rows.len(),
            ncols: self.ncols,
            row_ptr,
            col_idx,
            values,
        }
    }

    /// Keeps only entries for which `keep(row, col, value)` holds.
    pub fn filter(&self, mut keep: impl FnMut(usize, usize, f64) -> bool) -> SparseMatrix {
        let mut row_ptr = Vec::with_capacity(self.nrows + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                if keep(i, j, v) {
                    col_idx.push(j);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        SparseMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            row_ptr,
            col_idx,
            values,
        }
    }
}

/// Splits `a` into the block rows induced by `p`. Block `k` holds the rows
/// of part `k` in ascending original order and keeps all `ncols` columns.
pub fn extract_block_rows(a: &SparseMatrix, p: &Partition) -> Result<Vec<SparseMatrix>, SparseError> {
    if p.nrows() != a.nrows() {
        return Err(SparseError::DimensionMismatch {
            op: "extract_block_rows",
            expected: a.nrows(),
            found: p.nrows(),
        });
    }
    p.part_rows()
        .iter()
        .enumerate()
        .map(|(k, rows)| {
            if rows.is_empty() {
                Err(SparseError::EmptyBlock(k))
            } else {
                Ok(a.select_rows(rows))
            }
        })
        .collect()
}

pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

pub fn norm2(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

pub fn norm_inf(x: &[f64]) -> f64 {
    x.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

pub fn norm1(x: &[f64]) -> f64 {
    x.iter().map(|v| v.abs()).sum()
}
