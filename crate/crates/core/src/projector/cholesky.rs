//! Up-looking sparse Cholesky with a fill-reducing AMD ordering.

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::sparse::linalg::amd;
use faer::sparse::SymbolicSparseColMatRef;

use crate::error::FactorError;
use crate::sparse::SparseMatrix;

const NONE: usize = usize::MAX;

/// `P G Pᵀ = L Lᵀ` with `L` stored by columns, diagonal first in each column.
#[derive(Debug, Clone)]
pub(crate) struct SparseCholesky {
    /// perm[k] = original index of the k-th pivot
    perm: Vec<usize>,
    lp: Vec<usize>,
    li: Vec<usize>,
    lx: Vec<f64>,
}

/// Failure at pivot `row` (original numbering) with diagonal `pivot`.
pub(crate) struct PivotFailure {
    pub row: usize,
    pub pivot: f64,
}

fn amd_order(g: &SparseMatrix) -> Result<Vec<usize>, FactorError> {
    let n = g.nrows();
    // the pattern is symmetric, so CSR rows double as CSC columns
    let sym = SymbolicSparseColMatRef::new_checked(n, n, g.row_ptr(), None, g.col_idx());
    let mut perm = vec![0usize; n];
    let mut perm_inv = vec![0usize; n];
    let mut mem = MemBuffer::new(amd::order_maybe_unsorted_scratch::<usize>(n, g.nnz()));
    amd::order_maybe_unsorted(&mut perm, &mut perm_inv, sym, amd::Control::default(), MemStack::new(&mut mem))
        .map_err(|e| FactorError::Ordering(format!("{e:?}")))?;
    Ok(perm)
}

impl SparseCholesky {
    /// Factors the symmetric positive definite `g` (full pattern stored).
    /// Fails when a diagonal entry of `L` is not above `threshold`.
    pub fn factor(g: &SparseMatrix, threshold: f64) -> Result<Result<Self, PivotFailure>, FactorError> {
        let n = g.nrows();
        let perm = amd_order(g)?;
        let mut pinv = vec![0; n];
        for (k, &p) in perm.iter().enumerate() {
            pinv[p] = k;
        }

        let mut parent = vec![NONE; n];
        let mut ancestor = vec![NONE; n];
        let mut flag = vec![NONE; n];
        let mut reach = Vec::with_capacity(n);
        let mut x = vec![0.0; n];
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];

        for k in 0..n {
            let (gc, gv) = g.row(perm[k]);
            // elimination tree, built incrementally
            for &c in gc {
                let mut i = pinv[c];
                while i != NONE && i < k {
                    let next = ancestor[i];
                    ancestor[i] = k;
                    if next == NONE {
                        parent[i] = k;
                    }
                    i = next;
                }
            }
            // nonzero pattern of row k of L
            reach.clear();
            flag[k] = k;
            let mut d = 0.0;
            for (&c, &v) in gc.iter().zip(gv) {
                let mut i = pinv[c];
                if i > k {
                    continue;
                }
                x[i] += v;
                while flag[i] != k {
                    reach.push(i);
                    flag[i] = k;
                    i = parent[i];
                }
            }
            // a parent always has a larger index than its child, so
            // ascending order eliminates descendants first
            reach.sort_unstable();
            d += x[k];
            x[k] = 0.0;
            for &j in &reach {
                let col = &cols[j];
                let lkj = x[j] / col[0].1;
                x[j] = 0.0;
                for &(i, lij) in &col[1..] {
                    x[i] -= lij * lkj;
                }
                d -= lkj * lkj;
                cols[j].push((k, lkj));
            }
            if !(d > threshold * threshold) {
                return Ok(Err(PivotFailure {
                    row: perm[k],
                    pivot: d.max(0.0).sqrt(),
                }));
            }
            cols[k].push((k, d.sqrt()));
        }

        let nnz = cols.iter().map(Vec::len).sum();
        let mut lp = Vec::with_capacity(n + 1);
        let mut li = Vec::with_capacity(nnz);
        let mut lx = Vec::with_capacity(nnz);
        lp.push(0);
        for col in cols {
            for (i, v) in col {
                li.push(i);
                lx.push(v);
            }
            lp.push(li.len());
        }
        Ok(Ok(Self { perm, lp, li, lx }))
    }

    pub fn n(&self) -> usize {
        self.perm.len()
    }

    pub fn nnz(&self) -> usize {
        self.lx.len()
    }

    /// Overwrites `b` with `G⁻¹ b`. `work` must have length n.
    pub fn solve_in_place(&self, b: &mut [f64], work: &mut [f64]) {
        let n = self.n();
        for k in 0..n {
            work[k] = b[self.perm[k]];
        }
        for j in 0..n {
            let (s, e) = (self.lp[j], self.lp[j + 1]);
            let yj = work[j] / self.lx[s];
            work[j] = yj;
            for p in s + 1..e {
                work[self.li[p]] -= self.lx[p] * yj;
            }
        }
        for j in (0..n).rev() {
            let (s, e) = (self.lp[j], self.lp[j + 1]);
            let mut t = work[j];
            for p in s + 1..e {
                t -= self.lx[p] * work[self.li[p]];
            }
            work[j] = t / self.lx[s];
        }
        for k in 0..n {
            b[self.perm[k]] = work[k];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spd(n: usize, seed: u64) -> SparseMatrix {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut t = Vec::new();
        for i in 0..n {
            for _ in 0..3 {
                t.push((i, rng.random_range(0..2 * n), rng.random_range(-1.0..1.0)));
            }
            t.push((i, 2 * n + i, 1.0));
        }
        let a = SparseMatrix::from_triplets(n, 3 * n, &t).unwrap();
        a.spgemm(&a.transpose()).unwrap()
    }

    #[test]
    fn solves_spd_system() {
        let g = spd(60, 4);
        let chol = SparseCholesky::factor(&g, 1e-14).unwrap().ok().unwrap();
        let xs: Vec<f64> = (0..60).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut b = g.spmv(&xs).unwrap();
        let mut work = vec![0.0; 60];
        chol.solve_in_place(&mut b, &mut work);
        for (a, e) in b.iter().zip(&xs) {
            assert!((a - e).abs() < 1e-10, "{a} vs {e}");
        }
    }

    #[test]
    fn singular_matrix_reports_pivot() {
        // rank one
        let g = SparseMatrix::from_dense(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(SparseCholesky::factor(&g, 1e-13).unwrap().is_err());
    }
}
