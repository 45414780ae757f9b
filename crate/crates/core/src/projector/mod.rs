//! Minimum-norm solves with a block row `A_i`.
//!
//! The factor is a sparse Cholesky of the Gram matrix `A_i A_iᵀ`. A solve
//! uses the corrected seminormal equations: `δ = A_iᵀ G⁻¹ r` followed by one
//! refinement step on the residual `r − A_i δ`, which keeps `δ` in the row
//! space of `A_i` and recovers the accuracy lost by forming the Gram matrix.

mod cholesky;

use rayon::prelude::*;

use crate::error::FactorError;
use crate::partition::Partition;
use crate::sparse::SparseMatrix;
use cholesky::SparseCholesky;

/// Relative threshold on the diagonal of the Cholesky factor.
pub const RANK_TOL: f64 = 1e-13;

#[derive(Debug, Clone)]
pub struct BlockFactor {
    block: usize,
    a: SparseMatrix,
    rows: Vec<usize>,
    chol: SparseCholesky,
}

/// Factors one block. `block` only labels errors.
pub fn factorize_block(a_i: &SparseMatrix, block: usize) -> Result<BlockFactor, FactorError> {
    let rows = (0..a_i.nrows()).collect();
    factorize_block_with_rows(a_i.clone(), rows, block)
}

/// Factors a block whose local row `r` is row `rows[r]` of the full matrix.
pub fn factorize_block_with_rows(
    a_i: SparseMatrix,
    rows: Vec<usize>,
    block: usize,
) -> Result<BlockFactor, FactorError> {
    let (m, n) = (a_i.nrows(), a_i.ncols());
    if m == 0 {
        return Err(FactorError::EmptyBlock(block));
    }
    if m > n {
        return Err(FactorError::TooManyRows { block, rows: m, cols: n });
    }
    if rows.len() != m {
        return Err(FactorError::Length {
            expected: m,
            found: rows.len(),
        });
    }
    let gram = a_i
        .spgemm(&a_i.transpose())
        .expect("A and A' have compatible shapes");
    let threshold = RANK_TOL * a_i.norm_frobenius();
    let chol = SparseCholesky::factor(&gram, threshold)?.map_err(|f| FactorError::RankDeficient {
        block,
        row: f.row,
        pivot: f.pivot,
        threshold,
    })?;
    log::trace!("block {block}: {m} rows, nnz(G) = {}, nnz(L) = {}", gram.nnz(), chol.nnz());
    Ok(BlockFactor { block, a: a_i, rows, chol })
}

/// Extracts and factors every block of `p`, in parallel.
pub fn factorize_partition(a: &SparseMatrix, p: &Partition) -> Result<Vec<BlockFactor>, FactorError> {
    p.part_rows()
        .into_par_iter()
        .enumerate()
        .map(|(k, rows)| {
            let a_k = a.select_rows(&rows);
            factorize_block_with_rows(a_k, rows, k)
        })
        .collect()
}

impl BlockFactor {
    pub fn block(&self) -> usize {
        self.block
    }

    pub fn block_rows(&self) -> usize {
        self.a.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.a.ncols()
    }

    /// Global row index of each local row.
    pub fn rows(&self) -> &[usize] {
        &self.rows
    }

    pub fn matrix(&self) -> &SparseMatrix {
        &self.a
    }

    /// Nonzeros in the Cholesky factor of the Gram matrix.
    pub fn factor_nnz(&self) -> usize {
        self.chol.nnz()
    }

    /// `δ = A_i⁺ r`, the minimum 2-norm solution of `A_i δ = r`.
    pub fn minnorm_solve(&self, r: &[f64]) -> Result<Vec<f64>, FactorError> {
        let m = self.block_rows();
        if r.len() != m {
            return Err(FactorError::Length {
                expected: m,
                found: r.len(),
            });
        }
        Ok(self.solve_unchecked(r))
    }

    /// `P_i x = A_i⁺ A_i x`, the orthogonal projection onto the row space.
    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>, FactorError> {
        let n = self.ncols();
        if x.len() != n {
            return Err(FactorError::Length {
                expected: n,
                found: x.len(),
            });
        }
        let ax = self.a.spmv(x).expect("length checked");
        Ok(self.solve_unchecked(&ax))
    }

    /// `A_i⁺ (f_i − A_i x)` with `f_i` gathered from the full right-hand side.
    pub fn residual_correction(&self, f: &[f64], x: &[f64]) -> Result<Vec<f64>, FactorError> {
        if x.len() != self.ncols() {
            return Err(FactorError::Length {
                expected: self.ncols(),
                found: x.len(),
            });
        }
        let mut r = self.a.spmv(x).expect("length checked");
        for (ri, &g) in r.iter_mut().zip(&self.rows) {
            let fi = *f.get(g).ok_or(FactorError::Length {
                expected: g + 1,
                found: f.len(),
            })?;
            *ri = fi - *ri;
        }
        Ok(self.solve_unchecked(&r))
    }

    /// Gathers this block's entries of a full-length vector.
    pub fn gather(&self, f: &[f64]) -> Vec<f64> {
        self.rows.iter().map(|&g| f[g]).collect()
    }

    fn solve_unchecked(&self, r: &[f64]) -> Vec<f64> {
        let m = self.block_rows();
        let mut work = vec![0.0; m];
        let mut y = r.to_vec();
        self.chol.solve_in_place(&mut y, &mut work);
        let mut delta = vec![0.0; self.ncols()];
        self.a.spmv_transpose_add(&y, &mut delta).expect("lengths match");

        let mut s = self.a.spmv(&delta).expect("lengths match");
        for (si, ri) in s.iter_mut().zip(r) {
            *si = ri - *si;
        }
        self.chol.solve_in_place(&mut s, &mut work);
        self.a.spmv_transpose_add(&s, &mut delta).expect("lengths match");
        delta
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::{dot, norm2};
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_block(rng: &mut ChaCha8Rng, m: usize, n: usize) -> SparseMatrix {
        let mut t = Vec::new();
        for i in 0..m {
            for j in 0..n {
                if rng.random::<f64>() < 0.15 {
                    t.push((i, j, rng.random_range(-1.0..1.0)));
                }
            }
            t.push((i, rng.random_range(0..n), 1.0));
        }
        SparseMatrix::from_triplets(m, n, &t).unwrap()
    }

    fn pinv_oracle(a: &SparseMatrix) -> DMatrix<f64> {
        let d = DMatrix::from_row_slice(a.nrows(), a.ncols(), &a.to_dense());
        d.pseudo_inverse(1e-12).unwrap()
    }

    #[test]
    fn identity_block() {
        let f = factorize_block(&SparseMatrix::identity(5), 0).unwrap();
        let r = [1.0, -2.0, 3.0, 0.5, 7.0];
        assert_eq!(f.minnorm_solve(&r).unwrap(), r.to_vec());
        assert_eq!(f.minnorm_solve(&[0.0; 5]).unwrap(), vec![0.0; 5]);
    }

    #[test]
    fn single_row() {
        let a = SparseMatrix::from_triplets(1, 4, &[(0, 0, 1.0)]).unwrap();
        let f = factorize_block(&a, 0).unwrap();
        assert_eq!(f.minnorm_solve(&[2.5]).unwrap(), vec![2.5, 0.0, 0.0, 0.0]);
        let u = SparseMatrix::from_triplets(1, 3, &[(0, 0, 0.6), (0, 2, 0.8)]).unwrap();
        let f = factorize_block(&u, 0).unwrap();
        let x = [1.0, 5.0, -2.0];
        let px = f.project(&x).unwrap();
        let s = 0.6 * 1.0 + 0.8 * -2.0;
        for (p, e) in px.iter().zip([0.6 * s, 0.0, 0.8 * s]) {
            assert!((p - e).abs() < 1e-15);
        }
    }

    #[test]
    fn orthonormal_rows_give_transpose() {
        let a = SparseMatrix::from_triplets(2, 4, &[(0, 1, 1.0), (1, 0, 0.6), (1, 3, 0.8)]).unwrap();
        let f = factorize_block(&a, 0).unwrap();
        let d = f.minnorm_solve(&[2.0, 5.0]).unwrap();
        assert_eq!(d, vec![3.0, 2.0, 0.0, 4.0]);
    }

    #[test]
    fn null_space_projects_to_zero() {
        let a = SparseMatrix::from_triplets(1, 3, &[(0, 0, 1.0), (0, 1, 1.0)]).unwrap();
        let f = factorize_block(&a, 0).unwrap();
        assert!(norm2(&f.project(&[1.0, -1.0, 0.0]).unwrap()) < 1e-15);
    }

    #[test]
    fn matches_pseudoinverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let a = random_block(&mut rng, 20, 60);
        let f = factorize_block(&a, 0).unwrap();
        let pinv = pinv_oracle(&a);
        let r: Vec<f64> = (0..20).map(|_| rng.random_range(-1.0..1.0)).collect();
        let d = f.minnorm_solve(&r).unwrap();
        let e = &pinv * nalgebra::DVector::from_column_slice(&r);
        let err: f64 = d.iter().zip(e.iter()).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        assert!(err <= 1e-10, "error {err}");
        let ad = a.spmv(&d).unwrap();
        let res: f64 = ad.iter().zip(&r).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        assert!(res <= 1e-12 * (1.0 + norm2(&r)));
    }

    #[test]
    fn projector_trace_is_rank() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let a = random_block(&mut rng, 12, 30);
        let f = factorize_block(&a, 0).unwrap();
        let mut trace = 0.0;
        for j in 0..30 {
            let mut e = vec![0.0; 30];
            e[j] = 1.0;
            trace += f.project(&e).unwrap()[j];
        }
        assert!((trace - 12.0).abs() < 1e-8, "trace {trace}");
    }

    #[test]
    fn rank_deficiency_is_reported() {
        let a = SparseMatrix::from_triplets(2, 3, &[(0, 0, 1.0), (0, 1, 2.0), (1, 0, 1.0), (1, 1, 2.0)]).unwrap();
        let e = factorize_block(&a, 7).unwrap_err();
        assert!(matches!(e, FactorError::RankDeficient { block: 7, .. }), "{e}");
        let tall = SparseMatrix::identity(3).select_rows(&[0, 1, 2]);
        assert!(factorize_block(&tall, 0).is_ok());
        let wide = SparseMatrix::from_triplets(3, 2, &[(0, 0, 1.0), (1, 1, 1.0), (2, 0, 1.0)]).unwrap();
        assert!(matches!(factorize_block(&wide, 1), Err(FactorError::TooManyRows { .. })));
    }

    #[test]
    fn length_errors() {
        let f = factorize_block(&SparseMatrix::identity(3), 0).unwrap();
        assert!(f.minnorm_solve(&[1.0]).is_err());
        assert!(f.project(&[1.0]).is_err());
    }

    #[test]
    fn partition_factors_keep_global_rows() {
        let a = SparseMatrix::identity(6);
        let p = Partition::new(vec![1, 0, 1, 0, 1, 0], 2).unwrap();
        let fs = factorize_partition(&a, &p).unwrap();
        assert_eq!(fs[0].rows(), &[1, 3, 5]);
        assert_eq!(fs[1].rows(), &[0, 2, 4]);
        let f = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let d = fs[1].residual_correction(&f, &[0.0; 6]).unwrap();
        assert_eq!(d, vec![1.0, 0.0, 3.0, 0.0, 5.0, 0.0]);
    }

    proptest::proptest! {
        #[test]
        fn idempotent_and_symmetric(seed in 0u64..200, m in 2usize..15) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = 40;
            let a = random_block(&mut rng, m, n);
            let f = factorize_block(&a, 0).unwrap();
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let y: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let px = f.project(&x).unwrap();
            let ppx = f.project(&px).unwrap();
            let diff: f64 = px.iter().zip(&ppx).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            proptest::prop_assert!(diff <= 1e-10 * norm2(&x));
            let py = f.project(&y).unwrap();
            let (l, r) = (dot(&px, &y), dot(&x, &py));
            proptest::prop_assert!((l - r).abs() <= 1e-10 * (1.0 + l.abs()));
        }
    }
}
