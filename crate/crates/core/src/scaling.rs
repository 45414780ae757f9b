//! Two-stage preprocessing: alternating infinity-norm equilibration of rows
//! and columns, then exact unit 2-norm row normalization.

use crate::error::ScalingError;
use crate::sparse::SparseMatrix;

pub const DEFAULT_MAX_SWEEPS: usize = 20;
pub const DEFAULT_TOL: f64 = 1e-8;

/// Accumulated diagonal factors: `scaled = diag(row_scale) · A · diag(col_scale)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingRecord {
    pub row_scale: Vec<f64>,
    pub col_scale: Vec<f64>,
    /// Sweeps that actually modified the matrix (zero at a fixed point).
    pub sweeps: usize,
}

impl ScalingRecord {
    pub fn identity(nrows: usize, ncols: usize) -> Self {
        Self {
            row_scale: vec![1.0; nrows],
            col_scale: vec![1.0; ncols],
            sweeps: 0,
        }
    }

    /// Record of applying `self` first and `then` afterwards.
    pub fn compose(&self, then: &ScalingRecord) -> ScalingRecord {
        ScalingRecord {
            row_scale: self.row_scale.iter().zip(&then.row_scale).map(|(a, b)| a * b).collect(),
            col_scale: self.col_scale.iter().zip(&then.col_scale).map(|(a, b)| a * b).collect(),
            sweeps: self.sweeps + then.sweeps,
        }
    }

    /// Applies the row factors to a right-hand side.
    pub fn scale_rhs(&self, f: &[f64]) -> Result<Vec<f64>, ScalingError> {
        if f.len() != self.row_scale.len() {
            return Err(ScalingError::RhsLength {
                expected: self.row_scale.len(),
                found: f.len(),
            });
        }
        Ok(f.iter().zip(&self.row_scale).map(|(v, s)| v * s).collect())
    }
}

fn check_nonempty(a: &SparseMatrix) -> Result<(), ScalingError> {
    if let Some(i) = (0..a.nrows()).find(|&i| a.row_nnz(i) == 0) {
        return Err(ScalingError::EmptyRow(i));
    }
    if let Some(j) = a.col_counts().iter().position(|&c| c == 0) {
        return Err(ScalingError::EmptyColumn(j));
    }
    Ok(())
}

/// Sweeps `A ← diag(1/√rmax) · A · diag(1/√cmax)` until every row and
/// column maximum lies in `[1 - tol, 1 + tol]` or `max_sweeps` is reached.
pub fn equilibrate_inf(
    a: &SparseMatrix,
    max_sweeps: usize,
    tol: f64,
) -> Result<(SparseMatrix, ScalingRecord), ScalingError> {
    check_nonempty(a)?;
    let mut rec = ScalingRecord::identity(a.nrows(), a.ncols());
    let mut cur = a.clone();
    let within = |m: &[f64]| m.iter().all(|&v| (v - 1.0).abs() <= tol);
    for _ in 0..max_sweeps {
        let rmax = cur.row_max_abs();
        let cmax = cur.col_max_abs();
        if within(&rmax) && within(&cmax) {
            break;
        }
        let r: Vec<f64> = rmax.iter().map(|m| 1.0 / m.sqrt()).collect();
        let c: Vec<f64> = cmax.iter().map(|m| 1.0 / m.sqrt()).collect();
        cur = cur.scaled(Some(&r), Some(&c));
        for (acc, f) in rec.row_scale.iter_mut().zip(&r) {
            *acc *= f;
        }
        for (acc, f) in rec.col_scale.iter_mut().zip(&c) {
            *acc *= f;
        }
        rec.sweeps += 1;
    }
    Ok((cur, rec))
}

/// Divides each equation (row of `A` and entry of `f`) by the row's 2-norm.
pub fn row_unit_2norm(
    a: &SparseMatrix,
    f: &[f64],
) -> Result<(SparseMatrix, Vec<f64>, ScalingRecord), ScalingError> {
    if f.len() != a.nrows() {
        return Err(ScalingError::RhsLength {
            expected: a.nrows(),
            found: f.len(),
        });
    }
    let norms = a.row_norms2();
    if let Some(i) = norms.iter().position(|&n| n == 0.0) {
        return Err(ScalingError::EmptyRow(i));
    }
    let r: Vec<f64> = norms.iter().map(|n| 1.0 / n).collect();
    let scaled = a.scaled(Some(&r), None);
    let f_scaled = f.iter().zip(&r).map(|(v, s)| v * s).collect();
    let rec = ScalingRecord {
        row_scale: r,
        col_scale: vec![1.0; a.ncols()],
        sweeps: 1,
    };
    Ok((scaled, f_scaled, rec))
}

/// Maps a solution of the scaled system back: `x[j] = col_scale[j] · x_scaled[j]`.
pub fn unscale_solution(x_scaled: &[f64], rec: &ScalingRecord) -> Result<Vec<f64>, ScalingError> {
    if x_scaled.len() != rec.col_scale.len() {
        return Err(ScalingError::ScaleLength {
            expected: rec.col_scale.len(),
            found: x_scaled.len(),
        });
    }
    Ok(x_scaled.iter().zip(&rec.col_scale).map(|(x, c)| x * c).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_full_support(rng: &mut ChaCha8Rng, n: usize) -> SparseMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            // keep the diagonal so no row or column is empty
            t.push((i, i, rng.random_range(0.5..50.0)));
            for _ in 0..4 {
                let j = rng.random_range(0..n);
                let mag = 10f64.powf(rng.random_range(-3.0..3.0));
                t.push((i, j, if rng.random::<bool>() { mag } else { -mag }));
            }
        }
        SparseMatrix::from_triplets(n, n, &t).unwrap()
    }

    #[test]
    fn equilibrated_matrix_is_a_fixed_point() {
        let a = SparseMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (0, 1, -0.5), (1, 1, -1.0)]).unwrap();
        let (b, rec) = equilibrate_inf(&a, 20, 1e-8).unwrap();
        assert_eq!(a, b);
        assert_eq!(rec.sweeps, 0);
        assert!(rec.row_scale.iter().chain(&rec.col_scale).all(|&s| s == 1.0));
    }

    #[test]
    fn diagonal_case() {
        let a = SparseMatrix::from_triplets(2, 2, &[(0, 0, 4.0), (1, 1, 9.0)]).unwrap();
        let (b, rec) = equilibrate_inf(&a, 20, 1e-8).unwrap();
        assert_eq!(b.get(0, 0), 1.0);
        assert_eq!(b.get(1, 1), 1.0);
        assert!((rec.row_scale[0] * rec.col_scale[0] - 0.25).abs() < 1e-15);
        assert!((rec.row_scale[1] * rec.col_scale[1] - 1.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn random_matrix_converges_and_is_idempotent() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = random_full_support(&mut rng, 100);
        let (b, rec) = equilibrate_inf(&a, 200, 1e-10).unwrap();
        for m in b.row_max_abs().iter().chain(&b.col_max_abs()) {
            assert!((m - 1.0).abs() <= 1e-8, "max {m}");
        }
        // the record reproduces the scaled matrix
        let again = a.scaled(Some(&rec.row_scale), Some(&rec.col_scale));
        for (x, y) in again.values().iter().zip(b.values()) {
            assert!((x - y).abs() <= 1e-12 * x.abs());
        }
        assert!(rec.row_scale.iter().chain(&rec.col_scale).all(|s| s.is_finite() && *s > 0.0));
        let (_, rec2) = equilibrate_inf(&b, 200, 1e-8).unwrap();
        assert_eq!(rec2.sweeps, 0);
    }

    #[test]
    fn empty_row_and_column_rejected() {
        let a = SparseMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (0, 1, 1.0)]).unwrap();
        assert_eq!(equilibrate_inf(&a, 20, 1e-8).unwrap_err(), ScalingError::EmptyRow(1));
        let a = SparseMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (1, 0, 1.0)]).unwrap();
        assert_eq!(equilibrate_inf(&a, 20, 1e-8).unwrap_err(), ScalingError::EmptyColumn(1));
        assert!(row_unit_2norm(&a, &[1.0, 1.0]).is_ok());
        let z = SparseMatrix::from_triplets(2, 2, &[(0, 0, 1.0)]).unwrap();
        assert_eq!(row_unit_2norm(&z, &[1.0, 1.0]).unwrap_err(), ScalingError::EmptyRow(1));
    }

    #[test]
    fn three_four_five() {
        let a = SparseMatrix::from_triplets(1, 2, &[(0, 0, 3.0), (0, 1, 4.0)]).unwrap();
        let (b, f, rec) = row_unit_2norm(&a, &[10.0]).unwrap();
        assert!((b.get(0, 0) - 0.6).abs() < 1e-15);
        assert!((b.get(0, 1) - 0.8).abs() < 1e-15);
        assert!((f[0] - 2.0).abs() < 1e-15);
        assert!((rec.row_scale[0] - 0.2).abs() < 1e-16);

        let u = SparseMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (1, 0, 0.6), (1, 1, 0.8)]).unwrap();
        let (v, _, _) = row_unit_2norm(&u, &[1.0, 1.0]).unwrap();
        for (x, y) in u.values().iter().zip(v.values()) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn random_rows_have_unit_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let a = random_full_support(&mut rng, 80);
        let f = vec![1.0; 80];
        let (b, _, _) = row_unit_2norm(&a, &f).unwrap();
        for n in b.row_norms2() {
            assert!((n - 1.0).abs() <= 1e-14);
        }
    }

    #[test]
    fn unscale_cases() {
        let rec = ScalingRecord::identity(3, 3);
        assert_eq!(unscale_solution(&[1.0, 2.0, 3.0], &rec).unwrap(), vec![1.0, 2.0, 3.0]);

        // 2x = 2
        let a = SparseMatrix::from_triplets(1, 1, &[(0, 0, 2.0)]).unwrap();
        let (b, rec) = equilibrate_inf(&a, 20, 1e-8).unwrap();
        assert!((b.get(0, 0) - 1.0).abs() < 1e-15);
        let f = rec.scale_rhs(&[2.0]).unwrap();
        let y = f[0] / b.get(0, 0);
        let x = unscale_solution(&[y], &rec).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-15);
        assert!(unscale_solution(&[1.0], &ScalingRecord::identity(2, 2)).is_err());
    }
}
