use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use cimmino_core::partition::{self, Partition};
use cimmino_core::projector::{self, BlockFactor};
use cimmino_core::ripgraph::{self, GraphOptions, VertexWeights};
use cimmino_core::spectrum as spectra;
use cimmino_core::{scaling, solver, sparse};

fn err(e: impl Into<cimmino_core::Error>) -> PyErr {
    PyValueError::new_err(e.into().to_string())
}

#[pyclass(name = "SparseMatrix", module = "cimmino", from_py_object)]
#[derive(Clone)]
struct PySparseMatrix {
    inner: sparse::SparseMatrix,
}

#[pymethods]
impl PySparseMatrix {
    /// Builds a matrix from coordinate lists; duplicates are summed.
    #[staticmethod]
    fn from_triplets(nrows: usize, ncols: usize, rows: Vec<usize>, cols: Vec<usize>, vals: Vec<f64>) -> PyResult<Self> {
        if rows.len() != cols.len() || rows.len() != vals.len() {
            return Err(PyValueError::new_err("rows, cols and vals must have equal length"));
        }
        let t: Vec<_> = rows.into_iter().zip(cols).zip(vals).map(|((i, j), v)| (i, j, v)).collect();
        let inner = sparse::SparseMatrix::from_triplets(nrows, ncols, &t).map_err(err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn from_dense(rows: Vec<Vec<f64>>) -> PyResult<Self> {
        let m = rows.len();
        let n = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n) {
            return Err(PyValueError::new_err("ragged rows"));
        }
        let flat: Vec<f64> = rows.into_iter().flatten().collect();
        Ok(Self {
            inner: sparse::SparseMatrix::from_dense(m, n, &flat),
        })
    }

    #[staticmethod]
    fn identity(n: usize) -> Self {
        Self {
            inner: sparse::SparseMatrix::identity(n),
        }
    }

    /// Reads a Matrix Market coordinate file.
    #[staticmethod]
    fn read(path: &str) -> PyResult<Self> {
        Ok(Self {
            inner: sparse::read_matrix_market(path).map_err(err)?,
        })
    }

    fn write(&self, path: &str) -> PyResult<()> {
        sparse::write_matrix_market(path, &self.inner).map_err(err)
    }

    #[getter]
    fn nrows(&self) -> usize {
        self.inner.nrows()
    }

    #[getter]
    fn ncols(&self) -> usize {
        self.inner.ncols()
    }

    #[getter]
    fn nnz(&self) -> usize {
        self.inner.nnz()
    }

    fn get(&self, i: usize, j: usize) -> f64 {
        self.inner.get(i, j)
    }

    fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.inner.ncols();
        self.inner.to_dense().chunks(n.max(1)).map(<[f64]>::to_vec).collect()
    }

    fn transpose(&self) -> Self {
        Self {
            inner: self.inner.transpose(),
        }
    }

    fn spmv(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.spmv(&x).map_err(err)
    }

    fn matmul(&self, other: &PySparseMatrix) -> PyResult<Self> {
        Ok(Self {
            inner: self.inner.spgemm(&other.inner).map_err(err)?,
        })
    }

    fn __repr__(&self) -> String {
        format!("SparseMatrix({}x{}, nnz={})", self.inner.nrows(), self.inner.ncols(), self.inner.nnz())
    }
}

#[pyclass(name = "BlockFactor", module = "cimmino")]
struct PyBlockFactor {
    inner: BlockFactor,
}

#[pymethods]
impl PyBlockFactor {
    #[new]
    fn new(block: &PySparseMatrix) -> PyResult<Self> {
        Ok(Self {
            inner: projector::factorize_block(&block.inner, 0).map_err(err)?,
        })
    }

    #[getter]
    fn block_rows(&self) -> usize {
        self.inner.block_rows()
    }

    #[getter]
    fn ncols(&self) -> usize {
        self.inner.ncols()
    }

    fn minnorm_solve(&self, r: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.minnorm_solve(&r).map_err(err)
    }

    fn project(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.project(&x).map_err(err)
    }
}

fn partition_of(assignment: Vec<usize>, k: usize) -> PyResult<Partition> {
    Partition::new(assignment, k).map_err(err)
}

/// Returns `(scaled, row_scale, col_scale)`.
#[pyfunction]
#[pyo3(signature = (a, max_sweeps = scaling::DEFAULT_MAX_SWEEPS, tol = scaling::DEFAULT_TOL))]
fn equilibrate(a: &PySparseMatrix, max_sweeps: usize, tol: f64) -> PyResult<(PySparseMatrix, Vec<f64>, Vec<f64>)> {
    let (b, rec) = scaling::equilibrate_inf(&a.inner, max_sweeps, tol).map_err(err)?;
    Ok((PySparseMatrix { inner: b }, rec.row_scale, rec.col_scale))
}

/// Returns `(scaled_a, scaled_f)` with unit 2-norm rows.
#[pyfunction]
fn row_unit_2norm(a: &PySparseMatrix, f: Vec<f64>) -> PyResult<(PySparseMatrix, Vec<f64>)> {
    let (b, g, _) = scaling::row_unit_2norm(&a.inner, &f).map_err(err)?;
    Ok((PySparseMatrix { inner: b }, g))
}

#[pyfunction]
fn make_rhs(a: &PySparseMatrix) -> Vec<f64> {
    solver::make_rhs(&a.inner)
}

#[pyfunction]
fn backward_error(a: &PySparseMatrix, x: Vec<f64>, f: Vec<f64>) -> PyResult<f64> {
    solver::backward_error(&a.inner, &x, &f).map_err(err)
}

#[pyfunction]
fn uniform_partition(nrows: usize, k: usize) -> PyResult<Vec<usize>> {
    Ok(partition::uniform_partition(nrows, k).map_err(err)?.assignment().to_vec())
}

fn graph_options(alpha: u64, drop_tol: f64, vertex_weights: &str) -> PyResult<GraphOptions> {
    let vertex_weights = match vertex_weights {
        "unit" => VertexWeights::Unit,
        "nnz" => VertexWeights::Nnz,
        other => return Err(PyValueError::new_err(format!("unknown vertex weights `{other}`"))),
    };
    Ok(GraphOptions {
        alpha,
        drop_tol,
        vertex_weights,
    })
}

/// Partitions the row inner-product graph of `a` (after dense-column
/// sparsification) into `k` parts.
#[pyfunction]
#[pyo3(signature = (a, k, epsilon = partition::DEFAULT_EPSILON, seed = 0, alpha = ripgraph::DEFAULT_ALPHA, drop_tol = ripgraph::DEFAULT_DROP_TOL, vertex_weights = "unit"))]
fn gp_partition(
    a: &PySparseMatrix,
    k: usize,
    epsilon: f64,
    seed: u64,
    alpha: u64,
    drop_tol: f64,
    vertex_weights: &str,
) -> PyResult<Vec<usize>> {
    let opts = graph_options(alpha, drop_tol, vertex_weights)?;
    let g = ripgraph::build_rip_graph(&ripgraph::sparsify_dense_columns(&a.inner), &opts).map_err(err)?;
    Ok(partition::gp_partition(&g, k, epsilon, seed).map_err(err)?.assignment().to_vec())
}

/// Returns a dict with cutsize, interip, imbalance and ip_matrix.
#[pyfunction]
#[pyo3(signature = (a, assignment, k, alpha = ripgraph::DEFAULT_ALPHA, drop_tol = ripgraph::DEFAULT_DROP_TOL))]
fn evaluate_partition<'py>(
    py: Python<'py>,
    a: &PySparseMatrix,
    assignment: Vec<usize>,
    k: usize,
    alpha: u64,
    drop_tol: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let p = partition_of(assignment, k)?;
    let g = ripgraph::build_rip_graph(&a.inner, &graph_options(alpha, drop_tol, "unit")?).map_err(err)?;
    let q = partition::evaluate_partition(&a.inner, &g, &p);
    let d = PyDict::new(py);
    d.set_item("cutsize", q.cutsize)?;
    d.set_item("interip", q.interip)?;
    d.set_item("imbalance", q.imbalance)?;
    d.set_item("ip_matrix", q.ip_matrix)?;
    Ok(d)
}

/// Runs block Cimmino (CG by default) on `a x = f` with the given row
/// partition, from `x = 0`.
#[pyfunction]
#[pyo3(signature = (a, f, assignment, k, tol = solver::DEFAULT_TOL, max_iters = solver::DEFAULT_MAX_ITERS, variant = "cg", omega = 1.0))]
#[allow(clippy::too_many_arguments)]
fn solve<'py>(
    py: Python<'py>,
    a: &PySparseMatrix,
    f: Vec<f64>,
    assignment: Vec<usize>,
    k: usize,
    tol: f64,
    max_iters: usize,
    variant: &str,
    omega: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let variant = match variant {
        "cg" => solver::Variant::Cg,
        "fixed_point" => solver::Variant::FixedPoint,
        other => return Err(PyValueError::new_err(format!("unknown variant `{other}`"))),
    };
    let p = partition_of(assignment, k)?;
    let blocks = projector::factorize_partition(&a.inner, &p).map_err(err)?;
    let cfg = solver::SolveConfig {
        tol,
        max_iters,
        omega,
        variant,
    };
    let rep = py
        .detach(|| solver::solve(&a.inner, &f, &blocks, &cfg))
        .map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("converged", rep.converged)?;
    d.set_item("iters", rep.iters)?;
    d.set_item("backward_error", rep.final_backward_error())?;
    d.set_item("backward_error_history", rep.backward_error_history)?;
    d.set_item("x", rep.final_x)?;
    Ok(d)
}

/// Eigenvalues of `H = Σ P_i` for the given partition (dense, small n).
#[pyfunction]
#[pyo3(signature = (a, assignment, k, tau = spectra::DEFAULT_TAU))]
fn spectrum<'py>(
    py: Python<'py>,
    a: &PySparseMatrix,
    assignment: Vec<usize>,
    k: usize,
    tau: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let p = partition_of(assignment, k)?;
    let blocks = projector::factorize_partition(&a.inner, &p).map_err(err)?;
    let n = a.inner.ncols();
    let rep = py
        .detach(|| spectra::spectrum_of(&blocks, n, spectra::DEFAULT_DENSE_CAP, tau))
        .map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("eigenvalues", rep.eigenvalues)?;
    d.set_item("lambda_min", rep.lambda_min)?;
    d.set_item("lambda_max", rep.lambda_max)?;
    d.set_item("kappa", rep.kappa)?;
    d.set_item("cluster_fraction", rep.cluster_fraction)?;
    Ok(d)
}

#[pymodule]
fn cimmino(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySparseMatrix>()?;
    m.add_class::<PyBlockFactor>()?;
    m.add_function(wrap_pyfunction!(equilibrate, m)?)?;
    m.add_function(wrap_pyfunction!(row_unit_2norm, m)?)?;
    m.add_function(wrap_pyfunction!(make_rhs, m)?)?;
    m.add_function(wrap_pyfunction!(backward_error, m)?)?;
    m.add_function(wrap_pyfunction!(uniform_partition, m)?)?;
    m.add_function(wrap_pyfunction!(gp_partition, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate_partition, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(spectrum, m)?)?;
    Ok(())
}
