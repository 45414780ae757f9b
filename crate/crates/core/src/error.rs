use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SparseError {
    #[error("dimension mismatch: {op} expects {expected}, got {found}")]
    DimensionMismatch {
        op: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("invalid CSR structure: {0}")]
    InvalidStructure(String),
    #[error("index ({row}, {col}) out of range for {nrows}x{ncols} matrix")]
    IndexOutOfRange {
        row: usize,
        col: usize,
        nrows: usize,
        ncols: usize,
    },
    #[error("part {0} of the partition is empty")]
    EmptyBlock(usize),
}

#[derive(Debug, Error)]
pub enum MtxError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

impl MtxError {
    pub(crate) fn at(line: usize, msg: impl Into<String>) -> Self {
        MtxError::Parse {
            line,
            msg: msg.into(),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ScalingError {
    #[error("row {0} has no nonzero entries")]
    EmptyRow(usize),
    #[error("column {0} has no nonzero entries")]
    EmptyColumn(usize),
    #[error("right-hand side has length {found}, matrix has {expected} rows")]
    RhsLength { expected: usize, found: usize },
    #[error("scaling vector has length {found}, expected {expected}")]
    ScaleLength { expected: usize, found: usize },
}

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("row inner-product graph needs a square matrix, got {nrows}x{ncols}")]
    NotSquare { nrows: usize, ncols: usize },
    #[error("alpha must be positive")]
    InvalidAlpha,
    #[error("malformed graph: {0}")]
    Malformed(String),
}

#[derive(Debug, Error, PartialEq)]
pub enum PartitionError {
    #[error("number of parts {k} out of range for {nrows} rows")]
    PartsOutOfRange { k: usize, nrows: usize },
    #[error("epsilon must be non-negative and finite, got {0}")]
    InvalidEpsilon(f64),
    #[error("row {row} assigned to part {part}, but K = {k}")]
    AssignmentOutOfRange { row: usize, part: usize, k: usize },
    #[error("part {0} is empty")]
    EmptyPart(usize),
    #[error("partition has {found} rows, expected {expected}")]
    RowCountMismatch { expected: usize, found: usize },
    #[error("io error: {0}")]
    Io(String),
    #[error("partition file line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

#[derive(Debug, Error, PartialEq)]
pub enum FactorError {
    #[error("block {block}: rank deficient (pivot {pivot:e} at local row {row}, threshold {threshold:e})")]
    RankDeficient {
        block: usize,
        row: usize,
        pivot: f64,
        threshold: f64,
    },
    #[error("block {block}: {rows} rows exceed {cols} columns")]
    TooManyRows {
        block: usize,
        rows: usize,
        cols: usize,
    },
    #[error("block {0} has no rows")]
    EmptyBlock(usize),
    #[error("ordering failed: {0}")]
    Ordering(String),
    #[error("vector length {found}, expected {expected}")]
    Length { expected: usize, found: usize },
}

#[derive(Debug, Error, PartialEq)]
pub enum SolverError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("blocks cover {found} rows, matrix has {expected}")]
    Coverage { expected: usize, found: usize },
    #[error("loss of positive definiteness at iteration {iter} (p'Hp = {curvature:e})")]
    LostPositiveDefiniteness { iter: usize, curvature: f64 },
    #[error(transparent)]
    Sparse(#[from] SparseError),
    #[error(transparent)]
    Factor(#[from] FactorError),
}

#[derive(Debug, Error, PartialEq)]
pub enum SpectrumError {
    #[error("n = {n} exceeds the dense cap {cap}; use a smaller matrix or raise the cap")]
    TooLarge { n: usize, cap: usize },
    #[error("matrix not symmetric: max |H - H'| = {0:e}")]
    NotSymmetric(f64),
    #[error("eigensolver failed: {0}")]
    Eigen(String),
    #[error("spectra have different sizes ({0} vs {1})")]
    SizeMismatch(usize, usize),
    #[error(transparent)]
    Factor(#[from] FactorError),
}

/// Top-level error; the prefix names the module that failed.
#[derive(Debug, Error)]
pub enum Error {
    #[error("sparse: {0}")]
    Sparse(#[from] SparseError),
    #[error("mtx: {0}")]
    Mtx(#[from] MtxError),
    #[error("scaling: {0}")]
    Scaling(#[from] ScalingError),
    #[error("ripgraph: {0}")]
    Graph(#[from] GraphError),
    #[error("partition: {0}")]
    Partition(#[from] PartitionError),
    #[error("projector: {0}")]
    Factor(#[from] FactorError),
    #[error("solver: {0}")]
    Solver(#[from] SolverError),
    #[error("spectrum: {0}")]
    Spectrum(#[from] SpectrumError),
    #[error("cli: {0}")]
    Cli(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
