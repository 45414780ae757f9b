//! Block Cimmino solver for sparse nonsingular systems, accelerated by
//! conjugate gradients, with row partitions chosen by partitioning the row
//! inner-product graph.
//!
//! Typical pipeline:
//!
//! ```
//! use cimmino_core::prelude::*;
//!
//! let a = SparseMatrix::identity(8);
//! let f = make_rhs(&a);
//! let p = uniform_partition(8, 2).unwrap();
//! let blocks = factorize_partition(&a, &p).unwrap();
//! let rep = block_cimmino_cg(&a, &f, &blocks, &SolveConfig::default()).unwrap();
//! assert!(rep.converged);
//! ```

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod partition;
pub mod projector;
pub mod ripgraph;
pub mod scaling;
pub mod solver;
pub mod sparse;
pub mod spectrum;

pub use error::{Error, Result};

pub mod prelude {
    pub use crate::error::{Error, Result};
    pub use crate::partition::{
        evaluate_partition, gp_partition, structural_partition, uniform_partition, Partition, PartitionQuality,
    };
    pub use crate::projector::{factorize_block, factorize_partition, BlockFactor};
    pub use crate::ripgraph::{build_rip_graph, sparsify_dense_columns, GraphOptions, RipGraph, VertexWeights};
    pub use crate::scaling::{equilibrate_inf, row_unit_2norm, unscale_solution, ScalingRecord};
    pub use crate::solver::{
        backward_error, block_cimmino_cg, block_cimmino_fixed, make_rhs, SolveConfig, SolveReport, Variant,
    };
    pub use crate::sparse::{extract_block_rows, read_matrix_market, SparseMatrix};
    pub use crate::spectrum::{build_h_dense, eigen_spectrum, spectrum_compare, SpectrumReport};
}
