//! K-way block-row partitions: the uniform baseline, multilevel
//! partitioning of the row inner-product graph, a structural baseline, and
//! partition scoring.

mod multilevel;

use std::io::{BufRead, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::PartitionError;
use crate::ripgraph::{build_structural_graph, RipGraph, VertexWeights};
use crate::sparse::SparseMatrix;

pub use multilevel::{multilevel_partition, MultilevelParams, RefineTrace};

pub const DEFAULT_EPSILON: f64 = 0.10;

/// Assignment of rows to `k` nonempty parts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    assignment: Vec<usize>,
    k: usize,
    part_sizes: Vec<usize>,
}

impl Partition {
    pub fn new(assignment: Vec<usize>, k: usize) -> Result<Self, PartitionError> {
        let nrows = assignment.len();
        if k == 0 || k > nrows {
            return Err(PartitionError::PartsOutOfRange { k, nrows });
        }
        let mut part_sizes = vec![0; k];
        for (row, &part) in assignment.iter().enumerate() {
            if part >= k {
                return Err(PartitionError::AssignmentOutOfRange { row, part, k });
            }
            part_sizes[part] += 1;
        }
        if let Some(p) = part_sizes.iter().position(|&s| s == 0) {
            return Err(PartitionError::EmptyPart(p));
        }
        Ok(Self {
            assignment,
            k,
            part_sizes,
        })
    }

    /// Contiguous chunks in the original row order; the first `nrows % k`
    /// parts get one extra row.
    pub fn uniform(nrows: usize, k: usize) -> Result<Self, PartitionError> {
        if k == 0 || k > nrows {
            return Err(PartitionError::PartsOutOfRange { k, nrows });
        }
        let (base, extra) = (nrows / k, nrows % k);
        let mut assignment = Vec::with_capacity(nrows);
        for p in 0..k {
            let size = base + usize::from(p < extra);
            assignment.extend(std::iter::repeat_n(p, size));
        }
        Self::new(assignment, k)
    }

    pub fn nrows(&self) -> usize {
        self.assignment.len()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn part_of(&self, row: usize) -> usize {
        self.assignment[row]
    }

    pub fn part_sizes(&self) -> &[usize] {
        &self.part_sizes
    }

    /// Rows of each part, ascending.
    pub fn part_rows(&self) -> Vec<Vec<usize>> {
        let mut rows: Vec<Vec<usize>> = self.part_sizes.iter().map(|&s| Vec::with_capacity(s)).collect();
        for (i, &p) in self.assignment.iter().enumerate() {
            rows[p].push(i);
        }
        rows
    }

    /// Row order of the permuted matrix `PA`: part 0's rows first, then
    /// part 1's, each ascending. Entry `t` is the original index of new row `t`.
    pub fn permutation(&self) -> Vec<usize> {
        self.part_rows().concat()
    }

    /// Sum of vertex weights per part.
    pub fn part_weights(&self, vertex_weights: &[u64]) -> Vec<u64> {
        let mut w = vec![0u64; self.k];
        for (i, &p) in self.assignment.iter().enumerate() {
            w[p] += vertex_weights[i];
        }
        w
    }

    /// max part weight / average part weight − 1.
    pub fn imbalance(&self, vertex_weights: &[u64]) -> f64 {
        let w = self.part_weights(vertex_weights);
        let total: u64 = w.iter().sum();
        let max = *w.iter().max().unwrap_or(&0);
        if total == 0 {
            return 0.0;
        }
        max as f64 * self.k as f64 / total as f64 - 1.0
    }

    /// Text form: `nrows K` on the first line, then one 0-based part id per row.
    pub fn write_to<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "{} {}", self.nrows(), self.k)?;
        for &p in &self.assignment {
            writeln!(w, "{p}")?;
        }
        Ok(())
    }

    pub fn write_file(&self, path: impl AsRef<Path>) -> Result<(), PartitionError> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(|e| PartitionError::Io(e.to_string()))?);
        self.write_to(&mut f)
            .and_then(|_| f.flush())
            .map_err(|e| PartitionError::Io(e.to_string()))
    }

    pub fn read_from<R: BufRead>(r: R) -> Result<Self, PartitionError> {
        let perr = |line: usize, msg: &str| PartitionError::Parse { line, msg: msg.to_string() };
        let mut lines = r.lines().enumerate().map(|(i, l)| (i + 1, l));
        let (_, header) = lines.next().ok_or_else(|| perr(1, "empty file"))?;
        let header = header.map_err(|e| PartitionError::Io(e.to_string()))?;
        let mut tok = header.split_whitespace();
        let mut field = || -> Result<usize, PartitionError> {
            tok.next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| perr(1, "expected `nrows K`"))
        };
        let (nrows, k) = (field()?, field()?);
        let mut assignment = Vec::with_capacity(nrows);
        for (lno, line) in lines {
            let line = line.map_err(|e| PartitionError::Io(e.to_string()))?;
            let t = line.trim();
            if t.is_empty() {
                continue;
            }
            assignment.push(t.parse().map_err(|_| perr(lno, "expected a part id"))?);
        }
        if assignment.len() != nrows {
            return Err(PartitionError::RowCountMismatch {
                expected: nrows,
                found: assignment.len(),
            });
        }
        Self::new(assignment, k)
    }

    pub fn read_file(path: impl AsRef<Path>) -> Result<Self, PartitionError> {
        let f = std::fs::File::open(path).map_err(|e| PartitionError::Io(e.to_string()))?;
        Self::read_from(std::io::BufReader::new(f))
    }
}

/// Quality of a partition measured two ways: cutsize on the graph, and
/// inter-block inner products recomputed from the matrix rows.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PartitionQuality {
    pub cutsize: f64,
    /// Integer-weight cut, the quantity the partitioner minimizes.
    pub weight_cut: u64,
    pub interip: f64,
    /// `ip[k][m]` = Σ |r_i r_jᵀ| over rows i in part k, j in part m; zero diagonal.
    pub ip_matrix: Vec<Vec<f64>>,
    pub imbalance: f64,
}

/// Sum of graph costs and integer weights over edges whose endpoints lie in
/// different parts.
pub fn cut_of(g: &RipGraph, assignment: &[usize]) -> (f64, u64) {
    let mut cost = 0.0;
    let mut weight = 0u64;
    for (u, v, c, w) in g.edges() {
        if assignment[u] != assignment[v] {
            cost += c;
            weight += w;
        }
    }
    (cost, weight)
}

/// Inter-block inner-product matrix of `p`, computed from the rows of `a`.
pub fn inter_block_inner_products(a: &SparseMatrix, p: &Partition) -> Vec<Vec<f64>> {
    let k = p.k();
    let n = a.nrows();
    let at = a.transpose();
    let assignment = p.assignment();
    // per-row contributions are gathered in parallel and summed in row order
    let contributions: Vec<Vec<(usize, usize, f64)>> = (0..n)
        .into_par_iter()
        .map_init(
            || (vec![0.0f64; n], vec![usize::MAX; n]),
            |(acc, mark), i| {
                let pi = assignment[i];
                let mut touched = Vec::new();
                let (cols, vals) = a.row(i);
                for (&c, &aic) in cols.iter().zip(vals) {
                    let (rows, cvals) = at.row(c);
                    let start = rows.partition_point(|&j| j <= i);
                    for (&j, &ajc) in rows[start..].iter().zip(&cvals[start..]) {
                        if assignment[j] == pi {
                            continue;
                        }
                        if mark[j] != i {
                            mark[j] = i;
                            acc[j] = 0.0;
                            touched.push(j);
                        }
                        acc[j] += aic * ajc;
                    }
                }
                touched.sort_unstable();
                touched.into_iter().map(|j| (pi, assignment[j], acc[j].abs())).collect()
            },
        )
        .collect();
    let mut ip = vec![vec![0.0; k]; k];
    for (pi, pj, v) in contributions.into_iter().flatten() {
        ip[pi][pj] += v;
        ip[pj][pi] += v;
    }
    ip
}

pub fn evaluate_partition(a: &SparseMatrix, g: &RipGraph, p: &Partition) -> PartitionQuality {
    let (cutsize, weight_cut) = cut_of(g, p.assignment());
    let ip_matrix = inter_block_inner_products(a, p);
    let k = p.k();
    let interip = (0..k).flat_map(|r| ((r + 1)..k).map(move |m| (r, m))).map(|(r, m)| ip_matrix[r][m]).sum();
    PartitionQuality {
        cutsize,
        weight_cut,
        interip,
        ip_matrix,
        imbalance: p.imbalance(g.vertex_weights()),
    }
}

pub fn uniform_partition(nrows: usize, k: usize) -> Result<Partition, PartitionError> {
    Partition::uniform(nrows, k)
}

fn check_args(nverts: usize, k: usize, epsilon: f64) -> Result<(), PartitionError> {
    if k == 0 || k > nverts {
        return Err(PartitionError::PartsOutOfRange { k, nrows: nverts });
    }
    if !(epsilon >= 0.0) || !epsilon.is_finite() {
        return Err(PartitionError::InvalidEpsilon(epsilon));
    }
    Ok(())
}

/// Multilevel K-way partition of the row inner-product graph.
pub fn gp_partition(g: &RipGraph, k: usize, epsilon: f64, seed: u64) -> Result<Partition, PartitionError> {
    check_args(g.nverts(), k, epsilon)?;
    let params = MultilevelParams::new(k, epsilon, seed);
    let (assignment, _) = multilevel_partition(g, &params);
    Partition::new(assignment, k)
}

/// Like [`gp_partition`], also returning the per-pass refinement trace.
pub fn gp_partition_traced(
    g: &RipGraph,
    k: usize,
    epsilon: f64,
    seed: u64,
) -> Result<(Partition, RefineTrace), PartitionError> {
    check_args(g.nverts(), k, epsilon)?;
    let params = MultilevelParams::new(k, epsilon, seed);
    let (assignment, trace) = multilevel_partition(g, &params);
    Ok((Partition::new(assignment, k)?, trace))
}

/// Structural baseline: the same multilevel partitioner on the
/// clique-expanded column-net model, where the edge cost between two rows is
/// the number of columns they share. Numerical values play no role.
pub fn structural_partition(
    a: &SparseMatrix,
    k: usize,
    epsilon: f64,
    seed: u64,
) -> Result<Partition, PartitionError> {
    check_args(a.nrows(), k, epsilon)?;
    let g = build_structural_graph(a, VertexWeights::Unit);
    gp_partition(&g, k, epsilon, seed)
}
