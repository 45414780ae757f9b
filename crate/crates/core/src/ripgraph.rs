//! Row inner-product graph.
//!
//! One vertex per row of `A`, one edge per nonzero off-diagonal entry of
//! `C = A·Aᵀ`. The edge cost is `|c_ij|`; the integer weight handed to the
//! partitioner is `⌈alpha · cost⌉`.

use std::io::Write;

use serde::Serialize;

use crate::error::GraphError;
use crate::sparse::SparseMatrix;

pub const DEFAULT_ALPHA: u64 = 10_000;
pub const DEFAULT_DROP_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum VertexWeights {
    #[default]
    Unit,
    /// Number of nonzeros in the row.
    Nnz,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraphOptions {
    pub alpha: u64,
    pub drop_tol: f64,
    pub vertex_weights: VertexWeights,
}

impl Default for GraphOptions {
    fn default() -> Self {
        Self {
            alpha: DEFAULT_ALPHA,
            drop_tol: DEFAULT_DROP_TOL,
            vertex_weights: VertexWeights::Unit,
        }
    }
}

/// Undirected graph in symmetric adjacency (CSR) form. Each edge is stored
/// twice, once from each endpoint, with identical cost and weight.
#[derive(Debug, Clone, PartialEq)]
pub struct RipGraph {
    xadj: Vec<usize>,
    adjncy: Vec<usize>,
    cost: Vec<f64>,
    weight: Vec<u64>,
    vertex_weight: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GraphStats {
    pub nverts: usize,
    pub nedges: usize,
    pub total_cost: f64,
    pub max_degree: usize,
    pub components: usize,
}

impl RipGraph {
    /// Builds a graph from a symmetric adjacency list given as
    /// `(u, v, cost, weight)` edges with `u != v`, each listed once.
    pub fn from_edges(
        nverts: usize,
        edges: &[(usize, usize, f64, u64)],
        vertex_weight: Vec<u64>,
    ) -> Result<Self, GraphError> {
        if vertex_weight.len() != nverts {
            return Err(GraphError::Malformed("vertex weight length".into()));
        }
        let mut deg = vec![0usize; nverts + 1];
        for &(u, v, c, w) in edges {
            if u >= nverts || v >= nverts || u == v {
                return Err(GraphError::Malformed(format!("bad edge ({u}, {v})")));
            }
            if !(c > 0.0) || w == 0 {
                return Err(GraphError::Malformed(format!("edge ({u}, {v}) needs positive cost and weight")));
            }
            deg[u + 1] += 1;
            deg[v + 1] += 1;
        }
        for i in 0..nverts {
            deg[i + 1] += deg[i];
        }
        let mut entries = vec![(0usize, 0.0f64, 0u64); deg[nverts]];
        let mut next = deg.clone();
        for &(u, v, c, w) in edges {
            entries[next[u]] = (v, c, w);
            next[u] += 1;
            entries[next[v]] = (u, c, w);
            next[v] += 1;
        }
        for i in 0..nverts {
            let row = &mut entries[deg[i]..deg[i + 1]];
            row.sort_by_key(|e| e.0);
            if row.windows(2).any(|w| w[0].0 == w[1].0) {
                return Err(GraphError::Malformed(format!("duplicate edge at vertex {i}")));
            }
        }
        Ok(Self {
            xadj: deg,
            adjncy: entries.iter().map(|e| e.0).collect(),
            cost: entries.iter().map(|e| e.1).collect(),
            weight: entries.iter().map(|e| e.2).collect(),
            vertex_weight,
        })
    }

    /// Builds the graph from the off-diagonal entries of a symmetric product
    /// matrix, keeping entries with `|c| > drop_tol`.
    fn from_symmetric_product(
        c: &SparseMatrix,
        drop_tol: f64,
        weight_of: impl Fn(f64) -> u64,
        vertex_weight: Vec<u64>,
    ) -> Self {
        let n = c.nrows();
        let mut xadj = Vec::with_capacity(n + 1);
        xadj.push(0);
        let mut adjncy = Vec::new();
        let mut cost = Vec::new();
        let mut weight = Vec::new();
        for i in 0..n {
            let (cols, vals) = c.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                let a = v.abs();
                if j != i && a > drop_tol {
                    adjncy.push(j);
                    cost.push(a);
                    weight.push(weight_of(a).max(1));
                }
            }
            xadj.push(adjncy.len());
        }
        let g = Self {
            xadj,
            adjncy,
            cost,
            weight,
            vertex_weight,
        };
        g.symmetrize()
    }

    /// Floating-point products need not be bitwise symmetric; use the
    /// smaller-index endpoint's value for both directions and drop
    /// one-sided edges.
    fn symmetrize(self) -> Self {
        let n = self.nverts();
        let mut edges = Vec::with_capacity(self.adjncy.len() / 2);
        for u in 0..n {
            for p in self.xadj[u]..self.xadj[u + 1] {
                let v = self.adjncy[p];
                if u < v && self.neighbors(v).binary_search(&u).is_ok() {
                    edges.push((u, v, self.cost[p], self.weight[p]));
                }
            }
        }
        Self::from_edges(n, &edges, self.vertex_weight).expect("symmetrized edges are valid")
    }

    #[inline]
    pub fn nverts(&self) -> usize {
        self.vertex_weight.len()
    }

    pub fn nedges(&self) -> usize {
        self.adjncy.len() / 2
    }

    #[inline]
    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adjncy[self.xadj[v]..self.xadj[v + 1]]
    }

    #[inline]
    pub fn costs(&self, v: usize) -> &[f64] {
        &self.cost[self.xadj[v]..self.xadj[v + 1]]
    }

    #[inline]
    pub fn weights(&self, v: usize) -> &[u64] {
        &self.weight[self.xadj[v]..self.xadj[v + 1]]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.xadj[v + 1] - self.xadj[v]
    }

    pub fn vertex_weights(&self) -> &[u64] {
        &self.vertex_weight
    }

    pub fn xadj(&self) -> &[usize] {
        &self.xadj
    }

    pub fn adjncy(&self) -> &[usize] {
        &self.adjncy
    }

    pub fn edge_weights(&self) -> &[u64] {
        &self.weight
    }

    /// Each undirected edge once as `(u, v, cost, weight)` with `u < v`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64, u64)> + '_ {
        (0..self.nverts()).flat_map(move |u| {
            (self.xadj[u]..self.xadj[u + 1])
                .filter(move |&p| self.adjncy[p] > u)
                .map(move |p| (u, self.adjncy[p], self.cost[p], self.weight[p]))
        })
    }

    /// Writes the graph in the METIS text format with vertex and edge
    /// weights (`fmt = 011`): a header `nverts nedges 011`, then one line per
    /// vertex holding its weight followed by 1-based `neighbor weight` pairs.
    pub fn write_metis<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "{} {} 011", self.nverts(), self.nedges())?;
        for v in 0..self.nverts() {
            write!(w, "{}", self.vertex_weight[v])?;
            for (&u, &wt) in self.neighbors(v).iter().zip(self.weights(v)) {
                write!(w, " {} {}", u + 1, wt)?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

fn isqrt_ceil(n: usize) -> usize {
    let mut t = (n as f64).sqrt() as usize;
    while t * t < n {
        t += 1;
    }
    while t > 0 && (t - 1) * (t - 1) >= n {
        t -= 1;
    }
    t
}

/// Number of entries a column may keep before it counts as dense, `⌈√n⌉`.
pub fn dense_column_threshold(n: usize) -> usize {
    isqrt_ceil(n)
}

/// Truncates every column holding more than `⌈√n⌉` nonzeros to its `⌈√n⌉`
/// largest-magnitude entries (ties go to the lower row index). Only used to
/// build the graph; the solver keeps the full matrix.
pub fn sparsify_dense_columns(a: &SparseMatrix) -> SparseMatrix {
    let keep = dense_column_threshold(a.nrows());
    let t = a.transpose();
    let mut triplets = Vec::with_capacity(a.nnz());
    for j in 0..t.nrows() {
        let (rows, vals) = t.row(j);
        if rows.len() <= keep {
            triplets.extend(rows.iter().zip(vals).map(|(&i, &v)| (i, j, v)));
        } else {
            let mut order: Vec<usize> = (0..rows.len()).collect();
            order.sort_by(|&x, &y| vals[y].abs().total_cmp(&vals[x].abs()).then(rows[x].cmp(&rows[y])));
            triplets.extend(order[..keep].iter().map(|&p| (rows[p], j, vals[p])));
        }
    }
    SparseMatrix::from_triplets(a.nrows(), a.ncols(), &triplets).expect("indices come from a valid matrix")
}

fn vertex_weights_for(a: &SparseMatrix, scheme: VertexWeights) -> Vec<u64> {
    match scheme {
        VertexWeights::Unit => vec![1; a.nrows()],
        VertexWeights::Nnz => (0..a.nrows()).map(|i| a.row_nnz(i).max(1) as u64).collect(),
    }
}

/// Builds the row inner-product graph of `a` (normally the sparsified,
/// row-normalized matrix) via `C = A·Aᵀ`.
pub fn build_rip_graph(a: &SparseMatrix, opts: &GraphOptions) -> Result<RipGraph, GraphError> {
    if !a.is_square() {
        return Err(GraphError::NotSquare {
            nrows: a.nrows(),
            ncols: a.ncols(),
        });
    }
    if opts.alpha == 0 {
        return Err(GraphError::InvalidAlpha);
    }
    let c = a.spgemm(&a.transpose()).expect("A and Aᵀ are conformable");
    let alpha = opts.alpha as f64;
    Ok(RipGraph::from_symmetric_product(
        &c,
        opts.drop_tol,
        |cost| (alpha * cost).ceil() as u64,
        vertex_weights_for(a, opts.vertex_weights),
    ))
}

/// Structural graph: cost and weight of `(i, j)` is the number of columns
/// where rows `i` and `j` both have a nonzero. Values are ignored.
pub fn build_structural_graph(a: &SparseMatrix, vertex_weights: VertexWeights) -> RipGraph {
    let p = a.pattern();
    let c = p.spgemm(&p.transpose()).expect("A and Aᵀ are conformable");
    RipGraph::from_symmetric_product(&c, 0.5, |count| count.round() as u64, vertex_weights_for(a, vertex_weights))
}

pub fn graph_stats(g: &RipGraph) -> GraphStats {
    let n = g.nverts();
    let mut comp = vec![usize::MAX; n];
    let mut components = 0;
    let mut stack = Vec::new();
    for s in 0..n {
        if comp[s] != usize::MAX {
            continue;
        }
        comp[s] = components;
        stack.push(s);
        while let Some(v) = stack.pop() {
            for &u in g.neighbors(v) {
                if comp[u] == usize::MAX {
                    comp[u] = components;
                    stack.push(u);
                }
            }
        }
        components += 1;
    }
    GraphStats {
        nverts: n,
        nedges: g.nedges(),
        total_cost: g.edges().map(|e| e.2).sum(),
        max_degree: (0..n).map(|v| g.degree(v)).max().unwrap_or(0),
        components,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scaling::row_unit_2norm;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_square(rng: &mut ChaCha8Rng, n: usize, per_row: usize) -> SparseMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 1.0 + rng.random::<f64>()));
            for _ in 0..per_row {
                t.push((i, rng.random_range(0..n), rng.random_range(-1.0..1.0)));
            }
        }
        SparseMatrix::from_triplets(n, n, &t).unwrap()
    }

    fn assert_valid(g: &RipGraph) {
        for u in 0..g.nverts() {
            for ((&v, &c), &w) in g.neighbors(u).iter().zip(g.costs(u)).zip(g.weights(u)) {
                assert_ne!(u, v);
                assert!(c > 0.0 && w >= 1);
                let k = g.neighbors(v).binary_search(&u).expect("symmetric");
                assert_eq!(g.costs(v)[k], c);
                assert_eq!(g.weights(v)[k], w);
            }
        }
    }

    #[test]
    fn threshold_is_ceiling_sqrt() {
        assert_eq!(dense_column_threshold(25), 5);
        assert_eq!(dense_column_threshold(26), 6);
        assert_eq!(dense_column_threshold(1), 1);
        assert_eq!(dense_column_threshold(10_000), 100);
        assert_eq!(dense_column_threshold(10_001), 101);
    }

    #[test]
    fn dense_column_truncated_to_five() {
        // 25 x 25 identity plus a column with 23 nonzeros
        let mut t: Vec<_> = (0..25).map(|i| (i, i, 1.0)).collect();
        for i in 2..25 {
            t.push((i, 0, i as f64));
        }
        let a = SparseMatrix::from_triplets(25, 25, &t).unwrap();
        assert_eq!(a.col_counts()[0], 24);
        let s = sparsify_dense_columns(&a);
        assert_eq!(s.col_counts()[0], 5);
        let kept: Vec<usize> = (0..25).filter(|&i| s.get(i, 0) != 0.0).collect();
        assert_eq!(kept, vec![20, 21, 22, 23, 24]);
        for j in 1..25 {
            assert_eq!(s.col_counts()[j], 1);
        }
    }

    #[test]
    fn sparsify_leaves_sparse_matrices_alone() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let a = random_square(&mut rng, 100, 2);
        if a.col_counts().iter().all(|&c| c <= 10) {
            assert_eq!(sparsify_dense_columns(&a), a);
        }
        let d = SparseMatrix::identity(30);
        assert_eq!(sparsify_dense_columns(&d), d);
    }

    #[test]
    fn planted_dense_column_matches_sort_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let n = 64;
        let mut t: Vec<_> = (0..n).map(|i| (i, i, 1.0)).collect();
        // planted dense column 7 with a few equal magnitudes to exercise ties
        let mut col = Vec::new();
        for i in 0..n {
            if i != 7 && rng.random::<f64>() < 0.6 {
                let v = if i % 5 == 0 { 0.5 } else { rng.random_range(-1.0..1.0) };
                col.push((i, v));
                t.push((i, 7, v));
            }
        }
        let a = SparseMatrix::from_triplets(n, n, &t).unwrap();
        let s = sparsify_dense_columns(&a);

        let mut full: Vec<(usize, f64)> = (0..n).filter_map(|i| {
            let v = a.get(i, 7);
            (v != 0.0).then_some((i, v))
        }).collect();
        full.sort_by(|x, y| y.1.abs().partial_cmp(&x.1.abs()).unwrap().then(x.0.cmp(&y.0)));
        let mut expect: Vec<usize> = full.iter().take(8).map(|e| e.0).collect();
        expect.sort();
        let got: Vec<usize> = (0..n).filter(|&i| s.get(i, 7) != 0.0).collect();
        assert_eq!(got, expect);
        for j in (0..n).filter(|&j| j != 7) {
            for i in 0..n {
                assert_eq!(s.get(i, j), a.get(i, j));
            }
        }
    }

    #[test]
    fn inner_product_edge_cost() {
        let a = SparseMatrix::from_triplets(3, 3, &[(0, 0, 9.0), (0, 2, 6.0), (1, 0, 12.0), (1, 2, 18.0), (2, 1, 1.0)]).unwrap();
        let g = build_rip_graph(&a, &GraphOptions { alpha: 1, ..Default::default() }).unwrap();
        assert_eq!(g.nedges(), 1);
        assert_eq!(g.neighbors(0), &[1]);
        assert_eq!(g.costs(0), &[216.0]);
        assert_eq!(g.weights(0), &[216]);
    }

    #[test]
    fn block_diagonal_gives_two_components() {
        let mut t = Vec::new();
        for b in 0..2 {
            for i in 0..5 {
                for j in 0..5 {
                    if i == j || j == (i + 1) % 5 {
                        t.push((5 * b + i, 5 * b + j, 1.0 + (i * j) as f64));
                    }
                }
            }
        }
        let a = SparseMatrix::from_triplets(10, 10, &t).unwrap();
        let g = build_rip_graph(&a, &GraphOptions::default()).unwrap();
        assert_eq!(graph_stats(&g).components, 2);
        assert!(g.edges().all(|(u, v, _, _)| u / 5 == v / 5));
    }

    #[test]
    fn non_square_and_bad_alpha_rejected() {
        let a = SparseMatrix::zeros(2, 3);
        assert!(matches!(build_rip_graph(&a, &GraphOptions::default()), Err(GraphError::NotSquare { .. })));
        let b = SparseMatrix::identity(2);
        let opts = GraphOptions { alpha: 0, ..Default::default() };
        assert_eq!(build_rip_graph(&b, &opts).unwrap_err(), GraphError::InvalidAlpha);
    }

    #[test]
    fn normalized_rows_give_cosine_costs_and_match_aat_pattern() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let a = random_square(&mut rng, 120, 3);
        let (a, _, _) = row_unit_2norm(&a, &vec![1.0; 120]).unwrap();
        let opts = GraphOptions::default();
        let g = build_rip_graph(&a, &opts).unwrap();
        assert_valid(&g);
        assert!(g.edges().all(|e| e.2 <= 1.0 + 1e-12));

        let c = a.spgemm(&a.transpose()).unwrap();
        let mut expect: Vec<(usize, usize)> = c
            .iter()
            .filter(|&(i, j, v)| i < j && v.abs() > opts.drop_tol)
            .map(|(i, j, _)| (i, j))
            .collect();
        expect.sort();
        let got: Vec<(usize, usize)> = g.edges().map(|(u, v, _, _)| (u, v)).collect();
        assert_eq!(got, expect);
    }

    #[test]
    fn nnz_vertex_weights() {
        let a = SparseMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (0, 1, 1.0), (1, 1, 1.0)]).unwrap();
        let g = build_rip_graph(&a, &GraphOptions { vertex_weights: VertexWeights::Nnz, ..Default::default() }).unwrap();
        assert_eq!(g.vertex_weights(), &[2, 1]);
    }

    #[test]
    fn stats_of_edgeless_graph() {
        let g = build_rip_graph(&SparseMatrix::identity(7), &GraphOptions::default()).unwrap();
        let s = graph_stats(&g);
        assert_eq!((s.nverts, s.nedges, s.components, s.max_degree), (7, 0, 7, 0));
    }

    #[test]
    fn components_match_union_find() {
        fn find(p: &mut [usize], x: usize) -> usize {
            let mut r = x;
            while p[r] != r {
                r = p[r];
            }
            let mut y = x;
            while p[y] != r {
                let n = p[y];
                p[y] = r;
                y = n;
            }
            r
        }
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        for _ in 0..10 {
            let n = 80;
            let mut edges = Vec::new();
            for u in 0..n {
                for v in (u + 1)..n {
                    if rng.random::<f64>() < 0.015 {
                        edges.push((u, v, 1.0, 1));
                    }
                }
            }
            let g = RipGraph::from_edges(n, &edges, vec![1; n]).unwrap();
            let mut parent: Vec<usize> = (0..n).collect();
            for &(u, v, _, _) in &edges {
                let (a, b) = (find(&mut parent, u), find(&mut parent, v));
                parent[a] = b;
            }
            let roots = (0..n).filter(|&x| find(&mut parent, x) == x).count();
            assert_eq!(graph_stats(&g).components, roots);
        }
    }

    #[test]
    fn structural_graph_counts_shared_columns() {
        let a = SparseMatrix::from_triplets(3, 4, &[(0, 0, 2.0), (0, 1, 3.0), (1, 0, -1.0), (1, 1, 5.0), (2, 3, 1.0)]).unwrap();
        let g = build_structural_graph(&a, VertexWeights::Unit);
        assert_eq!(g.nedges(), 1);
        assert_eq!(g.costs(0), &[2.0]);
        assert_eq!(g.weights(0), &[2]);
    }

    #[test]
    fn metis_dump() {
        let g = RipGraph::from_edges(3, &[(0, 1, 0.5, 7), (1, 2, 0.25, 3)], vec![1, 1, 1]).unwrap();
        let mut out = Vec::new();
        g.write_metis(&mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "3 2 011\n1 2 7\n1 1 7 3 3\n1 2 3\n");
    }

    proptest! {
        #[test]
        fn quantization_is_monotone(c1 in 1e-9f64..1.0, c2 in 1e-9f64..1.0, alpha in 1u64..1_000_000) {
            let q = |c: f64| ((alpha as f64) * c).ceil() as u64;
            if c1 >= c2 {
                prop_assert!(q(c1) >= q(c2));
            } else {
                prop_assert!(q(c1) <= q(c2));
            }
            prop_assert!(q(c1) >= 1 && q(c1) <= alpha);
        }

        #[test]
        fn sparsify_never_grows_columns(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = 36;
            let mut t = Vec::new();
            for i in 0..n {
                for j in 0..n {
                    if rng.random::<f64>() < if j < 3 { 0.7 } else { 0.05 } {
                        t.push((i, j, rng.random_range(-1.0..1.0)));
                    }
                }
            }
            let a = SparseMatrix::from_triplets(n, n, &t).unwrap();
            let s = sparsify_dense_columns(&a);
            let keep = dense_column_threshold(n);
            for (j, (&ca, &cs)) in a.col_counts().iter().zip(&s.col_counts()).enumerate() {
                prop_assert!(cs <= ca);
                if ca <= keep {
                    for i in 0..n {
                        prop_assert_eq!(a.get(i, j), s.get(i, j));
                    }
                } else {
                    prop_assert_eq!(cs, keep);
                }
            }
        }
    }
}
