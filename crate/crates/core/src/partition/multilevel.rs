//! Multilevel K-way graph partitioner.
//!
//! 1. Coarsen by heavy-edge matching until the graph has at most
//!    `coarsen_to` vertices or matching stops shrinking it.
//! 2. Partition the coarsest graph by greedy graph growing, keeping the best
//!    of a few randomized trials.
//! 3. Project back level by level, rebalancing and running greedy boundary
//!    refinement (single-vertex moves with positive gain) at each level.
//!
//! All randomness comes from one seeded generator, so the result is a pure
//! function of (graph, K, epsilon, seed).

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ripgraph::RipGraph;

const NONE: usize = usize::MAX;

#[derive(Debug, Clone)]
pub struct MultilevelParams {
    pub k: usize,
    pub epsilon: f64,
    pub seed: u64,
    pub coarsen_to: usize,
    pub max_passes: usize,
    pub init_trials: usize,
}

impl MultilevelParams {
    pub fn new(k: usize, epsilon: f64, seed: u64) -> Self {
        Self {
            k,
            epsilon,
            seed,
            coarsen_to: (30 * k).max(200),
            max_passes: 10,
            init_trials: 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PassRecord {
    /// 0 is the input graph; larger is coarser.
    pub level: usize,
    pub cut_before: u64,
    pub cut_after: u64,
    pub moves: usize,
}

#[derive(Debug, Clone, Default)]
pub struct RefineTrace {
    /// Number of graphs in the hierarchy, including the input.
    pub levels: usize,
    pub passes: Vec<PassRecord>,
}

struct WGraph {
    xadj: Vec<usize>,
    adjncy: Vec<usize>,
    adjwgt: Vec<u64>,
    vwgt: Vec<u64>,
}

impl WGraph {
    fn from_rip(g: &RipGraph) -> Self {
        Self {
            xadj: g.xadj().to_vec(),
            adjncy: g.adjncy().to_vec(),
            adjwgt: g.edge_weights().to_vec(),
            vwgt: g.vertex_weights().to_vec(),
        }
    }

    fn n(&self) -> usize {
        self.vwgt.len()
    }

    fn adj(&self, v: usize) -> impl Iterator<Item = (usize, u64)> + '_ {
        let r = self.xadj[v]..self.xadj[v + 1];
        self.adjncy[r.clone()].iter().copied().zip(self.adjwgt[r].iter().copied())
    }

    fn total_weight(&self) -> u64 {
        self.vwgt.iter().sum()
    }

    fn cut(&self, part: &[usize]) -> u64 {
        let mut c = 0;
        for v in 0..self.n() {
            for (u, w) in self.adj(v) {
                if u > v && part[u] != part[v] {
                    c += w;
                }
            }
        }
        c
    }
}

/// One round of heavy-edge matching. Returns the coarse graph and the map
/// from fine to coarse vertices.
fn coarsen_once(g: &WGraph, max_vwgt: u64, rng: &mut ChaCha8Rng) -> (WGraph, Vec<usize>) {
    let n = g.n();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut mate = vec![NONE; n];
    for &v in &order {
        if mate[v] != NONE {
            continue;
        }
        let mut best = v;
        let mut best_w = 0;
        for (u, w) in g.adj(v) {
            if mate[u] == NONE && w > best_w && g.vwgt[v] + g.vwgt[u] <= max_vwgt {
                best = u;
                best_w = w;
            }
        }
        mate[v] = best;
        mate[best] = v;
    }

    let mut cmap = vec![NONE; n];
    let mut members = Vec::with_capacity(n);
    let mut nc = 0;
    for v in 0..n {
        if cmap[v] == NONE {
            cmap[v] = nc;
            cmap[mate[v]] = nc;
            members.push((v, mate[v]));
            nc += 1;
        }
    }

    let mut xadj = Vec::with_capacity(nc + 1);
    xadj.push(0);
    let mut adjncy = Vec::with_capacity(g.adjncy.len());
    let mut adjwgt = Vec::with_capacity(g.adjncy.len());
    let mut vwgt = Vec::with_capacity(nc);
    let mut slot = vec![NONE; nc];
    for (c, &(a, b)) in members.iter().enumerate() {
        let start = adjncy.len();
        let mut w = g.vwgt[a];
        let both = if a == b { [a, NONE] } else { w += g.vwgt[b]; [a, b] };
        for &m in both.iter().filter(|&&m| m != NONE) {
            for (u, ew) in g.adj(m) {
                let cu = cmap[u];
                if cu == c {
                    continue;
                }
                if slot[cu] == NONE || slot[cu] < start {
                    slot[cu] = adjncy.len();
                    adjncy.push(cu);
                    adjwgt.push(ew);
                } else {
                    adjwgt[slot[cu]] += ew;
                }
            }
        }
        vwgt.push(w);
        xadj.push(adjncy.len());
    }
    (WGraph { xadj, adjncy, adjwgt, vwgt }, cmap)
}

/// Mutable partition state shared by growing, balancing and refinement.
struct State {
    part: Vec<usize>,
    pwgt: Vec<u64>,
    psize: Vec<usize>,
    /// Scratch: connection weight of the current vertex to each part.
    conn: Vec<i64>,
    touched: Vec<usize>,
}

impl State {
    fn new(g: &WGraph, part: Vec<usize>, k: usize) -> Self {
        let mut pwgt = vec![0; k];
        let mut psize = vec![0; k];
        for (v, &p) in part.iter().enumerate() {
            pwgt[p] += g.vwgt[v];
            psize[p] += 1;
        }
        Self {
            part,
            pwgt,
            psize,
            conn: vec![0; k],
            touched: Vec::new(),
        }
    }

    /// Fills `conn` / `touched` with v's connection weight per adjacent part.
    fn gather(&mut self, g: &WGraph, v: usize) {
        for &p in &self.touched {
            self.conn[p] = 0;
        }
        self.touched.clear();
        for (u, w) in g.adj(v) {
            let p = self.part[u];
            if self.conn[p] == 0 && !self.touched.contains(&p) {
                self.touched.push(p);
            }
            self.conn[p] += w as i64;
        }
    }

    fn move_to(&mut self, g: &WGraph, v: usize, to: usize) {
        let from = self.part[v];
        self.pwgt[from] -= g.vwgt[v];
        self.psize[from] -= 1;
        self.pwgt[to] += g.vwgt[v];
        self.psize[to] += 1;
        self.part[v] = to;
    }

    fn is_boundary(&self, g: &WGraph, v: usize) -> bool {
        g.adj(v).any(|(u, _)| self.part[u] != self.part[v])
    }
}

/// Greedy graph growing: parts are filled one after another from a random
/// seed vertex, always absorbing the unassigned vertex most strongly
/// connected to the part being grown.
fn grow(g: &WGraph, k: usize, cap: u64, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let n = g.n();
    let mut part = vec![NONE; n];
    let mut conn = vec![0u64; n];
    let mut remaining = g.total_weight();
    let mut unassigned = n;
    for p in 0..k.saturating_sub(1) {
        if unassigned == 0 {
            break;
        }
        let target = remaining as f64 / (k - p) as f64;
        let mut pw = 0u64;
        let mut heap: BinaryHeap<(u64, Reverse<usize>)> = BinaryHeap::new();
        let mut frontier = Vec::new();
        loop {
            if heap.is_empty() {
                let free: Vec<usize> = (0..n).filter(|&v| part[v] == NONE && pw + g.vwgt[v] <= cap.max(g.vwgt[v])).collect();
                if free.is_empty() {
                    break;
                }
                let v = free[rng.random_range(0..free.len())];
                heap.push((conn[v], Reverse(v)));
            }
            let Some((gain, Reverse(v))) = heap.pop() else { break };
            if part[v] != NONE || gain != conn[v] {
                continue;
            }
            if pw > 0 && pw + g.vwgt[v] > cap {
                continue;
            }
            part[v] = p;
            pw += g.vwgt[v];
            unassigned -= 1;
            for (u, w) in g.adj(v) {
                if part[u] == NONE {
                    if conn[u] == 0 {
                        frontier.push(u);
                    }
                    conn[u] += w;
                    heap.push((conn[u], Reverse(u)));
                }
            }
            if pw as f64 >= target || unassigned == 0 {
                break;
            }
        }
        for u in frontier {
            conn[u] = 0;
        }
        remaining -= pw;
    }
    for x in part.iter_mut().filter(|x| **x == NONE) {
        *x = k - 1;
    }
    part
}

/// Moves a vertex into every empty part, choosing the one whose departure
/// raises the cut least.
fn repair_empty(g: &WGraph, st: &mut State) {
    let k = st.pwgt.len();
    for e in 0..k {
        if st.psize[e] > 0 {
            continue;
        }
        let mut best: Option<(i64, usize)> = None;
        for v in 0..g.n() {
            if st.psize[st.part[v]] <= 1 {
                continue;
            }
            st.gather(g, v);
            let loss = st.conn[st.part[v]];
            if best.is_none_or(|(l, _)| loss < l) {
                best = Some((loss, v));
            }
        }
        if let Some((_, v)) = best {
            st.move_to(g, v, e);
        }
    }
}

/// Moves vertices out of parts heavier than `cap`, best gain first.
fn balance(g: &WGraph, st: &mut State, cap: u64) {
    let k = st.pwgt.len();
    for _ in 0..4 * k {
        let Some(p) = (0..k).filter(|&p| st.pwgt[p] > cap).max_by_key(|&p| (st.pwgt[p], Reverse(p))) else {
            return;
        };
        let lightest = (0..k).min_by_key(|&q| (st.pwgt[q], q)).unwrap_or(0);
        let mut cands: Vec<(i64, usize, usize)> = Vec::new();
        let members: Vec<usize> = (0..g.n()).filter(|&v| st.part[v] == p).collect();
        for v in members {
            st.gather(g, v);
            let own = st.conn[p];
            let mut best = (st.conn[lightest] - own, lightest);
            for &q in &st.touched {
                if q != p && st.pwgt[q] + g.vwgt[v] <= cap {
                    let gain = st.conn[q] - own;
                    if gain > best.0 {
                        best = (gain, q);
                    }
                }
            }
            if best.1 != p {
                cands.push((best.0, v, best.1));
            }
        }
        cands.sort_by_key(|&(gain, v, _)| (Reverse(gain), v));
        let mut moved = false;
        for (_, v, q) in cands {
            if st.pwgt[p] <= cap {
                break;
            }
            if st.pwgt[q] + g.vwgt[v] <= cap && st.psize[p] > 1 {
                st.move_to(g, v, q);
                moved = true;
            }
        }
        if !moved {
            return;
        }
    }
}

/// Greedy k-way boundary refinement. A vertex moves to the adjacent part
/// with the largest positive gain (external minus internal connection) if
/// the move keeps that part within `cap`; zero-gain moves are taken only
/// when they strictly improve balance. Every move leaves the cut unchanged
/// or smaller.
fn refine(
    g: &WGraph,
    st: &mut State,
    cap: u64,
    max_passes: usize,
    rng: &mut ChaCha8Rng,
    level: usize,
    trace: &mut RefineTrace,
) {
    for _ in 0..max_passes {
        let cut_before = g.cut(&st.part);
        let mut order: Vec<usize> = (0..g.n()).filter(|&v| st.is_boundary(g, v)).collect();
        order.shuffle(rng);
        let mut moves = 0;
        for v in order {
            let from = st.part[v];
            if st.psize[from] <= 1 {
                continue;
            }
            st.gather(g, v);
            let own = st.conn[from];
            let vw = g.vwgt[v];
            let mut best: Option<(i64, usize)> = None;
            for &q in &st.touched {
                if q == from || st.pwgt[q] + vw > cap {
                    continue;
                }
                let gain = st.conn[q] - own;
                let better = match best {
                    None => true,
                    Some((bg, bq)) => gain > bg || (gain == bg && st.pwgt[q] < st.pwgt[bq]),
                };
                if better {
                    best = Some((gain, q));
                }
            }
            if let Some((gain, q)) = best {
                if gain > 0 || (gain == 0 && st.pwgt[q] + vw < st.pwgt[from]) {
                    st.move_to(g, v, q);
                    moves += 1;
                }
            }
        }
        let cut_after = g.cut(&st.part);
        trace.passes.push(PassRecord {
            level,
            cut_before,
            cut_after,
            moves,
        });
        if moves == 0 {
            break;
        }
    }
}

fn balance_cap(total: u64, k: usize, epsilon: f64) -> u64 {
    let relaxed = ((1.0 + epsilon) * total as f64 / k as f64).floor() as u64;
    relaxed.max(total.div_ceil(k as u64))
}

/// Partitions `g` into `params.k` parts. Returns the part of every vertex
/// and the refinement trace.
pub fn multilevel_partition(g: &RipGraph, params: &MultilevelParams) -> (Vec<usize>, RefineTrace) {
    let k = params.k;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut trace = RefineTrace::default();
    let base = WGraph::from_rip(g);
    let n = base.n();
    if k <= 1 {
        trace.levels = 1;
        return (vec![0; n], trace);
    }
    let total = base.total_weight();
    let cap = balance_cap(total, k, params.epsilon);

    let mut graphs = vec![base];
    let mut maps: Vec<Vec<usize>> = Vec::new();
    let max_vwgt = ((1.5 * total as f64 / params.coarsen_to as f64).ceil() as u64).max(2);
    while graphs.last().is_some_and(|g| g.n() > params.coarsen_to) {
        let cur = graphs.last().expect("nonempty hierarchy");
        let (coarse, cmap) = coarsen_once(cur, max_vwgt, &mut rng);
        let shrunk = coarse.n() < cur.n();
        let slow = coarse.n() as f64 > 0.95 * cur.n() as f64;
        if !shrunk {
            break;
        }
        graphs.push(coarse);
        maps.push(cmap);
        if slow {
            break;
        }
    }
    trace.levels = graphs.len();
    log::debug!(
        "coarsened {} -> {} vertices in {} levels",
        n,
        graphs.last().map_or(0, |g| g.n()),
        graphs.len()
    );

    let coarsest_level = graphs.len() - 1;
    let coarsest = &graphs[coarsest_level];
    let mut best: Option<(bool, u64, Vec<usize>)> = None;
    for _ in 0..params.init_trials.max(1) {
        let part = grow(coarsest, k, cap, &mut rng);
        let mut st = State::new(coarsest, part, k);
        repair_empty(coarsest, &mut st);
        balance(coarsest, &mut st, cap);
        refine(coarsest, &mut st, cap, params.max_passes, &mut rng, coarsest_level, &mut trace);
        let feasible = st.pwgt.iter().all(|&w| w <= cap);
        let cut = coarsest.cut(&st.part);
        let better = match &best {
            None => true,
            Some((bf, bc, _)) => (feasible && !bf) || (feasible == *bf && cut < *bc),
        };
        if better {
            best = Some((feasible, cut, st.part));
        }
    }
    let mut part = best.expect("at least one trial").2;

    for level in (0..coarsest_level).rev() {
        let cmap = &maps[level];
        part = cmap.iter().map(|&c| part[c]).collect();
        let g = &graphs[level];
        let mut st = State::new(g, part, k);
        repair_empty(g, &mut st);
        balance(g, &mut st, cap);
        refine(g, &mut st, cap, params.max_passes, &mut rng, level, &mut trace);
        part = st.part;
    }
    (part, trace)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path_graph(n: usize) -> RipGraph {
        let edges: Vec<_> = (0..n - 1).map(|i| (i, i + 1, 1.0, 1)).collect();
        RipGraph::from_edges(n, &edges, vec![1; n]).unwrap()
    }

    #[test]
    fn coarsening_preserves_weight() {
        let g = WGraph::from_rip(&path_graph(101));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (c, cmap) = coarsen_once(&g, 2, &mut rng);
        assert!(c.n() < g.n());
        assert_eq!(c.total_weight(), 101);
        assert!(cmap.iter().all(|&x| x < c.n()));
        // edge weight in the coarse graph equals the fine edges between groups
        let fine_between: u64 = (0..100).filter(|&i| cmap[i] != cmap[i + 1]).count() as u64;
        let coarse_total: u64 = c.adjwgt.iter().sum::<u64>() / 2;
        assert_eq!(fine_between, coarse_total);
    }

    #[test]
    fn path_bisection_is_near_optimal() {
        let g = path_graph(1000);
        let (part, _) = multilevel_partition(&g, &MultilevelParams::new(2, 0.1, 3));
        let w = WGraph::from_rip(&g);
        assert!(w.cut(&part) <= 3, "cut {}", w.cut(&part));
    }

    #[test]
    fn balance_cap_is_always_feasible() {
        assert_eq!(balance_cap(10, 3, 0.1), 4);
        assert_eq!(balance_cap(400, 4, 0.1), 110);
        assert_eq!(balance_cap(12, 3, 0.0), 4);
    }
}
