//! Unweighted spatial graphs over point clouds and simple random walks on them.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use nalgebra::DMatrix;
use rand::Rng as _;

use super::points::{sq_dist, PointCloud};
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GraphParams {
    Knn(usize),
    EpsBall(f64),
}

/// Directed unweighted adjacency lists, each sorted by target id.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialGraph {
    out_edges: Vec<Vec<u32>>,
    params: GraphParams,
}

impl SpatialGraph {
    pub fn from_adjacency(out_edges: Vec<Vec<u32>>, params: GraphParams) -> Result<Self> {
        let n = out_edges.len();
        for (i, adj) in out_edges.iter().enumerate() {
            if adj.iter().any(|&j| j as usize >= n || j as usize == i) {
                return Err(Error::InvalidConfig(format!(
                    "vertex {i} has an out-of-range target or a self-loop"
                )));
            }
        }
        Ok(Self { out_edges, params })
    }

    pub fn len(&self) -> usize {
        self.out_edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.out_edges.is_empty()
    }

    pub fn params(&self) -> GraphParams {
        self.params
    }

    pub fn out_edges(&self, i: usize) -> &[u32] {
        &self.out_edges[i]
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.out_edges[i].binary_search(&(j as u32)).is_ok()
    }

    pub fn edge_count(&self) -> usize {
        self.out_edges.iter().map(Vec::len).sum()
    }

    pub fn sinks(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.out_edges[i].is_empty()).collect()
    }
}

/// Directed edges from every point to its `k` nearest other points, ties
/// broken by ascending index.
pub fn build_knn_graph(points: &PointCloud, k: usize) -> Result<SpatialGraph> {
    let n = points.len();
    if k == 0 || k >= n {
        return Err(Error::InvalidConfig(format!("knn needs 1 <= k < n, got k={k}, n={n}")));
    }
    let mut out_edges = Vec::with_capacity(n);
    let mut cand: Vec<(f64, u32)> = Vec::with_capacity(n - 1);
    let by_dist = |a: &(f64, u32), b: &(f64, u32)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    for i in 0..n {
        cand.clear();
        let xi = points.row(i);
        cand.extend(
            (0..n)
                .filter(|&j| j != i)
                .map(|j| (sq_dist(xi, points.row(j)), j as u32)),
        );
        cand.select_nth_unstable_by(k - 1, by_dist);
        let mut nbrs: Vec<u32> = cand[..k].iter().map(|&(_, j)| j).collect();
        nbrs.sort_unstable();
        out_edges.push(nbrs);
    }
    Ok(SpatialGraph {
        out_edges,
        params: GraphParams::Knn(k),
    })
}

/// Symmetric edges between every pair at distance `0 < d <= eps`.
pub fn build_eps_graph(points: &PointCloud, eps: f64) -> Result<SpatialGraph> {
    if !(eps > 0.0) {
        return Err(Error::InvalidConfig(format!("eps must be positive, got {eps}")));
    }
    let n = points.len();
    let e2 = eps * eps;
    let mut out_edges = vec![Vec::new(); n];
    for i in 0..n {
        for j in i + 1..n {
            let d = points.sq_dist(i, j);
            if d > 0.0 && d <= e2 {
                out_edges[i].push(j as u32);
                out_edges[j].push(i as u32);
            }
        }
    }
    for adj in &mut out_edges {
        adj.sort_unstable();
    }
    Ok(SpatialGraph {
        out_edges,
        params: GraphParams::EpsBall(eps),
    })
}

/// `walks_per_node` walks of `length` tokens from every vertex (vertex-major
/// order), each step uniform over the current vertex's out-edges.
pub fn simple_random_walks(
    graph: &SpatialGraph,
    walks_per_node: usize,
    length: usize,
    seed: u64,
) -> Result<Vec<Vec<u32>>> {
    let sinks = graph.sinks();
    if !sinks.is_empty() {
        return Err(Error::SinkVertices(sinks));
    }
    if length == 0 {
        return Err(Error::InvalidConfig("walk length must be at least 1".into()));
    }
    let mut r = rng::seeded(seed);
    let mut walks = Vec::with_capacity(graph.len() * walks_per_node);
    for start in 0..graph.len() {
        for _ in 0..walks_per_node {
            let mut w = Vec::with_capacity(length);
            let mut v = start;
            w.push(v as u32);
            for _ in 1..length {
                let adj = graph.out_edges(v);
                v = adj[r.random_range(0..adj.len())] as usize;
                w.push(v as u32);
            }
            walks.push(w);
        }
    }
    Ok(walks)
}

/// Exact `t`-step conditionals `P^t` of the simple random walk for each
/// requested `t` (in any order), computed by repeated row averaging.
pub fn transition_powers(graph: &SpatialGraph, steps: &[usize]) -> Result<Vec<DMatrix<f64>>> {
    let sinks = graph.sinks();
    if !sinks.is_empty() {
        return Err(Error::SinkVertices(sinks));
    }
    let n = graph.len();
    let tmax = steps.iter().copied().max().unwrap_or(0);
    // row-major current power, starting from the identity
    let mut cur = vec![0.0; n * n];
    for i in 0..n {
        cur[i * n + i] = 1.0;
    }
    let mut next = vec![0.0; n * n];
    let mut snapshots: Vec<Option<DMatrix<f64>>> = vec![None; steps.len()];
    let snap = |t: usize, cur: &[f64], snapshots: &mut Vec<Option<DMatrix<f64>>>| {
        for (slot, &s) in snapshots.iter_mut().zip(steps) {
            if s == t {
                *slot = Some(DMatrix::from_row_slice(n, n, cur));
            }
        }
    };
    snap(0, &cur, &mut snapshots);
    for t in 1..=tmax {
        for i in 0..n {
            let adj = graph.out_edges(i);
            let w = 1.0 / adj.len() as f64;
            let row = &mut next[i * n..(i + 1) * n];
            row.fill(0.0);
            for &j in adj {
                let src = &cur[j as usize * n..(j as usize + 1) * n];
                for (a, b) in row.iter_mut().zip(src) {
                    *a += w * b;
                }
            }
        }
        std::mem::swap(&mut cur, &mut next);
        snap(t, &cur, &mut snapshots);
    }
    Ok(snapshots.into_iter().map(|m| m.expect("every step snapshotted")).collect())
}

#[derive(Copy, Clone, PartialEq)]
struct Visit(f64, usize);

impl Eq for Visit {}

impl Ord for Visit {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

impl PartialOrd for Visit {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// All-pairs shortest paths with Euclidean edge lengths; unreachable pairs are `+∞`.
pub fn graph_geodesics(graph: &SpatialGraph, points: &PointCloud) -> Result<DMatrix<f64>> {
    let n = graph.len();
    if points.len() != n {
        return Err(Error::Shape(format!("{} points for a graph on {n} vertices", points.len())));
    }
    let lengths: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            graph
                .out_edges(i)
                .iter()
                .map(|&j| points.sq_dist(i, j as usize).sqrt())
                .collect()
        })
        .collect();
    let mut out = DMatrix::from_element(n, n, f64::INFINITY);
    let mut dist = vec![f64::INFINITY; n];
    let mut heap = BinaryHeap::new();
    for s in 0..n {
        dist.fill(f64::INFINITY);
        dist[s] = 0.0;
        heap.push(Visit(0.0, s));
        while let Some(Visit(d, u)) = heap.pop() {
            if d > dist[u] {
                continue;
            }
            for (&v, &len) in graph.out_edges(u).iter().zip(&lengths[u]) {
                let nd = d + len;
                if nd < dist[v as usize] {
                    dist[v as usize] = nd;
                    heap.push(Visit(nd, v as usize));
                }
            }
        }
        for (t, &d) in dist.iter().enumerate() {
            out[(s, t)] = d;
        }
    }
    Ok(out)
}

/// Squared distances derived from a weighted similarity graph.
#[derive(Debug, Clone, PartialEq)]
pub struct SurveyDistances {
    pub n: usize,
    /// `(i, j, d²_ij)` with `i <= j`, sorted.
    pub entries: Vec<(u32, u32, f64)>,
}

impl SurveyDistances {
    /// Dense symmetric matrix with `fill` where no edge exists and 0 on an
    /// empty diagonal.
    pub fn to_dense(&self, fill: f64) -> DMatrix<f64> {
        let mut m = DMatrix::from_element(self.n, self.n, fill);
        for i in 0..self.n {
            m[(i, i)] = 0.0;
        }
        for &(i, j, d) in &self.entries {
            m[(i as usize, j as usize)] = d;
            m[(j as usize, i as usize)] = d;
        }
        m
    }

    pub fn get(&self, i: u32, j: u32) -> Option<f64> {
        let key = (i.min(j), i.max(j));
        self.entries
            .binary_search_by_key(&key, |&(a, b, _)| (a, b))
            .ok()
            .map(|k| self.entries[k].2)
    }
}

/// Symmetrizes directed weights as `(w_ij + w_ji)/2` (a missing direction
/// counts as zero) and maps them to `d²_ij = -log(w̄_ij / max w̄)`.
pub fn survey_graph_to_counts(weighted_edges: &[(u32, u32, f64)]) -> Result<SurveyDistances> {
    use std::collections::BTreeMap;
    let mut sym: BTreeMap<(u32, u32), f64> = BTreeMap::new();
    let mut n = 0usize;
    for &(i, j, w) in weighted_edges {
        if !(w > 0.0) || !w.is_finite() {
            return Err(Error::NonPositiveWeight {
                from: i as usize,
                to: j as usize,
                weight: w,
            });
        }
        n = n.max(i.max(j) as usize + 1);
        let half = if i == j { w } else { 0.5 * w };
        *sym.entry((i.min(j), i.max(j))).or_insert(0.0) += half;
    }
    let max = sym.values().copied().fold(0.0, f64::max);
    let entries = sym
        .into_iter()
        .map(|((i, j), w)| (i, j, (-(w / max).ln()).max(0.0)))
        .collect();
    Ok(SurveyDistances { n, entries })
}
