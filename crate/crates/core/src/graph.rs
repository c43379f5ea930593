//! Spacetime decoding graphs.
//!
//! Node `t * m + c` is check `c` in window slice `t`; node `W * m` is the
//! shared virtual boundary. Every graph edge is elementary: a space edge is
//! one data edge between two checks, a boundary edge is one data edge with a
//! single check endpoint (it ends on the virtual node), and a time edge joins
//! the same check in consecutive slices. Parallel edges are kept.
//!
//! Distances are compared on weights quantized to multiples of 2^-32, with
//! hop count as the secondary key, so equal-cost paths are detected exactly.
//! Among paths that minimize (weight, hops), the lexicographically smallest
//! node sequence is returned.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use crate::error::{invalid, Result};
use crate::geometry::CodeSpec;
use crate::gf2::BitVec;

/// `ln((1 - p) / p)`.
pub fn edge_weight(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(invalid(format!("edge weight needs p in (0,1), got {p}")));
    }
    Ok(((1.0 - p) / p).ln())
}

const QUANTUM: f64 = 4_294_967_296.0;

/// Weight in units of 2^-32. Negative weights clamp to zero.
pub fn quantize(w: f64) -> u64 {
    (w.max(0.0) * QUANTUM).round() as u64
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EdgeKind {
    Space,
    Time,
    Boundary,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GraphEdge {
    pub u: usize,
    pub v: usize,
    pub kind: EdgeKind,
    pub weight: f64,
    /// The data qubit this edge flips, if any (time edges have none).
    pub data_edge: Option<usize>,
}

impl GraphEdge {
    pub fn other(&self, x: usize) -> usize {
        if x == self.u {
            self.v
        } else {
            self.u
        }
    }
}

/// Distance key: quantized weight, then hop count.
pub type DistKey = (u64, u32);

#[derive(Clone, Debug, PartialEq)]
pub struct Path {
    pub weight: f64,
    pub key: DistKey,
    pub nodes: Vec<usize>,
    pub edges: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct DecodingGraph {
    m: usize,
    window: usize,
    n_data: usize,
    edges: Vec<GraphEdge>,
    qweights: Vec<u64>,
    adj: Vec<Vec<usize>>,
}

impl DecodingGraph {
    /// Unit weights everywhere: the graph the Union-Find decoder grows on.
    pub fn build_uniform(code: &CodeSpec, window: usize) -> Result<Self> {
        Self::build(code, window, 1.0, 1.0)
    }

    /// Likelihood weights `ln((1-p)/p)` for data edges and `ln((1-q)/q)` for
    /// time edges. With `window == 1` there are no time edges and `q_meas` is
    /// not consulted.
    pub fn build_spacetime(
        code: &CodeSpec,
        window: usize,
        p_data: f64,
        q_meas: f64,
    ) -> Result<Self> {
        let w_space = edge_weight(p_data)?;
        let w_time = if window > 1 {
            edge_weight(q_meas)?
        } else {
            0.0
        };
        Self::build(code, window, w_space, w_time)
    }

    fn build(code: &CodeSpec, window: usize, w_space: f64, w_time: f64) -> Result<Self> {
        if window == 0 {
            return Err(invalid("window must be >= 1"));
        }
        let m = code.m_x();
        let boundary = window * m;
        let mut edges = Vec::new();
        for t in 0..window {
            for e in 0..code.n() {
                let (u, v, kind) = match code.edge_checks(e) {
                    [] => continue,
                    [a] => (t * m + a, boundary, EdgeKind::Boundary),
                    [a, b] => (t * m + a, t * m + b, EdgeKind::Space),
                    more => {
                        return Err(invalid(format!(
                            "edge {e} touches {} checks; the code is not graph-like",
                            more.len()
                        )))
                    }
                };
                edges.push(GraphEdge {
                    u,
                    v,
                    kind,
                    weight: w_space,
                    data_edge: Some(e),
                });
            }
        }
        for t in 0..window.saturating_sub(1) {
            for c in 0..m {
                edges.push(GraphEdge {
                    u: t * m + c,
                    v: (t + 1) * m + c,
                    kind: EdgeKind::Time,
                    weight: w_time,
                    data_edge: None,
                });
            }
        }
        let mut adj = vec![Vec::new(); boundary + 1];
        for (i, e) in edges.iter().enumerate() {
            adj[e.u].push(i);
            if e.v != e.u {
                adj[e.v].push(i);
            }
        }
        let qweights = edges.iter().map(|e| quantize(e.weight)).collect();
        Ok(Self {
            m,
            window,
            n_data: code.n(),
            edges,
            qweights,
            adj,
        })
    }

    pub fn checks_per_slice(&self) -> usize {
        self.m
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn n_data(&self) -> usize {
        self.n_data
    }

    pub fn node_count(&self) -> usize {
        self.window * self.m + 1
    }

    pub fn boundary_node(&self) -> usize {
        self.window * self.m
    }

    pub fn node(&self, t: usize, check: usize) -> usize {
        debug_assert!(t < self.window && check < self.m);
        t * self.m + check
    }

    pub fn edges(&self) -> &[GraphEdge] {
        &self.edges
    }

    pub fn edge(&self, i: usize) -> &GraphEdge {
        &self.edges[i]
    }

    pub fn incident(&self, node: usize) -> &[usize] {
        &self.adj[node]
    }

    /// Single-source distances under the (weight, hops) key.
    pub fn distances_from(&self, src: usize) -> Vec<Option<DistKey>> {
        let mut dist: Vec<Option<DistKey>> = vec![None; self.node_count()];
        let mut heap = BinaryHeap::new();
        dist[src] = Some((0, 0));
        heap.push(Reverse(((0u64, 0u32), src)));
        while let Some(Reverse((key, x))) = heap.pop() {
            if dist[x] != Some(key) {
                continue;
            }
            for &ei in &self.adj[x] {
                let y = self.edges[ei].other(x);
                let cand = (key.0.saturating_add(self.qweights[ei]), key.1 + 1);
                if dist[y].is_none_or(|d| cand < d) {
                    dist[y] = Some(cand);
                    heap.push(Reverse((cand, y)));
                }
            }
        }
        dist
    }

    /// Minimal-weight path from `u` to `v`, or `None` when disconnected.
    pub fn shortest_distance(&self, u: usize, v: usize) -> Result<Option<Path>> {
        let nodes = self.node_count();
        if u >= nodes || v >= nodes {
            return Err(invalid(format!(
                "node out of range ({u}, {v}) for {nodes} nodes"
            )));
        }
        let to_v = self.distances_from(v);
        let Some(key) = to_v[u] else {
            return Ok(None);
        };
        let mut path = Path {
            weight: 0.0,
            key,
            nodes: vec![u],
            edges: Vec::new(),
        };
        let mut x = u;
        while x != v {
            let dx = to_v[x].expect("on a shortest path");
            // Smallest next node that stays on a shortest path; parallel edges
            // resolve to the smallest edge index.
            let mut best: Option<(usize, usize)> = None;
            for &ei in &self.adj[x] {
                let y = self.edges[ei].other(x);
                let Some(dy) = to_v[y] else { continue };
                if (dy.0.saturating_add(self.qweights[ei]), dy.1 + 1) == dx
                    && best.is_none_or(|(by, be)| (y, ei) < (by, be))
                {
                    best = Some((y, ei));
                }
            }
            let (y, ei) = best.expect("distance labels are consistent");
            path.weight += self.edges[ei].weight;
            path.nodes.push(y);
            path.edges.push(ei);
            x = y;
        }
        Ok(Some(path))
    }

    /// Cheapest distance from a node to the virtual boundary.
    pub fn boundary_distance(&self, node: usize) -> Result<Option<Path>> {
        self.shortest_distance(node, self.boundary_node())
    }

    /// Data edges flipped by a set of graph edges.
    pub fn data_chain<'a>(&self, edges: impl IntoIterator<Item = &'a usize>) -> BitVec {
        let mut out = BitVec::zeros(self.n_data);
        for &ei in edges {
            if let Some(d) = self.edges[ei].data_edge {
                out.flip(d);
            }
        }
        out
    }
}
