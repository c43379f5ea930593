//! Bounded-pass Union-Find decoder.
//!
//! Clusters grow on the unit-weight decoding graph in half-edge steps. Each
//! grow pass is computed from a snapshot of which clusters are odd, so the
//! result does not depend on edge visiting order. Edges that become full are
//! merged in sweeps: candidate root pairs are taken in ascending
//! `(min_root, max_root)` order and each root joins at most one union per
//! sweep; the rest wait for the next sweep. Every grow pass and every merge
//! sweep increments `pass_counter`, which may never exceed `P_max`.
//!
//! The virtual boundary node never joins a cluster. Boundary edges start
//! half-grown from the boundary side, and a cluster that fills one is marked
//! `boundary_touch`. Peeling roots each cluster's spanning tree at its
//! smallest boundary-touching node, or at its smallest node when it never
//! reached the boundary.

use std::collections::{BTreeSet, VecDeque};

use crate::error::{invalid, Result};
use crate::flags::Flags;
use crate::geometry::{Chain1, CodeSpec};
use crate::gf2::BitVec;
use crate::graph::DecodingGraph;
use crate::noise::DetectionFrame;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Limits {
    /// Maximum number of grow passes.
    pub r_max: u32,
    /// Maximum number of grow passes plus merge sweeps.
    pub p_max: u32,
}

impl Limits {
    pub fn new(r_max: u32, p_max: u32) -> Result<Self> {
        if r_max == 0 || p_max < r_max {
            return Err(invalid(format!(
                "need 1 <= r_max <= p_max, got {r_max}, {p_max}"
            )));
        }
        Ok(Self { r_max, p_max })
    }

    /// `R_max = d`, `P_max = 4 R_max + 8`.
    pub fn for_distance(d: usize) -> Self {
        let r_max = d.max(1) as u32;
        Self {
            r_max,
            p_max: default_p_max(r_max),
        }
    }
}

pub fn default_p_max(r_max: u32) -> u32 {
    4 * r_max + 8
}

#[derive(Clone, Debug)]
pub struct UfState {
    pub parent: Vec<usize>,
    pub rank: Vec<u8>,
    pub charge: Vec<bool>,
    pub boundary_touch: Vec<bool>,
    pub radius: Vec<u32>,
    pub active: Vec<bool>,
    /// Half-edge support per graph edge, 0..=2.
    pub support: Vec<u8>,
    pub defect: Vec<bool>,
    pub pass_counter: u32,
    pub grow_passes: u32,
    boundary: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct GrowResult {
    pub dirty: bool,
    /// Endpoint pairs of edges that became full in this pass.
    pub candidates: Vec<(usize, usize)>,
}

impl UfState {
    pub fn new(graph: &DecodingGraph) -> Self {
        let nodes = graph.node_count();
        let boundary = graph.boundary_node();
        let support = graph
            .edges()
            .iter()
            .map(|e| u8::from(e.u == boundary || e.v == boundary))
            .collect();
        Self {
            parent: (0..nodes).collect(),
            rank: vec![0; nodes],
            charge: vec![false; nodes],
            boundary_touch: vec![false; nodes],
            radius: vec![0; nodes],
            active: vec![false; nodes],
            support,
            defect: vec![false; nodes],
            pass_counter: 0,
            grow_passes: 0,
            boundary,
        }
    }

    /// One singleton cluster of charge 1 per defect node.
    pub fn load(&mut self, defects: &[usize]) {
        for &d in defects {
            debug_assert_ne!(d, self.boundary);
            self.defect[d] ^= true;
        }
        for i in 0..self.defect.len() {
            if self.defect[i] {
                self.active[i] = true;
                self.charge[i] = true;
            }
        }
    }

    /// Root of `i`, halving the path on the way. Returns the root and the
    /// number of parent hops taken.
    pub fn find_counted(&mut self, mut i: usize) -> (usize, usize) {
        let mut steps = 0;
        while self.parent[i] != i {
            let gp = self.parent[self.parent[i]];
            self.parent[i] = gp;
            i = gp;
            steps += 1;
        }
        (i, steps)
    }

    pub fn find(&mut self, i: usize) -> usize {
        self.find_counted(i).0
    }

    /// Merges two sets. Higher rank wins; equal ranks go to the smaller root
    /// id, whose rank then grows by one.
    pub fn union(&mut self, a: usize, b: usize) -> usize {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return ra;
        }
        let (w, l) = match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Greater => (ra, rb),
            std::cmp::Ordering::Less => (rb, ra),
            std::cmp::Ordering::Equal => {
                let (w, l) = if ra < rb { (ra, rb) } else { (rb, ra) };
                self.rank[w] += 1;
                (w, l)
            }
        };
        self.parent[l] = w;
        self.charge[w] ^= self.charge[l];
        self.boundary_touch[w] |= self.boundary_touch[l];
        self.radius[w] = self.radius[w].max(self.radius[l]);
        w
    }

    fn is_growing_root(&self, r: usize) -> bool {
        self.charge[r] && !self.boundary_touch[r]
    }

    /// True when some cluster is odd and has not reached the boundary.
    pub fn has_growing_cluster(&mut self) -> bool {
        (0..self.parent.len()).any(|i| {
            if !self.active[i] {
                return false;
            }
            let r = self.find(i);
            self.is_growing_root(r)
        })
    }

    /// Every growing cluster claims one more half of each frontier edge.
    pub fn grow_pass(&mut self, graph: &DecodingGraph) -> GrowResult {
        let n = self.parent.len();
        let mut growing = vec![false; n];
        let mut grown_roots = BTreeSet::new();
        for (i, g) in growing.iter_mut().enumerate() {
            if self.active[i] {
                let r = self.find(i);
                if self.is_growing_root(r) {
                    *g = true;
                    grown_roots.insert(r);
                }
            }
        }
        let mut out = GrowResult::default();
        for (ei, e) in graph.edges().iter().enumerate() {
            if self.support[ei] >= 2 {
                continue;
            }
            let inc = u8::from(growing[e.u]) + u8::from(growing[e.v]);
            if inc == 0 {
                continue;
            }
            self.support[ei] = (self.support[ei] + inc).min(2);
            out.dirty = true;
            if self.support[ei] == 2 {
                out.candidates.push((e.u, e.v));
            }
        }
        for r in grown_roots {
            self.radius[r] += 1;
        }
        self.pass_counter += 1;
        self.grow_passes += 1;
        out
    }

    /// One arbitrated merge sweep. Returns the candidates deferred to the
    /// next sweep.
    pub fn merge_pass(&mut self, candidates: &[(usize, usize)]) -> Vec<(usize, usize)> {
        if candidates.is_empty() {
            return Vec::new();
        }
        let mut pairs = BTreeSet::new();
        for &(u, v) in candidates {
            if u == self.boundary || v == self.boundary {
                let x = if u == self.boundary { v } else { u };
                if self.active[x] {
                    let r = self.find(x);
                    self.boundary_touch[r] = true;
                }
                continue;
            }
            for x in [u, v] {
                self.active[x] = true;
            }
            let (ru, rv) = (self.find(u), self.find(v));
            if ru != rv {
                pairs.insert((ru.min(rv), ru.max(rv)));
            }
        }
        let mut locked = BTreeSet::new();
        let mut deferred = Vec::new();
        for (a, b) in pairs {
            if locked.contains(&a) || locked.contains(&b) {
                deferred.push((a, b));
                continue;
            }
            self.union(a, b);
            locked.insert(a);
            locked.insert(b);
        }
        self.pass_counter += 1;
        deferred
    }

    /// Extracts a correction from the full-edge forest. Returns the chosen
    /// graph edges, or an error naming the odd cluster that cannot be
    /// neutralized.
    ///
    /// A cluster with full boundary edges is rooted at its smallest node that
    /// owns one, and only that node's first boundary edge can carry the
    /// cluster's leftover parity; other boundary edges stay unused leaves.
    pub fn peel(&self, graph: &DecodingGraph) -> std::result::Result<Vec<usize>, String> {
        let n = self.parent.len();
        let mut seen = vec![false; n];
        let mut residual = self.defect.clone();
        let mut chosen = Vec::new();
        for start in 0..n {
            if !self.active[start] || seen[start] || start == self.boundary {
                continue;
            }
            let (mut component, _) = self.bfs_tree(graph, start, &mut seen);
            component.sort_unstable();
            let anchor = component
                .iter()
                .find_map(|&x| self.full_boundary_edge(graph, x).map(|e| (x, e)));
            let root = anchor.map_or(start, |(x, _)| x);
            let mut scratch = vec![false; n];
            let (order, parent_edge) = self.bfs_tree(graph, root, &mut scratch);
            for &x in order.iter().skip(1).rev() {
                if residual[x] {
                    let ei = parent_edge[x].expect("non-root has a parent edge");
                    chosen.push(ei);
                    residual[x] = false;
                    residual[graph.edge(ei).other(x)] ^= true;
                }
            }
            if residual[root] {
                match anchor {
                    Some((_, ei)) => {
                        chosen.push(ei);
                        residual[root] = false;
                    }
                    None => {
                        return Err(format!("odd cluster rooted at node {root} has no boundary"))
                    }
                }
            }
        }
        chosen.sort_unstable();
        Ok(chosen)
    }

    fn full_boundary_edge(&self, graph: &DecodingGraph, x: usize) -> Option<usize> {
        graph
            .incident(x)
            .iter()
            .copied()
            .find(|&ei| self.support[ei] >= 2 && graph.edge(ei).other(x) == self.boundary)
    }

    /// Breadth-first spanning tree over full non-boundary edges, visiting
    /// incident edges in index order.
    fn bfs_tree(
        &self,
        graph: &DecodingGraph,
        root: usize,
        seen: &mut [bool],
    ) -> (Vec<usize>, Vec<Option<usize>>) {
        let mut parent_edge = vec![None; seen.len()];
        seen[root] = true;
        let mut order = vec![root];
        let mut queue = VecDeque::from([root]);
        while let Some(x) = queue.pop_front() {
            for &ei in graph.incident(x) {
                let y = graph.edge(ei).other(x);
                if self.support[ei] < 2 || y == self.boundary || seen[y] {
                    continue;
                }
                seen[y] = true;
                parent_edge[y] = Some(ei);
                order.push(y);
                queue.push_back(y);
            }
        }
        (order, parent_edge)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DecodeOutcome {
    pub correction: Chain1,
    pub flags: Flags,
    pub grow_passes: u32,
    pub pass_counter: u32,
    /// Graph edges selected by the peel.
    pub peel_edges: usize,
    pub defects: usize,
    pub reason: Option<String>,
}

/// A decoder bound to one code and window size.
#[derive(Clone, Debug)]
pub struct UfDecoder {
    code: CodeSpec,
    graph: DecodingGraph,
    limits: Limits,
}

impl UfDecoder {
    pub fn new(code: CodeSpec, window: usize, limits: Limits) -> Result<Self> {
        let graph = DecodingGraph::build_uniform(&code, window)?;
        Ok(Self {
            code,
            graph,
            limits,
        })
    }

    pub fn code(&self) -> &CodeSpec {
        &self.code
    }

    pub fn graph(&self) -> &DecodingGraph {
        &self.graph
    }

    pub fn limits(&self) -> Limits {
        self.limits
    }

    /// Decodes up to `W` frames as one window. Frame `i` occupies slice `i`.
    pub fn decode_window(&self, frames: &[DetectionFrame]) -> DecodeOutcome {
        let m = self.code.m_x();
        let mut flags = Flags::OK;
        if frames.len() > self.graph.window() {
            return fail(
                Flags::DESYNC,
                format!("{} frames exceed window", frames.len()),
                0,
                0,
            );
        }
        if frames.windows(2).any(|w| w[1].round_t <= w[0].round_t) {
            return fail(Flags::DESYNC, "non-monotone rounds in window".into(), 0, 0);
        }
        let mut defects = Vec::new();
        let mut window_syndrome = BitVec::zeros(m);
        for (t, f) in frames.iter().enumerate() {
            if !f.valid {
                flags |= Flags::ERASURE;
                continue;
            }
            if f.bits.len() != m {
                return fail(Flags::CORRUPT, "frame width mismatch".into(), 0, 0);
            }
            for c in f.bits.iter_ones() {
                defects.push(self.graph.node(t, c));
            }
            window_syndrome.xor_assign(&f.bits);
        }
        self.decode_defects(&defects, &window_syndrome, flags)
    }

    fn decode_defects(
        &self,
        defects: &[usize],
        window_syndrome: &BitVec,
        flags: Flags,
    ) -> DecodeOutcome {
        let mut st = UfState::new(&self.graph);
        st.load(defects);
        let fatal = |st: &UfState, why: &str| {
            fail(
                flags | Flags::FATAL,
                why.into(),
                st.grow_passes,
                st.pass_counter,
            )
        };
        while st.has_growing_cluster() {
            if st.grow_passes >= self.limits.r_max {
                return fatal(&st, "growth budget exhausted");
            }
            if st.pass_counter >= self.limits.p_max {
                return fatal(&st, "pass budget exhausted");
            }
            let grown = st.grow_pass(&self.graph);
            if !grown.dirty {
                return fatal(&st, "odd cluster cannot grow");
            }
            let mut pending = grown.candidates;
            while !pending.is_empty() {
                if st.pass_counter >= self.limits.p_max {
                    return fatal(&st, "pass budget exhausted during merge");
                }
                pending = st.merge_pass(&pending);
            }
        }
        let chosen = match st.peel(&self.graph) {
            Ok(c) => c,
            Err(why) => return fatal(&st, &why),
        };
        let correction = Chain1(self.graph.data_chain(&chosen));
        match self.code.boundary(&correction) {
            Ok(s) if s.0 == *window_syndrome => {}
            _ => return fatal(&st, "correction is not syndrome-consistent"),
        }
        DecodeOutcome {
            correction,
            flags,
            grow_passes: st.grow_passes,
            pass_counter: st.pass_counter,
            peel_edges: chosen.len(),
            defects: defects.len(),
            reason: None,
        }
    }

    /// Convenience for a single perfect-measurement round.
    pub fn decode_syndrome(&self, syndrome: &BitVec) -> DecodeOutcome {
        self.decode_window(&[DetectionFrame::new(0, syndrome.clone())])
    }
}

fn fail(flags: Flags, reason: String, grow_passes: u32, pass_counter: u32) -> DecodeOutcome {
    DecodeOutcome {
        correction: Chain1(BitVec::zeros(0)),
        flags,
        grow_passes,
        pass_counter,
        peel_edges: 0,
        defects: 0,
        reason: Some(reason),
    }
}
