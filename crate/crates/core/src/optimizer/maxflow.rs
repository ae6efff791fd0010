//! Boykov-Kolmogorov augmenting-path max-flow on integer capacities.
//!
//! Two search trees grow from the terminals; when they touch, the path is
//! augmented and the resulting orphans are re-adopted instead of rebuilding
//! the trees. This is the usual solver for the grid graphs built by
//! expansion moves.

use std::collections::VecDeque;

pub type NodeId = usize;

type ArcId = u32;

const NONE: ArcId = u32::MAX;
const TERMINAL: ArcId = u32::MAX - 1;
const ORPHAN: ArcId = u32::MAX - 2;
const INFINITE_DIST: i64 = i64::MAX;

/// Result of a max-flow solve.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MinCut {
    pub flow: i64,
    /// `true` for nodes on the source side of the minimum cut.
    pub source_side: Vec<bool>,
}

/// Directed graph with terminal links; every arc is stored with its reverse.
#[derive(Clone, Debug, Default)]
pub struct FlowGraph {
    // Per node.
    first: Vec<ArcId>,
    parent: Vec<ArcId>,
    tr_cap: Vec<i64>,
    is_sink: Vec<bool>,
    ts: Vec<u64>,
    dist: Vec<i64>,
    active: Vec<bool>,
    // Per arc; arc `a ^ 1` is the reverse of arc `a`.
    head: Vec<u32>,
    next: Vec<ArcId>,
    r_cap: Vec<i64>,

    flow: i64,
    time: u64,
    queue: VecDeque<u32>,
    orphans: VecDeque<u32>,
}

impl FlowGraph {
    pub fn new(nodes: usize) -> Self {
        let mut g = Self::default();
        g.reset(nodes);
        g
    }

    /// Drops all arcs and terminal links, keeping allocations.
    pub fn reset(&mut self, nodes: usize) {
        self.first.clear();
        self.first.resize(nodes, NONE);
        self.parent.clear();
        self.parent.resize(nodes, NONE);
        self.tr_cap.clear();
        self.tr_cap.resize(nodes, 0);
        self.is_sink.clear();
        self.is_sink.resize(nodes, false);
        self.ts.clear();
        self.ts.resize(nodes, 0);
        self.dist.clear();
        self.dist.resize(nodes, 0);
        self.active.clear();
        self.active.resize(nodes, false);
        self.head.clear();
        self.next.clear();
        self.r_cap.clear();
        self.flow = 0;
        self.time = 0;
        self.queue.clear();
        self.orphans.clear();
    }

    pub fn node_count(&self) -> usize {
        self.first.len()
    }

    /// Adds arc `u -> v` with capacity `cap` and arc `v -> u` with `rev_cap`.
    pub fn add_edge(&mut self, u: NodeId, v: NodeId, cap: i64, rev_cap: i64) {
        assert!(cap >= 0 && rev_cap >= 0, "capacities must be non-negative");
        assert!(u != v, "self loops are not allowed");
        let a = self.head.len() as ArcId;
        self.head.push(v as u32);
        self.next.push(self.first[u]);
        self.r_cap.push(cap);
        self.first[u] = a;
        self.head.push(u as u32);
        self.next.push(self.first[v]);
        self.r_cap.push(rev_cap);
        self.first[v] = a + 1;
    }

    /// Adds capacity on the source->u and u->sink links. The common part of
    /// the two is routed immediately.
    pub fn add_tweights(&mut self, u: NodeId, source_cap: i64, sink_cap: i64) {
        assert!(source_cap >= 0 && sink_cap >= 0, "capacities must be non-negative");
        let mut cap_source = source_cap;
        let mut cap_sink = sink_cap;
        let delta = self.tr_cap[u];
        if delta > 0 {
            cap_source += delta;
        } else {
            cap_sink -= delta;
        }
        self.flow += cap_source.min(cap_sink);
        self.tr_cap[u] = cap_source - cap_sink;
    }

    #[inline]
    fn set_active(&mut self, i: usize) {
        if !self.active[i] {
            self.active[i] = true;
            self.queue.push_back(i as u32);
        }
    }

    fn next_active(&mut self) -> Option<usize> {
        while let Some(i) = self.queue.pop_front() {
            let i = i as usize;
            self.active[i] = false;
            if self.parent[i] != NONE {
                return Some(i);
            }
        }
        None
    }

    #[inline]
    fn set_orphan_front(&mut self, i: usize) {
        self.parent[i] = ORPHAN;
        self.orphans.push_front(i as u32);
    }

    #[inline]
    fn set_orphan_rear(&mut self, i: usize) {
        self.parent[i] = ORPHAN;
        self.orphans.push_back(i as u32);
    }

    /// Runs the solver and returns the max-flow value.
    pub fn max_flow(&mut self) -> i64 {
        let n = self.node_count();
        self.queue.clear();
        self.orphans.clear();
        self.time = 0;
        for i in 0..n {
            self.active[i] = false;
            self.ts[i] = 0;
            if self.tr_cap[i] > 0 {
                self.is_sink[i] = false;
                self.parent[i] = TERMINAL;
                self.set_active(i);
                self.dist[i] = 1;
            } else if self.tr_cap[i] < 0 {
                self.is_sink[i] = true;
                self.parent[i] = TERMINAL;
                self.set_active(i);
                self.dist[i] = 1;
            } else {
                self.parent[i] = NONE;
            }
        }

        let mut current: Option<usize> = None;
        loop {
            let mut node = None;
            if let Some(i) = current.take() {
                self.active[i] = false;
                if self.parent[i] != NONE {
                    node = Some(i);
                }
            }
            let i = match node.or_else(|| self.next_active()) {
                Some(i) => i,
                None => break,
            };

            let bridge = self.grow(i);
            self.time += 1;

            if bridge != NONE {
                // Keep expanding from the same node after the augmentation.
                self.active[i] = true;
                current = Some(i);
                self.augment(bridge);
                self.adopt_orphans();
            }
        }
        self.flow
    }

    /// Expands the tree containing `i` by one layer. Returns an arc going from
    /// the source tree to the sink tree if the trees touch.
    fn grow(&mut self, i: usize) -> ArcId {
        let mut a = self.first[i];
        if !self.is_sink[i] {
            while a != NONE {
                if self.r_cap[a as usize] > 0 {
                    let j = self.head[a as usize] as usize;
                    if self.parent[j] == NONE {
                        self.is_sink[j] = false;
                        self.parent[j] = a ^ 1;
                        self.ts[j] = self.ts[i];
                        self.dist[j] = self.dist[i] + 1;
                        self.set_active(j);
                    } else if self.is_sink[j] {
                        return a;
                    } else if self.ts[j] <= self.ts[i] && self.dist[j] > self.dist[i] {
                        self.parent[j] = a ^ 1;
                        self.ts[j] = self.ts[i];
                        self.dist[j] = self.dist[i] + 1;
                    }
                }
                a = self.next[a as usize];
            }
        } else {
            while a != NONE {
                if self.r_cap[(a ^ 1) as usize] > 0 {
                    let j = self.head[a as usize] as usize;
                    if self.parent[j] == NONE {
                        self.is_sink[j] = true;
                        self.parent[j] = a ^ 1;
                        self.ts[j] = self.ts[i];
                        self.dist[j] = self.dist[i] + 1;
                        self.set_active(j);
                    } else if !self.is_sink[j] {
                        return a ^ 1;
                    } else if self.ts[j] <= self.ts[i] && self.dist[j] > self.dist[i] {
                        self.parent[j] = a ^ 1;
                        self.ts[j] = self.ts[i];
                        self.dist[j] = self.dist[i] + 1;
                    }
                }
                a = self.next[a as usize];
            }
        }
        NONE
    }

    fn augment(&mut self, bridge: ArcId) {
        let bridge = bridge as usize;
        let mut bottleneck = self.r_cap[bridge];

        // Source tree: parent arcs point from a node towards the source.
        let mut i = self.head[bridge ^ 1] as usize;
        loop {
            let a = self.parent[i];
            if a == TERMINAL {
                break;
            }
            bottleneck = bottleneck.min(self.r_cap[(a ^ 1) as usize]);
            i = self.head[a as usize] as usize;
        }
        bottleneck = bottleneck.min(self.tr_cap[i]);

        // Sink tree: parent arcs point from a node towards the sink.
        let mut i = self.head[bridge] as usize;
        loop {
            let a = self.parent[i];
            if a == TERMINAL {
                break;
            }
            bottleneck = bottleneck.min(self.r_cap[a as usize]);
            i = self.head[a as usize] as usize;
        }
        bottleneck = bottleneck.min(-self.tr_cap[i]);

        self.r_cap[bridge ^ 1] += bottleneck;
        self.r_cap[bridge] -= bottleneck;

        let mut i = self.head[bridge ^ 1] as usize;
        loop {
            let a = self.parent[i];
            if a == TERMINAL {
                break;
            }
            let a = a as usize;
            self.r_cap[a] += bottleneck;
            self.r_cap[a ^ 1] -= bottleneck;
            if self.r_cap[a ^ 1] == 0 {
                self.set_orphan_front(i);
            }
            i = self.head[a] as usize;
        }
        self.tr_cap[i] -= bottleneck;
        if self.tr_cap[i] == 0 {
            self.set_orphan_front(i);
        }

        let mut i = self.head[bridge] as usize;
        loop {
            let a = self.parent[i];
            if a == TERMINAL {
                break;
            }
            let a = a as usize;
            self.r_cap[a ^ 1] += bottleneck;
            self.r_cap[a] -= bottleneck;
            if self.r_cap[a] == 0 {
                self.set_orphan_front(i);
            }
            i = self.head[a] as usize;
        }
        self.tr_cap[i] += bottleneck;
        if self.tr_cap[i] == 0 {
            self.set_orphan_front(i);
        }

        self.flow += bottleneck;
    }

    fn adopt_orphans(&mut self) {
        while let Some(i) = self.orphans.pop_front() {
            self.process_orphan(i as usize);
        }
    }

    /// Looks for a new parent of orphan `i` within its own tree whose path to
    /// the terminal does not pass through another orphan. Without one, `i`
    /// becomes free and its children become orphans.
    fn process_orphan(&mut self, i: usize) {
        let sink_tree = self.is_sink[i];
        let mut best_arc = NONE;
        let mut best_dist = INFINITE_DIST;

        let mut a0 = self.first[i];
        while a0 != NONE {
            // Capacity in the direction flow would travel through this arc.
            let cap = if sink_tree {
                self.r_cap[a0 as usize]
            } else {
                self.r_cap[(a0 ^ 1) as usize]
            };
            let j0 = self.head[a0 as usize] as usize;
            if cap > 0 && self.is_sink[j0] == sink_tree && self.parent[j0] != NONE {
                let mut j = j0;
                let mut d: i64 = 0;
                loop {
                    if self.ts[j] == self.time {
                        d += self.dist[j];
                        break;
                    }
                    let a = self.parent[j];
                    d += 1;
                    if a == TERMINAL {
                        self.ts[j] = self.time;
                        self.dist[j] = 1;
                        break;
                    }
                    if a == ORPHAN {
                        d = INFINITE_DIST;
                        break;
                    }
                    j = self.head[a as usize] as usize;
                }
                if d < INFINITE_DIST {
                    if d < best_dist {
                        best_arc = a0;
                        best_dist = d;
                    }
                    let mut j = j0;
                    while self.ts[j] != self.time {
                        self.ts[j] = self.time;
                        self.dist[j] = d;
                        d -= 1;
                        j = self.head[self.parent[j] as usize] as usize;
                    }
                }
            }
            a0 = self.next[a0 as usize];
        }

        self.parent[i] = best_arc;
        if best_arc != NONE {
            self.ts[i] = self.time;
            self.dist[i] = best_dist + 1;
            return;
        }

        let mut a0 = self.first[i];
        while a0 != NONE {
            let j = self.head[a0 as usize] as usize;
            let a = self.parent[j];
            if self.is_sink[j] == sink_tree && a != NONE {
                let cap = if sink_tree {
                    self.r_cap[a0 as usize]
                } else {
                    self.r_cap[(a0 ^ 1) as usize]
                };
                if cap > 0 {
                    self.set_active(j);
                }
                if a != TERMINAL && a != ORPHAN && self.head[a as usize] as usize == i {
                    self.set_orphan_rear(j);
                }
            }
            a0 = self.next[a0 as usize];
        }
    }

    /// Side of node `u` after [`FlowGraph::max_flow`]. Nodes reachable from
    /// neither terminal are reported on the source side.
    #[inline]
    pub fn is_source_side(&self, u: NodeId) -> bool {
        !(self.parent[u] != NONE && self.is_sink[u])
    }

    pub fn min_cut(&mut self) -> MinCut {
        let flow = self.max_flow();
        MinCut {
            flow,
            source_side: (0..self.node_count()).map(|u| self.is_source_side(u)).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn series_bottleneck() {
        let mut g = FlowGraph::new(2);
        g.add_tweights(0, 3, 0);
        g.add_edge(0, 1, 5, 0);
        g.add_tweights(1, 0, 7);
        let cut = g.min_cut();
        assert_eq!(cut.flow, 3);
        assert_eq!(cut.source_side, vec![false, false]);
    }

    #[test]
    fn disconnected_sink_carries_nothing() {
        let mut g = FlowGraph::new(3);
        g.add_tweights(0, 10, 0);
        g.add_edge(0, 1, 4, 4);
        g.add_tweights(2, 0, 10);
        assert_eq!(g.max_flow(), 0);
        assert!(g.is_source_side(0) && g.is_source_side(1));
        assert!(!g.is_source_side(2));
    }

    #[test]
    fn direct_terminal_links_cancel() {
        let mut g = FlowGraph::new(1);
        g.add_tweights(0, 5, 3);
        g.add_tweights(0, 1, 0);
        assert_eq!(g.max_flow(), 3);
    }

    #[test]
    fn reset_reuses_the_graph() {
        let mut g = FlowGraph::new(2);
        g.add_tweights(0, 9, 0);
        g.add_edge(0, 1, 9, 0);
        g.add_tweights(1, 0, 9);
        assert_eq!(g.max_flow(), 9);
        g.reset(2);
        g.add_tweights(0, 2, 0);
        g.add_edge(0, 1, 9, 0);
        g.add_tweights(1, 0, 9);
        assert_eq!(g.max_flow(), 2);
    }

    #[test]
    fn dense_random_graph_cut_is_consistent() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let n = 40;
        let mut g = FlowGraph::new(n);
        let mut edges = Vec::new();
        let mut tw = vec![(0i64, 0i64); n];
        for u in 0..n {
            let s = rng.random_range(0..20);
            let t = rng.random_range(0..20);
            g.add_tweights(u, s, t);
            tw[u] = (s, t);
            for v in u + 1..n {
                if rng.random_bool(0.2) {
                    let (c, r) = (rng.random_range(0..15), rng.random_range(0..15));
                    g.add_edge(u, v, c, r);
                    edges.push((u, v, c, r));
                }
            }
        }
        let cut = g.min_cut();
        let mut cap = 0;
        for (u, &(s, t)) in tw.iter().enumerate() {
            cap += if cut.source_side[u] { t } else { s };
        }
        for &(u, v, c, r) in &edges {
            match (cut.source_side[u], cut.source_side[v]) {
                (true, false) => cap += c,
                (false, true) => cap += r,
                _ => {}
            }
        }
        assert_eq!(cap, cut.flow);
    }
}
