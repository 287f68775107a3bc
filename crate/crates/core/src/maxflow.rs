//! s-t maximum flow on small real-capacity networks (Dinic's algorithm),
//! with residual-graph access for extracting the unique minimal min-cut
//! source side.

/// Residual capacities at or below this count as exhausted.
pub const FLOW_EPS: f64 = 1e-12;

/// Directed flow network with adjacency lists. Edges are added in
/// forward/reverse pairs so edge `e`'s reverse is `e ^ 1`.
#[derive(Debug, Clone)]
pub struct FlowNetwork {
    adj: Vec<Vec<usize>>,
    to: Vec<usize>,
    cap: Vec<f64>,
}

impl FlowNetwork {
    pub fn new(num_nodes: usize) -> Self {
        FlowNetwork { adj: vec![Vec::new(); num_nodes], to: Vec::new(), cap: Vec::new() }
    }

    pub fn num_nodes(&self) -> usize {
        self.adj.len()
    }

    /// Adds the edge `u -> v` with capacity `cap` and its reverse
    /// `v -> u` with capacity `rev_cap` (0 for a purely directed edge).
    pub fn add_edge(&mut self, u: usize, v: usize, cap: f64, rev_cap: f64) {
        assert!(cap >= 0.0 && rev_cap >= 0.0, "capacities must be non-negative");
        assert!(u != v, "self loops are not allowed");
        self.adj[u].push(self.to.len());
        self.to.push(v);
        self.cap.push(cap);
        self.adj[v].push(self.to.len());
        self.to.push(u);
        self.cap.push(rev_cap);
    }

    fn bfs_levels(&self, s: usize, t: usize) -> Option<Vec<i32>> {
        let mut level = vec![-1; self.num_nodes()];
        level[s] = 0;
        let mut queue = std::collections::VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            for &e in &self.adj[u] {
                let v = self.to[e];
                if level[v] < 0 && self.cap[e] > FLOW_EPS {
                    level[v] = level[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        (level[t] >= 0).then_some(level)
    }

    fn dfs_push(&mut self, u: usize, t: usize, pushed: f64, level: &[i32], it: &mut [usize]) -> f64 {
        if u == t {
            return pushed;
        }
        while it[u] < self.adj[u].len() {
            let e = self.adj[u][it[u]];
            let v = self.to[e];
            if level[v] == level[u] + 1 && self.cap[e] > FLOW_EPS {
                let got = self.dfs_push(v, t, pushed.min(self.cap[e]), level, it);
                if got > FLOW_EPS {
                    self.cap[e] -= got;
                    self.cap[e ^ 1] += got;
                    return got;
                }
            }
            it[u] += 1;
        }
        0.0
    }

    /// Runs Dinic's algorithm to saturation and returns the total flow.
    /// The network afterwards holds residual capacities.
    pub fn max_flow(&mut self, s: usize, t: usize) -> f64 {
        assert_ne!(s, t);
        let mut total = 0.0;
        while let Some(level) = self.bfs_levels(s, t) {
            let mut it = vec![0usize; self.num_nodes()];
            loop {
                let got = self.dfs_push(s, t, f64::INFINITY, &level, &mut it);
                if got <= FLOW_EPS {
                    break;
                }
                total += got;
            }
        }
        total
    }

    /// Nodes reachable from `s` in the residual graph. Called after
    /// `max_flow`, this is the smallest min-cut source side (the
    /// intersection of every minimum cut's source side).
    pub fn source_side(&self, s: usize) -> Vec<bool> {
        let mut seen = vec![false; self.num_nodes()];
        seen[s] = true;
        let mut stack = vec![s];
        while let Some(u) = stack.pop() {
            for &e in &self.adj[u] {
                let v = self.to[e];
                if !seen[v] && self.cap[e] > FLOW_EPS {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        seen
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_edge() {
        let mut net = FlowNetwork::new(2);
        net.add_edge(0, 1, 3.5, 0.0);
        assert!((net.max_flow(0, 1) - 3.5).abs() < 1e-12);
        let side = net.source_side(0);
        assert_eq!(side, vec![true, false]);
    }

    #[test]
    fn classic_diamond() {
        // s=0, t=3; two paths with a cross edge. Max flow = 5.
        let mut net = FlowNetwork::new(4);
        net.add_edge(0, 1, 3.0, 0.0);
        net.add_edge(0, 2, 2.0, 0.0);
        net.add_edge(1, 2, 1.0, 0.0);
        net.add_edge(1, 3, 2.0, 0.0);
        net.add_edge(2, 3, 3.0, 0.0);
        assert!((net.max_flow(0, 3) - 5.0).abs() < 1e-12);
    }

    #[test]
    fn bottleneck_in_the_middle() {
        let mut net = FlowNetwork::new(4);
        net.add_edge(0, 1, 10.0, 0.0);
        net.add_edge(1, 2, 0.25, 0.0);
        net.add_edge(2, 3, 10.0, 0.0);
        assert!((net.max_flow(0, 3) - 0.25).abs() < 1e-12);
        // The cut sits at the bottleneck.
        assert_eq!(net.source_side(0), vec![true, true, false, false]);
    }

    /// Cut value of a given source set, for the brute-force comparison.
    fn cut_value(edges: &[(usize, usize, f64, f64)], in_src: u32) -> f64 {
        let side = |v: usize| in_src >> v & 1 == 1;
        let mut total = 0.0;
        for &(u, v, cap, rev_cap) in edges {
            if side(u) && !side(v) {
                total += cap;
            }
            if side(v) && !side(u) {
                total += rev_cap;
            }
        }
        total
    }

    #[test]
    fn matches_exhaustive_min_cut_on_random_networks() {
        // Deterministic pseudo-random small networks; the max flow must
        // equal the minimum over all 2^(n-2) source sets.
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..50 {
            let n = 5;
            let (s, t) = (0, n - 1);
            let mut net = FlowNetwork::new(n);
            let mut edges = Vec::new();
            for u in 0..n {
                for v in (u + 1)..n {
                    if next() < 0.7 {
                        let cap = next() * 2.0;
                        let rev = if next() < 0.5 { next() } else { 0.0 };
                        net.add_edge(u, v, cap, rev);
                        edges.push((u, v, cap, rev));
                    }
                }
            }
            let flow = net.max_flow(s, t);
            let mut best = f64::INFINITY;
            for mask in 0u32..1 << n {
                if mask >> s & 1 == 1 && mask >> t & 1 == 0 {
                    best = best.min(cut_value(&edges, mask));
                }
            }
            assert!(
                (flow - best).abs() < 1e-9,
                "flow {flow} vs exhaustive min cut {best}"
            );
        }
    }

    #[test]
    fn source_side_is_contained_in_every_min_cut() {
        // With a tie between two cuts, the residual side is the smaller one.
        let mut net = FlowNetwork::new(3);
        net.add_edge(0, 1, 1.0, 0.0);
        net.add_edge(1, 2, 1.0, 0.0);
        net.max_flow(0, 2);
        // Both {0} and {0,1} are minimum cuts; reachability gives {0}.
        assert_eq!(net.source_side(0), vec![true, false, false]);
    }
}
