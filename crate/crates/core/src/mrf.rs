//! Binary-label area matching as a Markov random field.
//!
//! Each node is a candidate area with a similarity score in `[0, 1]`;
//! labeling it 1 proposes a match. The energy charges `|x_i - S_i|` per
//! node plus `lambda * w_ij` for every related pair labeled differently,
//! so coherent neighbourhoods are kept or dropped together. Minimization
//! is exact: the energy is submodular, so an s-t min cut solves it. A
//! brute-force reference minimizer guards the reduction.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::AreaGraph;
use crate::maxflow::{FlowNetwork, FLOW_EPS};

#[derive(Debug, Error, PartialEq)]
pub enum MrfError {
    #[error("brute force refused for {0} nodes (limit {MAX_BRUTE_FORCE_NODES})")]
    TooLarge(usize),
    #[error("invalid instance: {0}")]
    Invalid(String),
}

/// Largest node count `brute_force_min` accepts.
pub const MAX_BRUTE_FORCE_NODES: usize = 20;

/// One minimization problem: per-node similarities, weighted undirected
/// pairs, and the pairwise strength `lambda`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MrfInstance {
    pub node_sims: Vec<f64>,
    pub pair_weights: Vec<(usize, usize, f64)>,
    pub lambda: f64,
}

impl MrfInstance {
    pub fn validate(&self) -> Result<(), MrfError> {
        let n = self.node_sims.len();
        for (i, &s) in self.node_sims.iter().enumerate() {
            if !(0.0..=1.0).contains(&s) {
                return Err(MrfError::Invalid(format!("similarity {s} at node {i}")));
            }
        }
        for &(a, b, w) in &self.pair_weights {
            if a >= n || b >= n {
                return Err(MrfError::Invalid(format!("pair ({a}, {b}) out of range")));
            }
            if a == b {
                return Err(MrfError::Invalid(format!("self pair on node {a}")));
            }
            if !(w >= 0.0) {
                return Err(MrfError::Invalid(format!("negative pair weight {w}")));
            }
        }
        if !(self.lambda >= 0.0) {
            return Err(MrfError::Invalid(format!("negative lambda {}", self.lambda)));
        }
        Ok(())
    }

    /// `sum_i |x_i - S_i| + lambda * sum_ij w_ij * [x_i != x_j]`.
    pub fn total_energy(&self, labels: &[bool]) -> f64 {
        assert_eq!(labels.len(), self.node_sims.len());
        let mut e = 0.0;
        for (i, &s) in self.node_sims.iter().enumerate() {
            e += if labels[i] { 1.0 - s } else { s };
        }
        for &(a, b, w) in &self.pair_weights {
            if labels[a] != labels[b] {
                e += self.lambda * w;
            }
        }
        e
    }
}

/// Exact minimization by s-t min cut. Labeling a node 1 cuts its edge to
/// the sink (cost `1 - S_i`), labeling it 0 cuts the source edge (cost
/// `S_i`), and split pairs cut a `lambda * w` edge. Of all minimizers the
/// residual reachability picks the one with the fewest 1-labels, which is
/// also the first one `brute_force_min` encounters.
pub fn graph_cut(inst: &MrfInstance) -> Vec<bool> {
    let n = inst.node_sims.len();
    if n == 0 {
        return Vec::new();
    }
    let (s, t) = (n, n + 1);
    let mut net = FlowNetwork::new(n + 2);
    for (i, &sim) in inst.node_sims.iter().enumerate() {
        net.add_edge(s, i, sim, 0.0);
        net.add_edge(i, t, 1.0 - sim, 0.0);
    }
    for &(a, b, w) in &inst.pair_weights {
        let c = inst.lambda * w;
        if c > FLOW_EPS {
            net.add_edge(a, b, c, c);
        }
    }
    net.max_flow(s, t);
    let side = net.source_side(s);
    (0..n).map(|i| side[i]).collect()
}

/// Reference minimizer enumerating all labelings; keeps the first strict
/// minimum, so ties resolve to the lowest bit pattern with node 0 as the
/// most significant bit.
pub fn brute_force_min(inst: &MrfInstance) -> Result<Vec<bool>, MrfError> {
    let n = inst.node_sims.len();
    if n > MAX_BRUTE_FORCE_NODES {
        return Err(MrfError::TooLarge(n));
    }
    let mut best_labels = vec![false; n];
    let mut best = inst.total_energy(&best_labels);
    for mask in 1u32..1 << n {
        let labels: Vec<bool> = (0..n).map(|i| mask >> (n - 1 - i) & 1 == 1).collect();
        let e = inst.total_energy(&labels);
        if e < best {
            best = e;
            best_labels = labels;
        }
    }
    Ok(best_labels)
}

/// An instance built over one area graph: MRF node `k` stands for graph
/// node `node_ids[k]`.
#[derive(Debug, Clone)]
pub struct TargetMrf {
    pub instance: MrfInstance,
    pub node_ids: Vec<usize>,
}

/// Builds the matching instance for one source area over a whole target
/// graph. Nodes are ordered by descending level then ascending id;
/// `sim_of` supplies the similarity of each target node to the source;
/// every target-graph edge becomes a pair weighted by rect overlap (IoU).
pub fn build_instance(
    target: &AreaGraph,
    mut sim_of: impl FnMut(usize) -> f64,
    lambda: f64,
) -> TargetMrf {
    let mut node_ids: Vec<usize> = (0..target.nodes.len()).collect();
    node_ids.sort_by_key(|&id| (std::cmp::Reverse(target.nodes[id].level), id));
    let mut index_of = vec![usize::MAX; target.nodes.len()];
    for (k, &id) in node_ids.iter().enumerate() {
        index_of[id] = k;
    }
    let node_sims: Vec<f64> = node_ids.iter().map(|&id| sim_of(id).clamp(0.0, 1.0)).collect();
    let mut pair_weights = Vec::new();
    for &(a, b) in target.inclusion_edges.iter().chain(&target.adjacency_edges) {
        let w = target.nodes[a].rect.iou(&target.nodes[b].rect);
        if w > 0.0 {
            pair_weights.push((index_of[a], index_of[b], w));
        }
    }
    TargetMrf { instance: MrfInstance { node_sims, pair_weights, lambda }, node_ids }
}

/// Deterministic random instance for fuzzing: 1 to `max_nodes` nodes,
/// uniform similarities, sparse random pairs, lambda drawn from
/// `{0, 0.1, 1}`.
pub fn random_instance(seed: u64, max_nodes: usize) -> MrfInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(1..=max_nodes.max(1));
    let node_sims: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..=1.0)).collect();
    let mut pair_weights = Vec::new();
    for a in 0..n {
        for b in (a + 1)..n {
            if rng.gen_bool(0.3) {
                pair_weights.push((a, b, rng.gen_range(0.0..=1.0)));
            }
        }
    }
    let lambda = [0.0, 0.1, 1.0][rng.gen_range(0..3)];
    MrfInstance { node_sims, pair_weights, lambda }
}
