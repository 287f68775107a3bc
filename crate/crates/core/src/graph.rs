//! Hierarchical area graphs.
//!
//! Nodes are rectangular image areas placed on a ladder of size levels.
//! Directed inclusion edges run from a containing area (parent) to a
//! contained one (child); undirected adjacency edges join areas that
//! overlap without containment. Construction is staged:
//!
//! 1. `preprocess` filters tiny or sliver input areas and fuses them into
//!    their nearest surviving neighbour,
//! 2. `build_initial_graph` classifies every node pair into inclusion,
//!    adjacency, or no edge,
//! 3. `complete_graph` synthesizes parent areas (by clustering, fusion and
//!    expansion) until every node below the top level has a parent.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cluster::{cluster_points, label_groups};
use crate::geometry::{expand_to_level, GeometryError, ImageDims, Level, LevelThresholds, Rect};

/// Errors from graph construction.
#[derive(Debug, Error)]
pub enum GraphError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("invalid graph configuration: {0}")]
    Config(String),
}

/// Parameters controlling graph construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphConfig {
    /// Minimum area size in square pixels; must equal the lowest level
    /// threshold so every surviving area has a level.
    pub t_s: f64,
    /// Maximum width/height (or height/width) ratio of a kept area.
    pub t_r: f64,
    /// Size-level ladder.
    pub thresholds: LevelThresholds,
    /// Overlap score at or below which a pair gets no edge.
    pub delta_l: f64,
    /// Overlap score at or above which a pair gets an inclusion edge;
    /// scores strictly between `delta_l` and `delta_h` give adjacency.
    pub delta_h: f64,
    /// Working resolution all input areas are rescaled to.
    pub work_dims: ImageDims,
}

impl Default for GraphConfig {
    fn default() -> Self {
        GraphConfig {
            t_s: 6400.0,
            t_r: 4.0,
            thresholds: LevelThresholds::default(),
            delta_l: 0.1,
            delta_h: 0.8,
            work_dims: ImageDims { width: 640, height: 480 },
        }
    }
}

impl GraphConfig {
    pub fn validate(&self) -> Result<(), GraphError> {
        if self.t_s != self.thresholds.lower_bound(0) {
            return Err(GraphError::Config(format!(
                "t_s ({}) must equal the lowest level threshold ({})",
                self.t_s,
                self.thresholds.lower_bound(0)
            )));
        }
        if self.t_r < 1.0 {
            return Err(GraphError::Config("t_r must be at least 1".into()));
        }
        if !(0.0 <= self.delta_l && self.delta_l < self.delta_h && self.delta_h <= 1.0) {
            return Err(GraphError::Config(format!(
                "need 0 <= delta_l < delta_h <= 1, got {} and {}",
                self.delta_l, self.delta_h
            )));
        }
        if self.work_dims.width == 0 || self.work_dims.height == 0 {
            return Err(GraphError::Config("work_dims must be positive".into()));
        }
        Ok(())
    }

    /// Level index for a rect under this configuration. Sizes at or above
    /// the top threshold are capped to the top level; sizes below the
    /// ladder (impossible after preprocessing) report `None`.
    pub fn node_level(&self, rect: &Rect) -> Option<usize> {
        match self.thresholds.level_of(rect.size()) {
            Level::BelowRange => None,
            Level::At(i) => Some(i),
            Level::AboveRange => Some(self.thresholds.num_levels() - 1),
        }
    }
}

/// Whether a node came from the input segmentation or was synthesized
/// during graph completion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeOrigin {
    Segmentation,
    Completion,
}

/// One area node. `id` is the index into the graph's node list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AreaNode {
    pub id: usize,
    pub rect: Rect,
    pub level: usize,
    pub origin: NodeOrigin,
}

/// Area graph over one image. Inclusion edges are stored as
/// `(parent, child)`, adjacency edges with the smaller id first.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AreaGraph {
    pub nodes: Vec<AreaNode>,
    pub inclusion_edges: Vec<(usize, usize)>,
    pub adjacency_edges: Vec<(usize, usize)>,
}

impl AreaGraph {
    pub fn parents_of(&self, id: usize) -> impl Iterator<Item = usize> + '_ {
        self.inclusion_edges.iter().filter(move |&&(_, c)| c == id).map(|&(p, _)| p)
    }

    pub fn children_of(&self, id: usize) -> impl Iterator<Item = usize> + '_ {
        self.inclusion_edges.iter().filter(move |&&(p, _)| p == id).map(|&(_, c)| c)
    }

    pub fn neighbours_of(&self, id: usize) -> impl Iterator<Item = usize> + '_ {
        self.adjacency_edges
            .iter()
            .filter_map(move |&(a, b)| if a == id { Some(b) } else if b == id { Some(a) } else { None })
    }

    /// Node ids at the given level, ascending.
    pub fn nodes_at_level(&self, level: usize) -> Vec<usize> {
        self.nodes.iter().filter(|n| n.level == level).map(|n| n.id).collect()
    }

    /// Node counts per level (index = level).
    pub fn level_histogram(&self, num_levels: usize) -> Vec<usize> {
        let mut h = vec![0usize; num_levels];
        for n in &self.nodes {
            if n.level < num_levels {
                h[n.level] += 1;
            }
        }
        h
    }
}

/// Serialized form of a graph together with the configuration that built
/// it, so invariants can be re-checked without extra context.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GraphDump {
    pub config: GraphConfig,
    #[serde(flatten)]
    pub graph: AreaGraph,
}

/// Edge classification for a node pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeKind {
    /// `parent` contains (most of) `child`.
    Inclusion { parent: usize, child: usize },
    Adjacency,
}

/// Classifies the pair by overlap score: inclusion at or above `delta_h`
/// (the larger area is the parent; equal sizes make the smaller id the
/// child), adjacency strictly between the two thresholds, nothing at or
/// below `delta_l`.
pub fn predict_edge(a: &AreaNode, b: &AreaNode, cfg: &GraphConfig) -> Option<EdgeKind> {
    let delta = a.rect.link_score(&b.rect);
    if delta >= cfg.delta_h {
        let a_is_parent = match a.rect.size().partial_cmp(&b.rect.size()).unwrap() {
            std::cmp::Ordering::Greater => true,
            std::cmp::Ordering::Less => false,
            std::cmp::Ordering::Equal => a.id > b.id,
        };
        let (parent, child) = if a_is_parent { (a.id, b.id) } else { (b.id, a.id) };
        Some(EdgeKind::Inclusion { parent, child })
    } else if delta > cfg.delta_l {
        Some(EdgeKind::Adjacency)
    } else {
        None
    }
}

fn center_dist2(a: &Rect, b: &Rect) -> f64 {
    let (ax, ay) = a.center();
    let (bx, by) = b.center();
    (ax - bx) * (ax - bx) + (ay - by) * (ay - by)
}

/// Filters out areas below the size floor or above the aspect cap, fusing
/// each filtered area into the nearest surviving candidate (by center
/// distance against the pass's starting state), and repeats until stable.
/// A pass with no survivors drops everything.
pub fn preprocess(rects: Vec<Rect>, cfg: &GraphConfig) -> Vec<AreaNode> {
    let mut rects = rects;
    loop {
        let ok: Vec<bool> = rects
            .iter()
            .map(|r| r.size() >= cfg.t_s && r.aspect_ratio() <= cfg.t_r)
            .collect();
        if ok.iter().all(|&b| b) {
            break;
        }
        if !ok.iter().any(|&b| b) {
            return Vec::new();
        }
        let snapshot = rects.clone();
        let survivors: Vec<usize> = (0..rects.len()).filter(|&i| ok[i]).collect();
        for i in (0..snapshot.len()).filter(|&i| !ok[i]) {
            let mut nearest = survivors[0];
            let mut best = center_dist2(&snapshot[i], &snapshot[nearest]);
            for &s in &survivors[1..] {
                let d = center_dist2(&snapshot[i], &snapshot[s]);
                if d < best {
                    best = d;
                    nearest = s;
                }
            }
            rects[nearest] = rects[nearest].fuse(&snapshot[i]);
        }
        rects = survivors.into_iter().map(|s| rects[s]).collect();
    }
    rects
        .into_iter()
        .enumerate()
        .map(|(id, rect)| {
            let level = cfg
                .node_level(&rect)
                .expect("preprocess keeps only areas at or above the lowest threshold");
            AreaNode { id, rect, level, origin: NodeOrigin::Segmentation }
        })
        .collect()
}

/// Classifies all node pairs into the two edge lists.
pub fn build_initial_graph(nodes: Vec<AreaNode>, cfg: &GraphConfig) -> AreaGraph {
    let mut g = AreaGraph { nodes, ..Default::default() };
    for i in 0..g.nodes.len() {
        for j in (i + 1)..g.nodes.len() {
            match predict_edge(&g.nodes[i], &g.nodes[j], cfg) {
                Some(EdgeKind::Inclusion { parent, child }) => {
                    g.inclusion_edges.push((parent, child));
                }
                Some(EdgeKind::Adjacency) => g.adjacency_edges.push((i, j)),
                None => {}
            }
        }
    }
    g
}

/// Appends a synthesized node and classifies it against every existing
/// node. Returns the new node's id.
fn add_completion_node(g: &mut AreaGraph, rect: Rect, cfg: &GraphConfig) -> usize {
    let id = g.nodes.len();
    let level = cfg.node_level(&rect).expect("completion rects sit above the lowest threshold");
    let node = AreaNode { id, rect, level, origin: NodeOrigin::Completion };
    for other in 0..id {
        match predict_edge(&node, &g.nodes[other], cfg) {
            Some(EdgeKind::Inclusion { parent, child }) => g.inclusion_edges.push((parent, child)),
            Some(EdgeKind::Adjacency) => {
                g.adjacency_edges.push((other.min(id), other.max(id)));
            }
            None => {}
        }
    }
    g.nodes.push(node);
    id
}

/// Synthesizes parent areas until no node below the top level is
/// parentless. Levels are swept bottom-up; at each level the parentless
/// nodes are clustered by center position. A cluster of one expands into
/// a next-level parent centered on it; larger clusters fuse each
/// not-yet-covered member with its nearest cluster mate into a bounding
/// parent (grown to the next level's size floor when the fusion alone is
/// too small). New nodes are classified against all existing ones, and
/// new parents above the current level are themselves swept later.
/// Idempotent: a complete graph passes through unchanged.
///
/// The top level is exempt: with the default ladder the top threshold
/// exceeds the working image area, so a top-level parent cannot exist.
pub fn complete_graph(mut g: AreaGraph, cfg: &GraphConfig) -> Result<AreaGraph, GraphError> {
    let levels = cfg.thresholds.num_levels();
    for l in 0..levels.saturating_sub(1) {
        let orphans: Vec<usize> = g
            .nodes
            .iter()
            .filter(|n| n.level == l && g.parents_of(n.id).next().is_none())
            .map(|n| n.id)
            .collect();
        if orphans.is_empty() {
            continue;
        }
        let centers: Vec<[f64; 2]> = orphans
            .iter()
            .map(|&i| {
                let (x, y) = g.nodes[i].rect.center();
                [x, y]
            })
            .collect();
        let next_floor = cfg.thresholds.lower_bound(l + 1);
        for group in label_groups(&cluster_points(&centers)) {
            let members: Vec<usize> = group.iter().map(|&gi| orphans[gi]).collect();
            if members.len() == 1 {
                let rect = expand_to_level(&g.nodes[members[0]].rect, next_floor, cfg.work_dims)?;
                add_completion_node(&mut g, rect, cfg);
                continue;
            }
            let mut covered = vec![false; members.len()];
            for mi in 0..members.len() {
                if covered[mi] {
                    continue;
                }
                let mut mate = usize::MAX;
                let mut best = f64::INFINITY;
                for (mj, &u) in members.iter().enumerate() {
                    if mj == mi {
                        continue;
                    }
                    let d = center_dist2(&g.nodes[members[mi]].rect, &g.nodes[u].rect);
                    if d < best {
                        best = d;
                        mate = mj;
                    }
                }
                let mut rect = g.nodes[members[mi]].rect.fuse(&g.nodes[members[mate]].rect);
                if rect.size() < next_floor {
                    rect = expand_to_level(&rect, next_floor, cfg.work_dims)?;
                }
                covered[mi] = true;
                covered[mate] = true;
                add_completion_node(&mut g, rect, cfg);
            }
        }
    }
    Ok(g)
}

/// Full construction from already-rescaled, deduplicated work-plane rects.
pub fn build_graph_from_rects(rects: Vec<Rect>, cfg: &GraphConfig) -> Result<AreaGraph, GraphError> {
    cfg.validate()?;
    let nodes = preprocess(rects, cfg);
    complete_graph(build_initial_graph(nodes, cfg), cfg)
}

/// Checks every structural invariant, returning one message per
/// violation. Empty means the graph is well-formed.
pub fn check_graph(g: &AreaGraph, cfg: &GraphConfig) -> Vec<String> {
    let mut bad = Vec::new();
    let n = g.nodes.len();
    let top = cfg.thresholds.num_levels() - 1;

    for (i, node) in g.nodes.iter().enumerate() {
        if node.id != i {
            bad.push(format!("node {i} carries id {}", node.id));
        }
        if !node.rect.inside(cfg.work_dims) {
            bad.push(format!("node {i} rect {:?} leaves the work image", node.rect));
        }
        if cfg.node_level(&node.rect) != Some(node.level) {
            bad.push(format!(
                "node {i} level {} disagrees with its size {}",
                node.level,
                node.rect.size()
            ));
        }
        if node.rect.size() < cfg.t_s {
            bad.push(format!("node {i} is smaller than the size floor"));
        }
    }

    let mut seen = std::collections::BTreeSet::new();
    for &(p, c) in &g.inclusion_edges {
        if p >= n || c >= n {
            bad.push(format!("inclusion edge ({p}, {c}) out of range"));
            continue;
        }
        if p == c {
            bad.push(format!("self inclusion on node {p}"));
        }
        if !seen.insert((p.min(c), p.max(c))) {
            bad.push(format!("duplicate edge between {p} and {c}"));
        }
        if g.nodes[p].rect.link_score(&g.nodes[c].rect) < cfg.delta_h {
            bad.push(format!("inclusion edge ({p}, {c}) below the inclusion threshold"));
        }
    }
    for &(a, b) in &g.adjacency_edges {
        if a >= n || b >= n {
            bad.push(format!("adjacency edge ({a}, {b}) out of range"));
            continue;
        }
        if a == b {
            bad.push(format!("self adjacency on node {a}"));
        }
        if !seen.insert((a.min(b), a.max(b))) {
            bad.push(format!("duplicate edge between {a} and {b}"));
        }
    }

    // Pairwise trichotomy: the stored relation must match what the
    // thresholds predict for every node pair.
    for i in 0..n {
        for j in (i + 1)..n {
            let expected = predict_edge(&g.nodes[i], &g.nodes[j], cfg);
            let inc = g
                .inclusion_edges
                .iter()
                .find(|&&(p, c)| (p == i && c == j) || (p == j && c == i))
                .copied();
            let adj = g.adjacency_edges.iter().any(|&(a, b)| (a, b) == (i, j));
            match expected {
                Some(EdgeKind::Inclusion { parent, child }) => {
                    if inc != Some((parent, child)) {
                        bad.push(format!("pair ({i}, {j}) should be inclusion ({parent}, {child})"));
                    }
                }
                Some(EdgeKind::Adjacency) => {
                    if !adj || inc.is_some() {
                        bad.push(format!("pair ({i}, {j}) should be adjacency"));
                    }
                }
                None => {
                    if adj || inc.is_some() {
                        bad.push(format!("pair ({i}, {j}) should have no edge"));
                    }
                }
            }
        }
    }

    // Acyclicity via Kahn's algorithm over inclusion edges.
    let mut indeg = vec![0usize; n];
    for &(_, c) in &g.inclusion_edges {
        if c < n {
            indeg[c] += 1;
        }
    }
    let mut queue: Vec<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
    let mut visited = 0;
    while let Some(v) = queue.pop() {
        visited += 1;
        for &(p, c) in &g.inclusion_edges {
            if p == v {
                indeg[c] -= 1;
                if indeg[c] == 0 {
                    queue.push(c);
                }
            }
        }
    }
    if visited != n {
        bad.push("inclusion edges contain a cycle".into());
    }

    for node in &g.nodes {
        if node.level < top && g.parents_of(node.id).next().is_none() {
            bad.push(format!("node {} at level {} has no parent", node.id, node.level));
        }
    }

    bad
}
