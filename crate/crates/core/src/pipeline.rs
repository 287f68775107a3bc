//! End-to-end matching of two area graphs.
//!
//! For every source-level node of each image, an exact minimization over
//! the other image's whole graph proposes candidates, refinement picks
//! and fuses the best ones, winners are projected to the source level,
//! and the two directions are reconciled: a pair survives only when the
//! reverse direction points back at the same node or one overlapping it.
//! Both directions share one similarity matrix, so no pair is ever
//! scored twice.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{crop_with_aspect, AffineMap, ImageDims, Rect};
use crate::graph::{build_graph_from_rects, AreaGraph, GraphConfig, GraphError};
use crate::ingest::{IngestError, SegmentationInput};
use crate::mrf::{build_instance, graph_cut};
use crate::refine::{refine_candidates, EnergyParams};
use crate::similarity::{ImageSide, ProviderError, SimilarityMatrix, SimilarityProvider};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error("invalid pipeline configuration: {0}")]
    Config(String),
}

/// Which similarity provider a run should construct.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProviderName {
    #[serde(rename = "ground-truth")]
    GroundTruth,
    #[serde(rename = "ncc")]
    Ncc,
    #[serde(rename = "constant")]
    Constant,
}

/// Output crop shaping: each matched area is padded to a fixed aspect
/// and spread factor for downstream pixel matching.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CropConfig {
    /// Width over height of emitted crops.
    pub aspect: f64,
    /// Linear padding factor applied after aspect correction.
    pub spread: f64,
}

impl Default for CropConfig {
    fn default() -> Self {
        CropConfig { aspect: 1.0, spread: 1.2 }
    }
}

/// Everything the matcher needs beyond the graphs themselves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub graph: GraphConfig,
    pub energy: EnergyParams,
    /// Pairwise strength of the minimization.
    pub lambda: f64,
    /// Level whose nodes act as match sources.
    pub source_level: usize,
    /// Similarity below which a pair's children are pruned unscored.
    pub t_as: f64,
    /// Whether pruning is enabled at all.
    pub pruning: bool,
    pub crop: CropConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            graph: GraphConfig::default(),
            energy: EnergyParams::default(),
            lambda: 0.1,
            source_level: 1,
            t_as: 0.05,
            pruning: true,
            crop: CropConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        self.graph.validate()?;
        self.energy.validate().map_err(PipelineError::Config)?;
        if !(self.lambda >= 0.0) {
            return Err(PipelineError::Config(format!("lambda must be non-negative, got {}", self.lambda)));
        }
        if self.source_level >= self.graph.thresholds.num_levels() {
            return Err(PipelineError::Config(format!(
                "source_level {} outside the {}-level ladder",
                self.source_level,
                self.graph.thresholds.num_levels()
            )));
        }
        if !(0.0..=1.0).contains(&self.t_as) {
            return Err(PipelineError::Config(format!("t_as must be in [0, 1], got {}", self.t_as)));
        }
        if !(self.crop.spread >= 1.0) || !(self.crop.aspect > 0.0) {
            return Err(PipelineError::Config(
                "crop needs spread >= 1 and positive aspect".into(),
            ));
        }
        Ok(())
    }
}

/// One emitted match. Rects are in each image's native coordinates;
/// crops are integer pixel boxes padded for downstream matching, with a
/// flag when padding had to be clamped against the image border.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchPair {
    pub src_node: usize,
    pub dst_node: usize,
    pub e_g: f64,
    pub rect0: Rect,
    pub rect1: Rect,
    pub crop0: [i64; 4],
    pub crop1: [i64; 4],
    pub clamped0: bool,
    pub clamped1: bool,
}

/// Node and edge counts of one graph, for run diagnostics.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphCounts {
    pub nodes: usize,
    pub inclusion_edges: usize,
    pub adjacency_edges: usize,
    pub level_histogram: Vec<usize>,
}

impl GraphCounts {
    fn of(g: &AreaGraph, cfg: &GraphConfig) -> Self {
        GraphCounts {
            nodes: g.nodes.len(),
            inclusion_edges: g.inclusion_edges.len(),
            adjacency_edges: g.adjacency_edges.len(),
            level_histogram: g.level_histogram(cfg.thresholds.num_levels()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub sources_first: usize,
    pub sources_second: usize,
    pub matched_first: usize,
    pub matched_second: usize,
    pub pairs_merged: usize,
    pub provider_calls: u64,
    pub computed_cells: u64,
    pub pruned_cells: u64,
    /// Node pairs skipped by pruning, sorted, for auditability.
    pub pruned_pairs: Vec<(usize, usize)>,
    pub graph0: GraphCounts,
    pub graph1: GraphCounts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchOutput {
    pub pairs: Vec<MatchPair>,
    pub diagnostics: Diagnostics,
}

/// Graphs plus the native resolutions their inputs came from.
#[derive(Debug, Clone, Copy)]
pub struct MatchInputs<'a> {
    pub g0: &'a AreaGraph,
    pub g1: &'a AreaGraph,
    pub native0: ImageDims,
    pub native1: ImageDims,
}

/// Builds one image's graph from its segmentation.
pub fn graph_from_segmentation(
    seg: &SegmentationInput,
    cfg: &GraphConfig,
) -> Result<AreaGraph, PipelineError> {
    let rects = seg.to_work_rects(cfg.work_dims)?;
    Ok(build_graph_from_rects(rects, cfg)?)
}

/// One direction's accepted match before reconciliation.
#[derive(Debug, Clone)]
struct DirMatch {
    src: usize,
    /// Winning target node projected to the source level.
    dst: usize,
    e_g: f64,
    fused: Rect,
}

/// Projects a node onto the target graph's source level: itself when
/// already there, otherwise the source-level node with the highest
/// overlap score (ties to the smallest id). `None` when the target graph
/// has no source-level node overlapping it.
fn project_to_level(g: &AreaGraph, node: usize, level: usize) -> Option<usize> {
    if g.nodes[node].level == level {
        return Some(node);
    }
    let mut best: Option<(f64, usize)> = None;
    for cand in g.nodes_at_level(level) {
        let score = g.nodes[node].rect.link_score(&g.nodes[cand].rect);
        if score <= 0.0 {
            continue;
        }
        best = Some(match best {
            None => (score, cand),
            Some((bs, _)) if score > bs => (score, cand),
            Some(b) => b,
        });
    }
    best.map(|(_, id)| id)
}

/// Matches every source-level node of `g_src` into `g_tgt`.
fn match_direction(
    side: ImageSide,
    g_src: &AreaGraph,
    g_tgt: &AreaGraph,
    matrix: &SimilarityMatrix,
    cfg: &PipelineConfig,
) -> Result<Vec<DirMatch>, PipelineError> {
    let mut out = Vec::new();
    for u in g_src.nodes_at_level(cfg.source_level) {
        // Score the source against the whole target graph. Similarities
        // are fetched in the instance's own order (parents before
        // children) so pruning can take effect.
        let mut sims = vec![0.0; g_tgt.nodes.len()];
        let target = build_instance(g_tgt, |_| 0.0, cfg.lambda);
        for &id in &target.node_ids {
            sims[id] = matrix.get_pair(side, u, id)?;
        }
        let target = build_instance(g_tgt, |id| sims[id], cfg.lambda);
        let labels = graph_cut(&target.instance);
        let candidates: Vec<usize> = target
            .node_ids
            .iter()
            .zip(&labels)
            .filter_map(|(&id, &on)| on.then_some(id))
            .collect();
        let Some(refined) =
            refine_candidates(side, u, &candidates, g_src, g_tgt, matrix, &cfg.energy)?
        else {
            continue;
        };
        let Some(dst) = project_to_level(g_tgt, refined.best, cfg.source_level) else {
            continue;
        };
        out.push(DirMatch { src: u, dst, e_g: refined.e_g, fused: refined.fused });
    }
    Ok(out)
}

/// Keeps the forward matches whose reverse direction points back at the
/// same source node or one overlapping it by at least `MUTUAL_IOU`.
const MUTUAL_IOU: f64 = 0.6;

fn mutually_consistent(
    fwd: &[DirMatch],
    rev: &[DirMatch],
    g_src: &AreaGraph,
) -> Vec<DirMatch> {
    fwd.iter()
        .filter(|m| {
            rev.iter().any(|r| {
                r.src == m.dst
                    && (r.dst == m.src
                        || g_src.nodes[r.dst].rect.iou(&g_src.nodes[m.src].rect) >= MUTUAL_IOU)
            })
        })
        .cloned()
        .collect()
}

/// Runs both directions over one shared similarity matrix and reconciles
/// them into a single pair list keyed by (image-0 node, image-1 node).
pub fn match_pair(
    inputs: &MatchInputs,
    provider: &dyn SimilarityProvider,
    cfg: &PipelineConfig,
) -> Result<MatchOutput, PipelineError> {
    cfg.validate()?;
    let (g0, g1) = (inputs.g0, inputs.g1);
    let matrix = SimilarityMatrix::new(g0, g1, provider, cfg.t_as, cfg.pruning);

    let fwd = match_direction(ImageSide::First, g0, g1, &matrix, cfg)?;
    let rev = match_direction(ImageSide::Second, g1, g0, &matrix, cfg)?;
    let fwd_kept = mutually_consistent(&fwd, &rev, g0);
    let rev_kept = mutually_consistent(&rev, &fwd, g1);

    // Union of both directions, merged on the unordered pair key.
    let mut merged: std::collections::BTreeMap<(usize, usize), (Option<DirMatch>, Option<DirMatch>)> =
        std::collections::BTreeMap::new();
    for m in fwd_kept {
        let key = (m.src, m.dst);
        merged.entry(key).or_default().0 = Some(m);
    }
    for m in rev_kept {
        let key = (m.dst, m.src);
        merged.entry(key).or_default().1 = Some(m);
    }

    let to_native0 = AffineMap::scale_between(cfg.graph.work_dims, inputs.native0);
    let to_native1 = AffineMap::scale_between(cfg.graph.work_dims, inputs.native1);
    let mut pairs = Vec::with_capacity(merged.len());
    let mut pairs_merged = 0;
    for (&(n0, n1), &(ref f, ref b)) in &merged {
        let (rect0_work, rect1_work, e_g) = match (f, b) {
            (Some(f), Some(b)) => {
                pairs_merged += 1;
                (b.fused, f.fused, f.e_g.min(b.e_g))
            }
            (Some(f), None) => (g0.nodes[n0].rect, f.fused, f.e_g),
            (None, Some(b)) => (b.fused, g1.nodes[n1].rect, b.e_g),
            (None, None) => unreachable!("empty merge entry"),
        };
        let rect0 = to_native0.map_rect(&rect0_work);
        let rect1 = to_native1.map_rect(&rect1_work);
        let crop0 = crop_with_aspect(&rect0, cfg.crop.aspect, cfg.crop.spread, inputs.native0);
        let crop1 = crop_with_aspect(&rect1, cfg.crop.aspect, cfg.crop.spread, inputs.native1);
        pairs.push(MatchPair {
            src_node: n0,
            dst_node: n1,
            e_g,
            rect0,
            rect1,
            crop0: crop0.rect.to_pixel_corners(),
            crop1: crop1.rect.to_pixel_corners(),
            clamped0: crop0.clamped,
            clamped1: crop1.clamped,
        });
    }

    let stats = matrix.stats();
    let mut pruned_pairs = matrix.pruned_pairs();
    pruned_pairs.sort_unstable();
    let diagnostics = Diagnostics {
        sources_first: g0.nodes_at_level(cfg.source_level).len(),
        sources_second: g1.nodes_at_level(cfg.source_level).len(),
        matched_first: fwd.len(),
        matched_second: rev.len(),
        pairs_merged,
        provider_calls: stats.provider_calls,
        computed_cells: stats.computed_cells,
        pruned_cells: stats.pruned_cells,
        pruned_pairs,
        graph0: GraphCounts::of(g0, &cfg.graph),
        graph1: GraphCounts::of(g1, &cfg.graph),
    };
    Ok(MatchOutput { pairs, diagnostics })
}
