//! Context-aware candidate refinement.
//!
//! Exact minimization proposes a set of candidate target areas per source
//! area. Each candidate is re-scored with a global energy: a weighted
//! mean of its own dissimilarity and the best dissimilarity among its
//! parent, child, and neighbour pairs, normalized over the terms that
//! exist. The lowest-energy candidate wins unless it exceeds the
//! rejection ceiling, and all candidates within a band of the winner are
//! fused into one output rect by softmin weighting.

use serde::{Deserialize, Serialize};

use crate::geometry::Rect;
use crate::graph::AreaGraph;
use crate::similarity::{ImageSide, ProviderError, SimilarityMatrix};

/// Weights and thresholds of the global energy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyParams {
    /// Weight of the candidate's own dissimilarity.
    pub mu: f64,
    /// Weight of the parent-context term.
    pub alpha: f64,
    /// Weight of the children-context term.
    pub beta: f64,
    /// Weight of the neighbour-context term.
    pub gamma: f64,
    /// Candidates with energy above this have no match.
    pub t_e_max: f64,
    /// Candidates within this band above the winner join the fusion.
    pub t_er: f64,
}

impl Default for EnergyParams {
    fn default() -> Self {
        EnergyParams { mu: 4.0, alpha: 2.0, beta: 2.0, gamma: 2.0, t_e_max: 0.35, t_er: 0.1 }
    }
}

impl EnergyParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.mu > 0.0) {
            return Err(format!("mu must be positive, got {}", self.mu));
        }
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta), ("gamma", self.gamma)] {
            if !(v >= 0.0) {
                return Err(format!("{name} must be non-negative, got {v}"));
            }
        }
        if !(self.t_e_max > 0.0) || !(self.t_er >= 0.0) {
            return Err("t_e_max must be positive and t_er non-negative".into());
        }
        Ok(())
    }
}

/// Dissimilarity of one scored pair.
pub fn e_self(sim: f64) -> f64 {
    (1.0 - sim).abs()
}

/// Weighted mean of the present terms. Absent context terms drop out of
/// both the numerator and the normalizer, so a candidate with no
/// relations at all is judged on its own dissimilarity alone.
pub fn e_global(
    e_s: f64,
    e_parent: Option<f64>,
    e_children: Option<f64>,
    e_neighbour: Option<f64>,
    params: &EnergyParams,
) -> f64 {
    let mut num = params.mu * e_s;
    let mut z = params.mu;
    for (w, term) in [
        (params.alpha, e_parent),
        (params.beta, e_children),
        (params.gamma, e_neighbour),
    ] {
        if let Some(e) = term {
            num += w * e;
            z += w;
        }
    }
    num / z
}

/// Best (lowest) pair dissimilarity over the cross product of two
/// relation sets, or `None` when either set is empty.
fn relation_energy(
    src_side: ImageSide,
    src_rel: &[usize],
    tgt_rel: &[usize],
    matrix: &SimilarityMatrix,
) -> Result<Option<f64>, ProviderError> {
    let mut best: Option<f64> = None;
    for &a in src_rel {
        for &b in tgt_rel {
            let e = e_self(matrix.get_pair(src_side, a, b)?);
            best = Some(best.map_or(e, |cur: f64| cur.min(e)));
        }
    }
    Ok(best)
}

/// One candidate with its global energy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredCandidate {
    pub node: usize,
    pub e_g: f64,
}

/// Scores every candidate target node for one source node.
pub fn score_candidates(
    src_side: ImageSide,
    src: usize,
    candidates: &[usize],
    g_src: &AreaGraph,
    g_tgt: &AreaGraph,
    matrix: &SimilarityMatrix,
    params: &EnergyParams,
) -> Result<Vec<ScoredCandidate>, ProviderError> {
    let src_parents: Vec<usize> = g_src.parents_of(src).collect();
    let src_children: Vec<usize> = g_src.children_of(src).collect();
    let src_neighbours: Vec<usize> = g_src.neighbours_of(src).collect();
    let mut out = Vec::with_capacity(candidates.len());
    for &h in candidates {
        let e_s = e_self(matrix.get_pair(src_side, src, h)?);
        let tgt_parents: Vec<usize> = g_tgt.parents_of(h).collect();
        let tgt_children: Vec<usize> = g_tgt.children_of(h).collect();
        let tgt_neighbours: Vec<usize> = g_tgt.neighbours_of(h).collect();
        let e_p = relation_energy(src_side, &src_parents, &tgt_parents, matrix)?;
        let e_c = relation_energy(src_side, &src_children, &tgt_children, matrix)?;
        let e_n = relation_energy(src_side, &src_neighbours, &tgt_neighbours, matrix)?;
        out.push(ScoredCandidate { node: h, e_g: e_global(e_s, e_p, e_c, e_n, params) });
    }
    Ok(out)
}

/// Lowest-energy candidate, ties to the smallest node id; `None` when
/// there are no candidates or the best exceeds the rejection ceiling.
pub fn select_best(scored: &[ScoredCandidate], params: &EnergyParams) -> Option<ScoredCandidate> {
    let mut best: Option<ScoredCandidate> = None;
    for &c in scored {
        best = Some(match best {
            None => c,
            Some(b) if c.e_g < b.e_g || (c.e_g == b.e_g && c.node < b.node) => c,
            Some(b) => b,
        });
    }
    best.filter(|b| b.e_g <= params.t_e_max)
}

/// Candidates whose energy is within `t_er` of the winner's, always
/// including the winner itself.
pub fn collect_band(scored: &[ScoredCandidate], best: ScoredCandidate, params: &EnergyParams) -> Vec<ScoredCandidate> {
    scored.iter().copied().filter(|c| c.e_g <= best.e_g + params.t_er).collect()
}

/// Fuses rects by softmin weighting: `w_i` proportional to `exp(-e_i)`,
/// corners averaged per coordinate.
pub fn fuse_weighted(rects: &[(Rect, f64)]) -> Rect {
    assert!(!rects.is_empty(), "nothing to fuse");
    let total: f64 = rects.iter().map(|&(_, e)| (-e).exp()).sum();
    let mut corners = [0.0f64; 4];
    for &(r, e) in rects {
        let w = (-e).exp() / total;
        corners[0] += w * r.x0;
        corners[1] += w * r.y0;
        corners[2] += w * r.x1;
        corners[3] += w * r.y1;
    }
    Rect::new(corners[0], corners[1], corners[2], corners[3])
}

/// Outcome of refining one source node's candidate set.
#[derive(Debug, Clone)]
pub struct Refined {
    pub best: usize,
    pub e_g: f64,
    pub fused: Rect,
    pub band: Vec<ScoredCandidate>,
}

/// Scores, selects, and fuses in one step. `None` means no acceptable
/// candidate.
pub fn refine_candidates(
    src_side: ImageSide,
    src: usize,
    candidates: &[usize],
    g_src: &AreaGraph,
    g_tgt: &AreaGraph,
    matrix: &SimilarityMatrix,
    params: &EnergyParams,
) -> Result<Option<Refined>, ProviderError> {
    let scored = score_candidates(src_side, src, candidates, g_src, g_tgt, matrix, params)?;
    let Some(best) = select_best(&scored, params) else {
        return Ok(None);
    };
    let band = collect_band(&scored, best, params);
    let with_rects: Vec<(Rect, f64)> =
        band.iter().map(|c| (g_tgt.nodes[c.node].rect, c.e_g)).collect();
    Ok(Some(Refined { best: best.node, e_g: best.e_g, fused: fuse_weighted(&with_rects), band }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_graph_from_rects, GraphConfig};
    use crate::similarity::ConstantProvider;

    const TOL: f64 = 1e-9;

    #[test]
    fn global_energy_weights_all_terms() {
        let p = EnergyParams::default();
        let e = e_global(0.1, Some(0.2), Some(0.3), Some(0.4), &p);
        assert!((e - 0.22).abs() < TOL, "e {e}");
    }

    #[test]
    fn global_energy_with_self_only() {
        let p = EnergyParams::default();
        assert!((e_global(0.1, None, None, None, &p) - 0.1).abs() < TOL);
    }

    #[test]
    fn global_energy_renormalizes_over_present_terms() {
        let p = EnergyParams::default();
        let e = e_global(0.1, Some(0.2), None, None, &p);
        assert!((e - 0.8 / 6.0).abs() < TOL);
    }

    #[test]
    fn select_best_breaks_ties_by_node_id() {
        let p = EnergyParams::default();
        let scored = vec![
            ScoredCandidate { node: 5, e_g: 0.2 },
            ScoredCandidate { node: 2, e_g: 0.2 },
            ScoredCandidate { node: 1, e_g: 0.3 },
        ];
        assert_eq!(select_best(&scored, &p).unwrap().node, 2);
    }

    #[test]
    fn select_best_rejects_above_ceiling() {
        let p = EnergyParams::default();
        let high = vec![ScoredCandidate { node: 0, e_g: 0.36 }];
        assert!(select_best(&high, &p).is_none());
        let at = vec![ScoredCandidate { node: 0, e_g: 0.35 }];
        assert_eq!(select_best(&at, &p).unwrap().node, 0);
        assert!(select_best(&[], &p).is_none());
    }

    #[test]
    fn band_keeps_near_winners() {
        let p = EnergyParams::default();
        let scored = vec![
            ScoredCandidate { node: 0, e_g: 0.10 },
            ScoredCandidate { node: 1, e_g: 0.19 },
            ScoredCandidate { node: 2, e_g: 0.21 },
        ];
        let band = collect_band(&scored, scored[0], &p);
        let ids: Vec<usize> = band.iter().map(|c| c.node).collect();
        assert_eq!(ids, vec![0, 1]);
    }

    #[test]
    fn fusion_weights_follow_softmin() {
        let a = Rect::new(0.0, 0.0, 10.0, 10.0);
        let b = Rect::new(10.0, 0.0, 20.0, 10.0);
        let fused = fuse_weighted(&[(a, 0.2), (b, 0.3)]);
        // Weights 0.52498 / 0.47502, so x0 = 10 / (1 + e^0.1).
        assert!((fused.x0 - 4.7502081252).abs() < 1e-9, "x0 {}", fused.x0);
        assert!((fused.x1 - 14.7502081252).abs() < 1e-9);
        assert_eq!(fused.y0, 0.0);
        assert!((fused.y1 - 10.0).abs() < TOL);
    }

    #[test]
    fn fusing_a_single_rect_is_identity() {
        let a = Rect::new(3.0, 4.0, 33.0, 44.0);
        assert_eq!(fuse_weighted(&[(a, 0.25)]), a);
    }

    fn nested_graph() -> crate::graph::AreaGraph {
        build_graph_from_rects(
            vec![
                Rect::new(100.0, 100.0, 300.0, 300.0),
                Rect::new(120.0, 120.0, 220.0, 220.0),
            ],
            &GraphConfig::default(),
        )
        .unwrap()
    }

    #[test]
    fn scoring_uses_parent_context() {
        let g0 = nested_graph();
        let g1 = nested_graph();
        // Node 0 is the big area, node 1 the small one, node 2 its
        // synthesized level-2 ancestor.
        let provider = ConstantProvider::from_json(
            r#"{"default": 0.0, "pairs": [[1, 1, 0.9], [0, 0, 0.8], [1, 0, 0.3], [0, 2, 0.1]]}"#,
        )
        .unwrap();
        let params = EnergyParams::default();
        let matrix = SimilarityMatrix::new(&g0, &g1, &provider, 0.05, false);
        let scored =
            score_candidates(ImageSide::First, 1, &[0, 1], &g0, &g1, &matrix, &params).unwrap();
        let by_node = |n: usize| scored.iter().find(|c| c.node == n).unwrap().e_g;
        // Candidate 1: self 0.1, parent pair (0, 0) gives 0.2.
        assert!((by_node(1) - 0.8 / 6.0).abs() < TOL);
        // Candidate 0: self 0.7, parent pair (0, 2) gives 0.9.
        assert!((by_node(0) - 4.6 / 6.0).abs() < TOL);
        let refined = refine_candidates(
            ImageSide::First,
            1,
            &[0, 1],
            &g0,
            &g1,
            &matrix,
            &params,
        )
        .unwrap()
        .unwrap();
        assert_eq!(refined.best, 1);
        assert_eq!(refined.band.len(), 1);
        assert_eq!(refined.fused, g1.nodes[1].rect);
    }

    #[test]
    fn refine_returns_none_when_everything_is_costly() {
        let g0 = nested_graph();
        let g1 = nested_graph();
        let provider = ConstantProvider::from_json(r#"{"default": 0.1, "pairs": []}"#).unwrap();
        let params = EnergyParams::default();
        let matrix = SimilarityMatrix::new(&g0, &g1, &provider, 0.05, false);
        let refined =
            refine_candidates(ImageSide::First, 1, &[0, 1], &g0, &g1, &matrix, &params).unwrap();
        assert!(refined.is_none());
    }

    #[test]
    fn params_validate_rejects_bad_weights() {
        let mut p = EnergyParams::default();
        p.mu = 0.0;
        assert!(p.validate().is_err());
        let mut q = EnergyParams::default();
        q.alpha = -1.0;
        assert!(q.validate().is_err());
        assert!(EnergyParams::default().validate().is_ok());
    }
}
