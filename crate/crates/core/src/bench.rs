//! Synthetic benchmark scenes and match quality metrics.
//!
//! A scene is a pair of segmentations related by a known uniform scale
//! and translation. Image 0 carries a nested arrangement (a large
//! container holding two smaller areas, plus two free-standing areas);
//! image 1 sees the same content under the transform. Each image also
//! gets its own unmatched distractor areas placed clear of everything
//! else. Matches are scored by mapping the emitted image-0 rect through
//! the true transform and measuring overlap with the emitted image-1
//! rect.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::{AffineMap, ImageDims, Rect};
use crate::graph::AreaGraph;
use crate::ingest::{InputArea, SegmentationInput};
use crate::pipeline::{
    graph_from_segmentation, match_pair, MatchInputs, MatchOutput, PipelineConfig, PipelineError,
};
use crate::similarity::{AreaRef, Grayscale, GroundTruthProvider, ImageSide, SimilarityProvider};

/// Uniform scale plus translation taking image-0 native coordinates to
/// image-1 native coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneTransform {
    pub scale: f64,
    pub tx: f64,
    pub ty: f64,
}

impl SceneTransform {
    pub fn to_affine(&self) -> AffineMap {
        AffineMap::uniform(self.scale, self.tx, self.ty)
    }
}

/// One generated scene. The first `gt_pairs.len()` entries of each area
/// list correspond exactly under the transform; the rest are per-image
/// distractors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticScene {
    pub seed: u64,
    pub dims: ImageDims,
    pub transform: SceneTransform,
    pub areas0: Vec<Rect>,
    pub areas1: Vec<Rect>,
    pub gt_pairs: Vec<(usize, usize)>,
}

impl SyntheticScene {
    pub fn to_segmentation(&self, side: ImageSide) -> SegmentationInput {
        let areas = match side {
            ImageSide::First => &self.areas0,
            ImageSide::Second => &self.areas1,
        };
        SegmentationInput {
            image: self.dims,
            areas: areas
                .iter()
                .enumerate()
                .map(|(i, r)| InputArea {
                    id: format!("area-{i}"),
                    bbox: Some([r.x0, r.y0, r.x1, r.y1]),
                    mask_rle: None,
                })
                .collect(),
        }
    }

    /// The scene transform expressed between the two work planes.
    pub fn work_map(&self, work: ImageDims) -> AffineMap {
        AffineMap::scale_between(work, self.dims)
            .then(&self.transform.to_affine())
            .then(&AffineMap::scale_between(self.dims, work))
    }
}

/// Scene generator controls.
#[derive(Debug, Clone, PartialEq)]
pub struct GenParams {
    pub dims: ImageDims,
    /// Inclusive uniform-scale range.
    pub scale: (f64, f64),
    /// Translation bound as a fraction of each image dimension.
    pub translation_frac: f64,
    /// Inclusive range of distractor areas per image.
    pub distractors: (usize, usize),
    /// Shared distractors appear in both images (mapped through the
    /// transform) and join the ground-truth pairs, so the images carry
    /// exactly the same content. Independent distractors are placed
    /// per image, clear of everything in the other, and stay unmatched.
    pub shared_distractors: bool,
}

impl GenParams {
    /// Identical image pair: unit scale, zero translation, every area
    /// present in both images.
    pub fn identity() -> Self {
        GenParams {
            dims: ImageDims { width: 640, height: 480 },
            scale: (1.0, 1.0),
            translation_frac: 0.0,
            distractors: (2, 4),
            shared_distractors: true,
        }
    }

    /// Scale and translation perturbations, plus unmatched per-image
    /// clutter.
    pub fn perturbed() -> Self {
        GenParams {
            dims: ImageDims { width: 640, height: 480 },
            scale: (0.8, 1.25),
            translation_frac: 0.25,
            distractors: (2, 4),
            shared_distractors: false,
        }
    }
}

// Layout margins, all in pixels of the shared placement region.
const BORDER: f64 = 14.0;
const INNER: f64 = 10.0;
const EXT_GAP: f64 = 24.0;
/// Minimum axis gap separating a distractor from everything it must not
/// relate to, in either image. Large enough that even the synthesized
/// parent of a lone distractor cannot touch foreign areas.
const CLEARANCE: f64 = 90.0;
const DAMP: f64 = 0.72;
const MAX_DAMPS: usize = 64;
const PLACE_TRIES: usize = 80;

fn sample(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    if hi <= lo {
        lo
    } else {
        rng.gen_range(lo..=hi)
    }
}

fn intersect(a: &Rect, b: &Rect) -> Option<Rect> {
    Rect::checked(a.x0.max(b.x0), a.y0.max(b.y0), a.x1.min(b.x1), a.y1.min(b.y1))
}

/// Largest axis gap between two rects; at least one axis must clear the
/// pad for their inflations not to overlap.
fn rect_gap(a: &Rect, b: &Rect) -> f64 {
    let dx = (b.x0 - a.x1).max(a.x0 - b.x1);
    let dy = (b.y0 - a.y1).max(a.y0 - b.y1);
    dx.max(dy)
}

/// The five corresponding areas of a scene, in image-0 coordinates.
struct CoreRects {
    l2: Rect,
    u_in: Rect,
    w: Rect,
    u_a: Rect,
    u_b: Rect,
}

impl CoreRects {
    fn all(&self) -> [Rect; 5] {
        [self.l2, self.u_in, self.w, self.u_a, self.u_b]
    }
}

struct CoreSizes {
    l2: f64,
    u_in: f64,
    w: f64,
    u_a: f64,
    u_b: f64,
}

/// Draws area sizes that keep every core area on its intended level in
/// both images: the container at level 2, the three medium areas at
/// level 1, the small one at level 0, whatever the scene scale.
fn draw_sizes(rng: &mut ChaCha8Rng, s: f64) -> CoreSizes {
    let shrink = (s * s).min(1.0);
    CoreSizes {
        l2: 1.2 * 65536.0 / shrink * sample(rng, 1.0, 1.03),
        u_in: 17200.0 / shrink * sample(rng, 1.0, 1.05),
        w: sample(rng, 10050.0, 10400.0),
        u_a: 17200.0 / shrink * sample(rng, 1.0, 1.05),
        u_b: 17200.0 / shrink * sample(rng, 1.0, 1.05),
    }
}

/// Places the container and its two inner areas, given the container's
/// top-left corner and dimensions. Inner areas sit side by side (or
/// stacked) with margins, never touching each other.
fn place_inner(
    rng: &mut ChaCha8Rng,
    x2: f64,
    y2: f64,
    w2: f64,
    h2: f64,
    sizes: &CoreSizes,
) -> Option<(Rect, Rect, Rect)> {
    let l2 = Rect::new(x2, y2, x2 + w2, y2 + h2);
    let (su, sw) = (sizes.u_in.sqrt(), sizes.w.sqrt());
    if su + sw + 3.0 * INNER <= w2 && su.max(sw) + 2.0 * INNER <= h2 {
        let ux = x2 + INNER;
        let uy = sample(rng, y2 + INNER, y2 + h2 - INNER - su);
        let wx = sample(rng, ux + su + INNER, x2 + w2 - INNER - sw);
        let wy = sample(rng, y2 + INNER, y2 + h2 - INNER - sw);
        return Some((
            l2,
            Rect::new(ux, uy, ux + su, uy + su),
            Rect::new(wx, wy, wx + sw, wy + sw),
        ));
    }
    if su + sw + 3.0 * INNER <= h2 && su.max(sw) + 2.0 * INNER <= w2 {
        let uy = y2 + INNER;
        let ux = sample(rng, x2 + INNER, x2 + w2 - INNER - su);
        let wy = sample(rng, uy + su + INNER, y2 + h2 - INNER - sw);
        let wx = sample(rng, x2 + INNER, x2 + w2 - INNER - sw);
        return Some((
            l2,
            Rect::new(ux, uy, ux + su, uy + su),
            Rect::new(wx, wy, wx + sw, wy + sw),
        ));
    }
    None
}

/// Fits the container dimensions into an available box, preferring a
/// mild landscape shape and refusing extreme aspects.
fn fit_container(size: f64, avail_w: f64, avail_h: f64) -> Option<(f64, f64)> {
    if avail_w <= 0.0 || avail_h <= 0.0 || avail_w * avail_h < size {
        return None;
    }
    let mut w = (size * 1.8).sqrt().min(avail_w);
    let mut h = size / w;
    if h > avail_h {
        h = avail_h;
        w = size / h;
    }
    let aspect = (w / h).max(h / w);
    (w <= avail_w && h <= avail_h && aspect <= 3.9).then_some((w, h))
}

/// Attempts the full core layout inside the region visible in both
/// images: container plus inner areas in one block, the two
/// free-standing areas in a strip along the bottom or the right edge.
fn try_layout(
    rng: &mut ChaCha8Rng,
    region: &Rect,
    sizes: &CoreSizes,
) -> Option<CoreRects> {
    let (sa, sb) = (sizes.u_a.sqrt(), sizes.u_b.sqrt());
    let ext = sa.max(sb);

    // Bottom strip: externals side by side under the container block.
    let avail_w = region.width() - 2.0 * BORDER;
    let avail_h = region.height() - 2.0 * BORDER - ext - BORDER;
    if avail_w >= sa + sb + 3.0 * EXT_GAP {
        if let Some((w2, h2)) = fit_container(sizes.l2, avail_w, avail_h) {
            let x2 = sample(rng, region.x0 + BORDER, region.x0 + BORDER + avail_w - w2);
            let y2 = sample(rng, region.y0 + BORDER, region.y0 + BORDER + avail_h - h2);
            if let Some((l2, u_in, w)) = place_inner(rng, x2, y2, w2, h2, sizes) {
                let ye = region.y1 - BORDER - ext;
                let mid = (region.x0 + region.x1) / 2.0;
                let xa = sample(rng, region.x0 + BORDER, mid - EXT_GAP / 2.0 - sa);
                let xb = sample(rng, mid + EXT_GAP / 2.0, region.x1 - BORDER - sb);
                return Some(CoreRects {
                    l2,
                    u_in,
                    w,
                    u_a: Rect::new(xa, ye, xa + sa, ye + sa),
                    u_b: Rect::new(xb, ye, xb + sb, ye + sb),
                });
            }
        }
    }

    // Right strip: externals stacked beside the container block.
    let avail_w = region.width() - 2.0 * BORDER - ext - BORDER;
    let avail_h = region.height() - 2.0 * BORDER;
    if avail_h >= sa + sb + 3.0 * EXT_GAP {
        if let Some((w2, h2)) = fit_container(sizes.l2, avail_w, avail_h) {
            let x2 = sample(rng, region.x0 + BORDER, region.x0 + BORDER + avail_w - w2);
            let y2 = sample(rng, region.y0 + BORDER, region.y0 + BORDER + avail_h - h2);
            if let Some((l2, u_in, w)) = place_inner(rng, x2, y2, w2, h2, sizes) {
                let xe = region.x1 - BORDER - ext;
                let mid = (region.y0 + region.y1) / 2.0;
                let ya = sample(rng, region.y0 + BORDER, mid - EXT_GAP / 2.0 - sa);
                let yb = sample(rng, mid + EXT_GAP / 2.0, region.y1 - BORDER - sb);
                return Some(CoreRects {
                    l2,
                    u_in,
                    w,
                    u_a: Rect::new(xe, ya, xe + sa, ya + sa),
                    u_b: Rect::new(xe, yb, xe + sb, yb + sb),
                });
            }
        }
    }
    None
}

/// Places distractors inside `window`: level-1 squares at least
/// `clearance` away from every listed rect in their own image and,
/// through `map`, from every rect in the other image. Gives up quietly
/// on crowded scenes.
fn place_distractors(
    rng: &mut ChaCha8Rng,
    count: usize,
    window: &Rect,
    clearance: f64,
    own_keepout: &mut Vec<Rect>,
    map_to_other: &AffineMap,
    other_keepout: &[Rect],
) -> Vec<Rect> {
    let mut placed = Vec::new();
    for _ in 0..count {
        'tries: for _ in 0..PLACE_TRIES {
            let side = sample(rng, 17500.0, 26000.0).sqrt();
            if side > window.width() || side > window.height() {
                continue;
            }
            let x = sample(rng, window.x0, window.x1 - side);
            let y = sample(rng, window.y0, window.y1 - side);
            let d = Rect::new(x, y, x + side, y + side);
            for k in own_keepout.iter() {
                if rect_gap(&d, k) < clearance {
                    continue 'tries;
                }
            }
            let mapped = map_to_other.map_rect(&d);
            for k in other_keepout {
                if rect_gap(&mapped, k) < clearance {
                    continue 'tries;
                }
            }
            own_keepout.push(d);
            placed.push(d);
            break;
        }
    }
    placed
}

/// Generates one scene deterministically from its seed.
pub fn gen_scene(seed: u64, params: &GenParams) -> SyntheticScene {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dims = params.dims;
    let (wf, hf) = (dims.w(), dims.h());
    let s = sample(&mut rng, params.scale.0, params.scale.1);
    let mut tx = sample(
        &mut rng,
        -params.translation_frac * wf,
        params.translation_frac * wf,
    );
    let mut ty = sample(
        &mut rng,
        -params.translation_frac * hf,
        params.translation_frac * hf,
    );
    let sizes = draw_sizes(&mut rng, s);

    // The cores must be visible in both images. When an extreme
    // transform leaves too little shared area, the translation is damped
    // toward zero (zero translation always fits).
    let viewport = dims.rect();
    let mut cores = None;
    let mut layout_region = viewport;
    let mut transform = SceneTransform { scale: s, tx, ty };
    for _ in 0..MAX_DAMPS {
        transform = SceneTransform { scale: s, tx, ty };
        let visible = transform.to_affine().inverse().map_rect(&viewport);
        if let Some(region) = intersect(&viewport, &visible) {
            if let Some(c) = try_layout(&mut rng, &region, &sizes) {
                cores = Some(c);
                layout_region = region;
                break;
            }
        }
        tx *= DAMP;
        ty *= DAMP;
    }
    let cores = cores.expect("layout must fit at zero translation");

    let map = transform.to_affine();
    let core0 = cores.all().to_vec();
    let core1: Vec<Rect> = core0.iter().map(|r| map.map_rect(r)).collect();
    let mut areas0 = core0.clone();
    let mut areas1 = core1.clone();

    if params.shared_distractors {
        // One set of distractors, visible in both images; they extend the
        // ground truth. They may sit close to the cores: both graphs see
        // the same arrangement, so matching stays exact regardless.
        let n = rng.gen_range(params.distractors.0..=params.distractors.1);
        let window = Rect::new(
            layout_region.x0 + 6.0,
            layout_region.y0 + 6.0,
            layout_region.x1 - 6.0,
            layout_region.y1 - 6.0,
        );
        let mut keepout0 = core0;
        let d = place_distractors(&mut rng, n, &window, 12.0, &mut keepout0, &map, &[]);
        areas0.extend(d.iter().copied());
        areas1.extend(d.iter().map(|r| map.map_rect(r)));
        let gt_pairs = (0..areas0.len()).map(|i| (i, i)).collect();
        return SyntheticScene { seed, dims, transform, areas0, areas1, gt_pairs };
    }

    let window = Rect::new(6.0, 6.0, wf - 6.0, hf - 6.0);
    let n_d0 = rng.gen_range(params.distractors.0..=params.distractors.1);
    let n_d1 = rng.gen_range(params.distractors.0..=params.distractors.1);
    let mut keepout0 = core0;
    let d0 = place_distractors(&mut rng, n_d0, &window, CLEARANCE, &mut keepout0, &map, &core1);
    // Image-1 distractors must clear the image-1 cores, the mapped
    // image-0 distractors, and (through the inverse) everything placed
    // in image 0.
    let mut keepout1 = core1;
    keepout1.extend(d0.iter().map(|r| map.map_rect(r)));
    let inv = map.inverse();
    let d1 =
        place_distractors(&mut rng, n_d1, &window, CLEARANCE, &mut keepout1, &inv, &keepout0);

    areas0.extend(d0);
    areas1.extend(d1);
    let gt_pairs = (0..5).map(|i| (i, i)).collect();
    SyntheticScene { seed, dims, transform, areas0, areas1, gt_pairs }
}

/// Overlap ratio of a matched rect pair under the true transform:
/// intersection over union of the mapped image-0 rect and the image-1
/// rect.
pub fn overlap_ratio(rect0: &Rect, rect1: &Rect, map: &AffineMap) -> f64 {
    map.map_rect(rect0).iou(rect1)
}

/// Quality of one scene's matches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchMetrics {
    /// Mean overlap ratio over emitted matches (0 when there are none).
    pub aor: f64,
    /// Fraction of matches with overlap ratio >= 0.6 / 0.7 / 0.8.
    pub amp_06: f64,
    pub amp_07: f64,
    pub amp_08: f64,
    /// Number of emitted matches.
    pub area_num: usize,
    /// Set when no matches were emitted at all.
    pub empty: bool,
}

/// Scores a match output against the scene's true transform.
pub fn score_matches(scene: &SyntheticScene, out: &MatchOutput) -> MatchMetrics {
    let map = scene.transform.to_affine();
    let ratios: Vec<f64> = out
        .pairs
        .iter()
        .map(|p| overlap_ratio(&p.rect0, &p.rect1, &map))
        .collect();
    if ratios.is_empty() {
        return MatchMetrics { aor: 0.0, amp_06: 0.0, amp_07: 0.0, amp_08: 0.0, area_num: 0, empty: true };
    }
    let n = ratios.len() as f64;
    let frac = |t: f64| ratios.iter().filter(|&&r| r >= t).count() as f64 / n;
    MatchMetrics {
        aor: ratios.iter().sum::<f64>() / n,
        amp_06: frac(0.6),
        amp_07: frac(0.7),
        amp_08: frac(0.8),
        area_num: ratios.len(),
        empty: false,
    }
}

/// Everything one benchmark seed yields: metrics from the pruned run,
/// the emitted pair set, and a pruning audit against an identical run
/// with pruning disabled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedOutcome {
    pub seed: u64,
    pub metrics: MatchMetrics,
    pub pairs: Vec<(usize, usize)>,
    pub max_e_g: f64,
    pub provider_calls_pruned: u64,
    pub provider_calls_full: u64,
    /// Whether pruning changed the emitted match set.
    pub match_sets_equal: bool,
    /// Whether every pruned pair's true similarity really falls below
    /// the pruning threshold.
    pub pruning_sound: bool,
}

/// Runs the full matcher over one scene, once with pruning and once
/// without, and scores the pruned run.
pub fn evaluate_scene(scene: &SyntheticScene, cfg: &PipelineConfig) -> Result<SeedOutcome, PipelineError> {
    let seg0 = scene.to_segmentation(ImageSide::First);
    let seg1 = scene.to_segmentation(ImageSide::Second);
    let g0 = graph_from_segmentation(&seg0, &cfg.graph)?;
    let g1 = graph_from_segmentation(&seg1, &cfg.graph)?;
    let provider = GroundTruthProvider::new(scene.work_map(cfg.graph.work_dims));
    let inputs = MatchInputs { g0: &g0, g1: &g1, native0: scene.dims, native1: scene.dims };

    let mut pruned_cfg = cfg.clone();
    pruned_cfg.pruning = true;
    let mut full_cfg = cfg.clone();
    full_cfg.pruning = false;
    let out_pruned = match_pair(&inputs, &provider, &pruned_cfg)?;
    let out_full = match_pair(&inputs, &provider, &full_cfg)?;

    let key = |o: &MatchOutput| -> Vec<(usize, usize)> {
        o.pairs.iter().map(|p| (p.src_node, p.dst_node)).collect()
    };
    let pairs = key(&out_pruned);
    let match_sets_equal = pairs == key(&out_full);

    let mut pruning_sound = true;
    for &(i0, i1) in &out_pruned.diagnostics.pruned_pairs {
        let a = AreaRef { side: ImageSide::First, node_id: i0, rect: g0.nodes[i0].rect };
        let b = AreaRef { side: ImageSide::Second, node_id: i1, rect: g1.nodes[i1].rect };
        if provider.compute(&a, &b)? >= pruned_cfg.t_as {
            pruning_sound = false;
        }
    }

    let max_e_g = out_pruned.pairs.iter().map(|p| p.e_g).fold(0.0, f64::max);
    Ok(SeedOutcome {
        seed: scene.seed,
        metrics: score_matches(scene, &out_pruned),
        pairs,
        max_e_g,
        provider_calls_pruned: out_pruned.diagnostics.provider_calls,
        provider_calls_full: out_full.diagnostics.provider_calls,
        match_sets_equal,
        pruning_sound,
    })
}

/// Checks the structural invariants of both graphs a scene induces.
pub fn scene_graphs(scene: &SyntheticScene, cfg: &PipelineConfig) -> Result<(AreaGraph, AreaGraph), PipelineError> {
    let g0 = graph_from_segmentation(&scene.to_segmentation(ImageSide::First), &cfg.graph)?;
    let g1 = graph_from_segmentation(&scene.to_segmentation(ImageSide::Second), &cfg.graph)?;
    Ok((g0, g1))
}

// ── Scene rendering ──

fn hash_cell(seed: u64, bx: i64, by: i64) -> f64 {
    let mut s = seed
        .wrapping_mul(0x9e3779b97f4a7c15)
        .wrapping_add((bx as u64).wrapping_mul(0xd6e8feb86659fd93))
        .wrapping_add((by as u64).wrapping_mul(0xca01f9dd54c16e65));
    s ^= s >> 33;
    s = s.wrapping_mul(0xff51afd7ed558ccd);
    s ^= s >> 33;
    (s % 1000) as f64 / 999.0
}

/// Renders the scene as a pair of grayscale images sharing one blocky
/// noise texture defined on the image-0 plane, so truly corresponding
/// pixels carry the same values. Useful for exercising the pixel
/// correlation provider on data where matching is actually possible.
pub fn render_scene_images(scene: &SyntheticScene) -> (Grayscale, Grayscale) {
    const BLOCK: f64 = 8.0;
    let tex = |x: f64, y: f64| {
        hash_cell(
            scene.seed,
            (x / BLOCK).floor() as i64,
            (y / BLOCK).floor() as i64,
        )
    };
    let (w, h) = (scene.dims.width, scene.dims.height);
    let inv = scene.transform.to_affine().inverse();
    let mut data0 = Vec::with_capacity((w * h) as usize);
    let mut data1 = Vec::with_capacity((w * h) as usize);
    for py in 0..h {
        for px in 0..w {
            let (x, y) = (px as f64 + 0.5, py as f64 + 0.5);
            data0.push(tex(x, y));
            let (bx, by) = inv.apply(x, y);
            data1.push(tex(bx, by));
        }
    }
    (Grayscale::new(w, h, data0), Grayscale::new(w, h, data1))
}

/// Writes a grayscale raster to disk; the format follows the extension.
pub fn save_gray(path: &std::path::Path, img: &Grayscale) -> Result<(), String> {
    let bytes: Vec<u8> = img
        .pixels()
        .iter()
        .map(|v| (v * 255.0).round().clamp(0.0, 255.0) as u8)
        .collect();
    let buf = image::GrayImage::from_raw(img.width, img.height, bytes)
        .expect("buffer length matches dimensions");
    buf.save(path).map_err(|e| format!("{}: {e}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::LevelThresholds;
    use crate::graph::check_graph;

    #[test]
    fn generation_is_deterministic() {
        let p = GenParams::perturbed();
        assert_eq!(gen_scene(5, &p), gen_scene(5, &p));
        assert!(gen_scene(5, &p) != gen_scene(6, &p));
    }

    #[test]
    fn identity_scenes_duplicate_every_area_exactly() {
        let scene = gen_scene(3, &GenParams::identity());
        assert_eq!(scene.transform, SceneTransform { scale: 1.0, tx: 0.0, ty: 0.0 });
        assert_eq!(scene.areas0, scene.areas1);
        assert_eq!(scene.gt_pairs.len(), scene.areas0.len());
        assert!(scene.areas0.len() > 5, "shared distractors were placed");
    }

    #[test]
    fn pure_translation_offsets_core_areas_exactly() {
        let mut p = GenParams::identity();
        p.translation_frac = 0.1;
        let scene = gen_scene(11, &p);
        assert_eq!(scene.transform.scale, 1.0);
        let (tx, ty) = (scene.transform.tx, scene.transform.ty);
        for &(i, j) in &scene.gt_pairs {
            let (a, b) = (scene.areas0[i], scene.areas1[j]);
            assert_eq!(b.x0, a.x0 + tx);
            assert_eq!(b.y0, a.y0 + ty);
            assert_eq!(b.x1, a.x1 + tx);
            assert_eq!(b.y1, a.y1 + ty);
        }
    }

    #[test]
    fn core_areas_keep_their_levels_in_both_images() {
        let ladder = LevelThresholds::default();
        let expected = [2usize, 1, 0, 1, 1];
        for seed in 0..20 {
            let scene = gen_scene(seed, &GenParams::perturbed());
            for (k, &(i, j)) in scene.gt_pairs.iter().enumerate() {
                for (plane, r) in [(0, &scene.areas0[i]), (1, &scene.areas1[j])] {
                    let level = match ladder.level_of(r.size()) {
                        crate::geometry::Level::At(l) => l,
                        other => panic!("seed {seed} core {k} plane {plane}: {other:?}"),
                    };
                    assert_eq!(level, expected[k], "seed {seed} core {k} plane {plane}");
                }
            }
        }
    }

    #[test]
    fn all_areas_stay_inside_their_images() {
        for seed in 0..20 {
            let scene = gen_scene(seed, &GenParams::perturbed());
            let vp = scene.dims.rect();
            for r in scene.areas0.iter().chain(&scene.areas1) {
                assert!(vp.contains(r), "seed {seed}: {r:?}");
            }
        }
    }

    #[test]
    fn core_areas_correspond_exactly_under_the_transform() {
        for seed in 0..20 {
            let scene = gen_scene(seed, &GenParams::perturbed());
            let map = scene.transform.to_affine();
            for &(i, j) in &scene.gt_pairs {
                let ratio = overlap_ratio(&scene.areas0[i], &scene.areas1[j], &map);
                assert!((ratio - 1.0).abs() < 1e-9, "seed {seed}: ratio {ratio}");
            }
        }
    }

    #[test]
    fn distractors_stay_clear_in_both_images() {
        for seed in 0..20 {
            let scene = gen_scene(seed, &GenParams::perturbed());
            let map = scene.transform.to_affine();
            let n = scene.gt_pairs.len();
            for d in &scene.areas0[n..] {
                let mapped = map.map_rect(d);
                for other in &scene.areas1 {
                    assert!(
                        rect_gap(&mapped, other) >= CLEARANCE - 1e-9,
                        "seed {seed}: image-0 distractor too close"
                    );
                }
            }
            for d in &scene.areas1[n..] {
                for core in &scene.areas1[..n] {
                    assert!(rect_gap(d, core) >= CLEARANCE - 1e-9, "seed {seed}");
                }
            }
        }
    }

    #[test]
    fn scene_graphs_satisfy_all_invariants() {
        let cfg = PipelineConfig::default();
        for seed in 0..10 {
            let scene = gen_scene(seed, &GenParams::perturbed());
            let (g0, g1) = scene_graphs(&scene, &cfg).unwrap();
            let v0 = check_graph(&g0, &cfg.graph);
            let v1 = check_graph(&g1, &cfg.graph);
            assert!(v0.is_empty(), "seed {seed} graph 0: {v0:?}");
            assert!(v1.is_empty(), "seed {seed} graph 1: {v1:?}");
        }
    }

    #[test]
    fn scoring_flags_empty_and_orders_precision() {
        let scene = gen_scene(1, &GenParams::identity());
        let empty = MatchOutput {
            pairs: vec![],
            diagnostics: serde_json::from_value(serde_json::json!({
                "sources_first": 0, "sources_second": 0,
                "matched_first": 0, "matched_second": 0,
                "pairs_merged": 0, "provider_calls": 0,
                "computed_cells": 0, "pruned_cells": 0, "pruned_pairs": [],
                "graph0": {"nodes": 0, "inclusion_edges": 0, "adjacency_edges": 0, "level_histogram": []},
                "graph1": {"nodes": 0, "inclusion_edges": 0, "adjacency_edges": 0, "level_histogram": []}
            }))
            .unwrap(),
        };
        let m = score_matches(&scene, &empty);
        assert!(m.empty);
        assert_eq!(m.aor, 0.0);
        assert_eq!(m.area_num, 0);
    }

    #[test]
    fn precision_thresholds_are_monotone() {
        let cfg = PipelineConfig::default();
        for seed in 0..5 {
            let scene = gen_scene(seed, &GenParams::perturbed());
            let outcome = evaluate_scene(&scene, &cfg).unwrap();
            let m = &outcome.metrics;
            assert!(m.amp_08 <= m.amp_07 + 1e-12);
            assert!(m.amp_07 <= m.amp_06 + 1e-12);
        }
    }

    #[test]
    fn identity_seed_matches_perfectly() {
        let cfg = PipelineConfig::default();
        let scene = gen_scene(0, &GenParams::identity());
        let outcome = evaluate_scene(&scene, &cfg).unwrap();
        assert!(!outcome.metrics.empty);
        assert_eq!(outcome.metrics.aor, 1.0);
        assert_eq!(outcome.metrics.amp_08, 1.0);
        assert!(outcome.max_e_g < 1e-9, "max e_g {}", outcome.max_e_g);
        assert!(outcome.match_sets_equal);
        assert!(outcome.pruning_sound);
        assert!(outcome.provider_calls_pruned <= outcome.provider_calls_full);
        // Every medium-sized area (the source level) matches its twin:
        // the contained one, the two free-standing ones, the distractors.
        let mut expected = vec![(1, 1), (3, 3), (4, 4)];
        expected.extend((5..scene.areas0.len()).map(|i| (i, i)));
        assert_eq!(outcome.pairs, expected);
    }

    #[test]
    fn scene_roundtrips_through_json() {
        let scene = gen_scene(7, &GenParams::perturbed());
        let json = serde_json::to_string(&scene).unwrap();
        let back: SyntheticScene = serde_json::from_str(&json).unwrap();
        assert_eq!(back, scene);
    }

    #[test]
    fn rendered_images_agree_on_corresponding_pixels() {
        let scene = gen_scene(4, &GenParams::identity());
        let (img0, img1) = render_scene_images(&scene);
        // Identity transform: the two renders are the same image.
        assert_eq!(img0.pixels(), img1.pixels());
    }
}
