//! Area-pair similarity.
//!
//! A candidate pair is scored by splitting each area into an 8x8 patch
//! grid and marking each patch active when it lands in the co-visible
//! part of the other area; the pair's similarity is the product of the
//! two directions' active fractions. Providers differ in how activity is
//! judged: from a known ground-truth transform, from normalized cross
//! correlation of pixel patches, or from a fixed lookup table.
//!
//! `SimilarityMatrix` memoizes provider results per node pair, guarantees
//! a single provider call per logical pair, and optionally prunes the
//! children of dissimilar parent pairs without scoring them.

use std::collections::HashMap;
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{AffineMap, ImageDims, Rect};
use crate::graph::AreaGraph;

/// Patches per axis of the activity grid.
pub const PATCH_GRID: usize = 8;
/// A patch is active when strictly more than this fraction of it maps
/// into the other area.
pub const ACTIVE_FRACTION: f64 = 0.6;
/// Square resolution both crops are resampled to for pixel correlation.
const NCC_CROP: usize = 320;

#[derive(Debug, Error)]
pub enum ProviderError {
    #[error("similarity requires one area from each image")]
    SameImage,
    #[error("image unavailable: {0}")]
    ImageUnavailable(String),
    #[error("no table entry for node pair ({0}, {1})")]
    MissingEntry(usize, usize),
}

/// Which image of the pair an area belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImageSide {
    First,
    Second,
}

/// An area presented to a provider: its graph node id, its image, and
/// its rect in work coordinates.
#[derive(Debug, Clone, Copy)]
pub struct AreaRef {
    pub side: ImageSide,
    pub node_id: usize,
    pub rect: Rect,
}

/// Per-patch activity of one area against another, row-major 8x8.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivityMap {
    pub sigma: [f64; PATCH_GRID * PATCH_GRID],
}

impl ActivityMap {
    pub fn mean(&self) -> f64 {
        self.sigma.iter().sum::<f64>() / self.sigma.len() as f64
    }
}

/// Similarity of a pair from its two directional activity maps.
pub fn combine_activity(a: &ActivityMap, b: &ActivityMap) -> f64 {
    a.mean() * b.mean()
}

/// Activity of `area`'s patches against `other`, where `map` carries
/// `area`'s plane onto `other`'s. A patch is active when strictly more
/// than `ACTIVE_FRACTION` of its mapped footprint lies inside `other`.
pub fn overlap_activity(area: &Rect, other: &Rect, map: &AffineMap) -> ActivityMap {
    let mut sigma = [0.0; PATCH_GRID * PATCH_GRID];
    let pw = area.width() / PATCH_GRID as f64;
    let ph = area.height() / PATCH_GRID as f64;
    for row in 0..PATCH_GRID {
        for col in 0..PATCH_GRID {
            let patch = Rect::new(
                area.x0 + col as f64 * pw,
                area.y0 + row as f64 * ph,
                area.x0 + (col + 1) as f64 * pw,
                area.y0 + (row + 1) as f64 * ph,
            );
            let mapped = map.map_rect(&patch);
            let fraction = mapped.overlap_size(other) / mapped.size();
            if fraction > ACTIVE_FRACTION {
                sigma[row * PATCH_GRID + col] = 1.0;
            }
        }
    }
    ActivityMap { sigma }
}

/// Scores a candidate pair of areas in `[0, 1]`.
pub trait SimilarityProvider: Sync {
    fn compute(&self, a: &AreaRef, b: &AreaRef) -> Result<f64, ProviderError>;
}

/// Orients an unordered pair so the first element is the image-0 area.
fn orient<'r>(a: &'r AreaRef, b: &'r AreaRef) -> Result<(&'r AreaRef, &'r AreaRef), ProviderError> {
    match (a.side, b.side) {
        (ImageSide::First, ImageSide::Second) => Ok((a, b)),
        (ImageSide::Second, ImageSide::First) => Ok((b, a)),
        _ => Err(ProviderError::SameImage),
    }
}

// ── Ground-truth provider ──

/// Scores pairs from the known work-plane transform between the images.
pub struct GroundTruthProvider {
    fwd: AffineMap,
    inv: AffineMap,
}

impl GroundTruthProvider {
    /// `fwd` maps image-0 work coordinates onto image-1 work coordinates.
    pub fn new(fwd: AffineMap) -> Self {
        let inv = fwd.inverse();
        GroundTruthProvider { fwd, inv }
    }
}

impl SimilarityProvider for GroundTruthProvider {
    fn compute(&self, a: &AreaRef, b: &AreaRef) -> Result<f64, ProviderError> {
        let (p, q) = orient(a, b)?;
        let m0 = overlap_activity(&p.rect, &q.rect, &self.fwd);
        let m1 = overlap_activity(&q.rect, &p.rect, &self.inv);
        Ok(combine_activity(&m0, &m1))
    }
}

// ── Pixel-correlation provider ──

/// Grayscale raster with values in `[0, 1]`.
#[derive(Debug, Clone)]
pub struct Grayscale {
    pub width: u32,
    pub height: u32,
    data: Vec<f64>,
}

impl Grayscale {
    pub fn new(width: u32, height: u32, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), (width as usize) * (height as usize));
        Grayscale { width, height, data }
    }

    pub fn load(path: &Path) -> Result<Self, ProviderError> {
        let img = image::open(path)
            .map_err(|e| ProviderError::ImageUnavailable(format!("{}: {e}", path.display())))?
            .to_luma8();
        let (width, height) = (img.width(), img.height());
        let data = img.into_raw().into_iter().map(|v| v as f64 / 255.0).collect();
        Ok(Grayscale { width, height, data })
    }

    pub fn dims(&self) -> ImageDims {
        ImageDims { width: self.width, height: self.height }
    }

    /// Raw pixel values in row-major order.
    pub fn pixels(&self) -> &[f64] {
        &self.data
    }

    /// Bilinear sample at continuous image coordinates, edge-clamped.
    fn sample(&self, x: f64, y: f64) -> f64 {
        let u = (x - 0.5).clamp(0.0, (self.width - 1) as f64);
        let v = (y - 0.5).clamp(0.0, (self.height - 1) as f64);
        let (u0, v0) = (u.floor() as usize, v.floor() as usize);
        let (u1, v1) = ((u0 + 1).min(self.width as usize - 1), (v0 + 1).min(self.height as usize - 1));
        let (fu, fv) = (u - u0 as f64, v - v0 as f64);
        let at = |c: usize, r: usize| self.data[r * self.width as usize + c];
        at(u0, v0) * (1.0 - fu) * (1.0 - fv)
            + at(u1, v0) * fu * (1.0 - fv)
            + at(u0, v1) * (1.0 - fu) * fv
            + at(u1, v1) * fu * fv
    }

    /// Resamples the rect (in this image's own coordinates) to a square
    /// `NCC_CROP` raster.
    fn resample(&self, rect: &Rect) -> Vec<f64> {
        let n = NCC_CROP;
        let mut out = Vec::with_capacity(n * n);
        for r in 0..n {
            let y = rect.y0 + (r as f64 + 0.5) / n as f64 * rect.height();
            for c in 0..n {
                let x = rect.x0 + (c as f64 + 0.5) / n as f64 * rect.width();
                out.push(self.sample(x, y));
            }
        }
        out
    }
}

/// Pearson correlation of two equal-length slices; 0 when either side
/// has (numerically) no variance.
fn ncc(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut cov, mut va, mut vb) = (0.0, 0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    if va < 1e-12 || vb < 1e-12 {
        return 0.0;
    }
    cov / (va * vb).sqrt()
}

/// Scores pairs by patchwise normalized cross correlation of the two
/// crops, each resampled to a common square resolution. Negative
/// correlations count as zero activity.
pub struct NccProvider {
    img0: Grayscale,
    img1: Grayscale,
    work: ImageDims,
}

impl NccProvider {
    pub fn from_images(img0: Grayscale, img1: Grayscale, work: ImageDims) -> Self {
        NccProvider { img0, img1, work }
    }

    pub fn from_files(path0: &Path, path1: &Path, work: ImageDims) -> Result<Self, ProviderError> {
        Ok(NccProvider { img0: Grayscale::load(path0)?, img1: Grayscale::load(path1)?, work })
    }

    /// Per-patch activity between the two resampled crops.
    fn patch_activity(crop0: &[f64], crop1: &[f64]) -> ActivityMap {
        let side = NCC_CROP / PATCH_GRID;
        let mut sigma = [0.0; PATCH_GRID * PATCH_GRID];
        let mut pa = Vec::with_capacity(side * side);
        let mut pb = Vec::with_capacity(side * side);
        for row in 0..PATCH_GRID {
            for col in 0..PATCH_GRID {
                pa.clear();
                pb.clear();
                for r in 0..side {
                    let base = (row * side + r) * NCC_CROP + col * side;
                    pa.extend_from_slice(&crop0[base..base + side]);
                    pb.extend_from_slice(&crop1[base..base + side]);
                }
                sigma[row * PATCH_GRID + col] = ncc(&pa, &pb).max(0.0);
            }
        }
        ActivityMap { sigma }
    }
}

impl SimilarityProvider for NccProvider {
    fn compute(&self, a: &AreaRef, b: &AreaRef) -> Result<f64, ProviderError> {
        let (p, q) = orient(a, b)?;
        let to0 = AffineMap::scale_between(self.work, self.img0.dims());
        let to1 = AffineMap::scale_between(self.work, self.img1.dims());
        let crop0 = self.img0.resample(&to0.map_rect(&p.rect));
        let crop1 = self.img1.resample(&to1.map_rect(&q.rect));
        let m = Self::patch_activity(&crop0, &crop1);
        Ok(combine_activity(&m, &m))
    }
}

// ── Table provider ──

/// Serialized lookup table: entries are `[image0_node, image1_node, sim]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimilarityTable {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default: Option<f64>,
    pub pairs: Vec<(usize, usize, f64)>,
}

/// Scores pairs from a fixed table keyed by node ids.
pub struct ConstantProvider {
    table: HashMap<(usize, usize), f64>,
    default: Option<f64>,
}

impl ConstantProvider {
    pub fn new(table: SimilarityTable) -> Result<Self, ProviderError> {
        let mut map = HashMap::new();
        for (a, b, s) in table.pairs {
            if !(0.0..=1.0).contains(&s) {
                return Err(ProviderError::ImageUnavailable(format!(
                    "table similarity {s} for ({a}, {b}) outside [0, 1]"
                )));
            }
            map.insert((a, b), s);
        }
        Ok(ConstantProvider { table: map, default: table.default })
    }

    pub fn from_json(text: &str) -> Result<Self, ProviderError> {
        let table: SimilarityTable = serde_json::from_str(text)
            .map_err(|e| ProviderError::ImageUnavailable(format!("similarity table: {e}")))?;
        Self::new(table)
    }
}

impl SimilarityProvider for ConstantProvider {
    fn compute(&self, a: &AreaRef, b: &AreaRef) -> Result<f64, ProviderError> {
        let (p, q) = orient(a, b)?;
        self.table
            .get(&(p.node_id, q.node_id))
            .copied()
            .or(self.default)
            .ok_or(ProviderError::MissingEntry(p.node_id, q.node_id))
    }
}

// ── Memoizing matrix ──

/// State of one matrix cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CellState {
    Uncomputed,
    Pruned,
    Value(f64),
}

#[derive(Debug, Default)]
struct MatrixState {
    cells: HashMap<(usize, usize), CellState>,
    calls: u64,
    pruned: Vec<(usize, usize)>,
}

/// Call counts and fill statistics of a matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatrixStats {
    pub provider_calls: u64,
    pub computed_cells: u64,
    pub pruned_cells: u64,
}

/// Lazy similarity matrix between the nodes of two area graphs.
///
/// Cells are published once: the first successful provider result is
/// final, and each logical pair is scored at most once no matter which
/// direction asks. With pruning enabled, a parent pair scoring below
/// `t_as` marks the cross product of the two parents' direct children
/// pruned (similarity 0) before they are ever scored. Provider failures
/// leave the cell uncomputed.
pub struct SimilarityMatrix<'a> {
    g0: &'a AreaGraph,
    g1: &'a AreaGraph,
    provider: &'a dyn SimilarityProvider,
    t_as: f64,
    pruning: bool,
    state: Mutex<MatrixState>,
}

impl<'a> SimilarityMatrix<'a> {
    pub fn new(
        g0: &'a AreaGraph,
        g1: &'a AreaGraph,
        provider: &'a dyn SimilarityProvider,
        t_as: f64,
        pruning: bool,
    ) -> Self {
        SimilarityMatrix { g0, g1, provider, t_as, pruning, state: Mutex::new(MatrixState::default()) }
    }

    /// Similarity of image-0 node `i0` and image-1 node `i1`.
    pub fn get(&self, i0: usize, i1: usize) -> Result<f64, ProviderError> {
        let mut st = self.state.lock().unwrap();
        match st.cells.get(&(i0, i1)) {
            Some(CellState::Value(v)) => return Ok(*v),
            Some(CellState::Pruned) => return Ok(0.0),
            Some(CellState::Uncomputed) | None => {}
        }
        let a = AreaRef { side: ImageSide::First, node_id: i0, rect: self.g0.nodes[i0].rect };
        let b = AreaRef { side: ImageSide::Second, node_id: i1, rect: self.g1.nodes[i1].rect };
        st.calls += 1;
        let v = self.provider.compute(&a, &b)?;
        st.cells.insert((i0, i1), CellState::Value(v));
        if self.pruning && v < self.t_as {
            let kids0: Vec<usize> = self.g0.children_of(i0).collect();
            let kids1: Vec<usize> = self.g1.children_of(i1).collect();
            for &c0 in &kids0 {
                for &c1 in &kids1 {
                    let key = (c0, c1);
                    if !st.cells.contains_key(&key) {
                        st.cells.insert(key, CellState::Pruned);
                        st.pruned.push(key);
                    }
                }
            }
        }
        Ok(v)
    }

    /// Same lookup with the pair given from one side's point of view.
    pub fn get_pair(&self, src_side: ImageSide, src: usize, tgt: usize) -> Result<f64, ProviderError> {
        match src_side {
            ImageSide::First => self.get(src, tgt),
            ImageSide::Second => self.get(tgt, src),
        }
    }

    pub fn cell_state(&self, i0: usize, i1: usize) -> CellState {
        self.state
            .lock()
            .unwrap()
            .cells
            .get(&(i0, i1))
            .copied()
            .unwrap_or(CellState::Uncomputed)
    }

    pub fn stats(&self) -> MatrixStats {
        let st = self.state.lock().unwrap();
        let computed = st.cells.values().filter(|c| matches!(c, CellState::Value(_))).count();
        MatrixStats {
            provider_calls: st.calls,
            computed_cells: computed as u64,
            pruned_cells: st.pruned.len() as u64,
        }
    }

    pub fn pruned_pairs(&self) -> Vec<(usize, usize)> {
        self.state.lock().unwrap().pruned.clone()
    }
}
