//! Axis-aligned rectangle primitives used across the matching pipeline.
//!
//! All coordinates are continuous (f64) pixel positions; rounding to integer
//! pixels happens only when crop rectangles are serialized for output.

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Errors from geometric constructions.
#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    /// The requested expansion target exceeds the image area, so no
    /// rectangle of that size can fit. Usually a sign of misconfigured
    /// size thresholds rather than bad data.
    #[error("cannot expand to {target} px^2 inside an image of {available} px^2")]
    ExpansionImpossible { target: f64, available: f64 },
}

/// Closed axis-aligned rectangle with `x0 < x1` and `y0 < y1`.
///
/// Serialized as the 4-array `[x0, y0, x1, y1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    /// Builds a rectangle, panicking on a degenerate or inverted extent.
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        assert!(x0 < x1 && y0 < y1, "degenerate rect [{x0},{y0},{x1},{y1}]");
        Rect { x0, y0, x1, y1 }
    }

    /// Builds a rectangle, returning `None` when the extent is degenerate.
    pub fn checked(x0: f64, y0: f64, x1: f64, y1: f64) -> Option<Self> {
        (x0 < x1 && y0 < y1 && x0.is_finite() && y0.is_finite() && x1.is_finite() && y1.is_finite())
            .then_some(Rect { x0, y0, x1, y1 })
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    /// Area in square pixels.
    pub fn size(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> (f64, f64) {
        ((self.x0 + self.x1) / 2.0, (self.y0 + self.y1) / 2.0)
    }

    /// Width divided by height, always >= 1 (orientation-free).
    pub fn aspect_ratio(&self) -> f64 {
        let (w, h) = (self.width(), self.height());
        if w >= h {
            w / h
        } else {
            h / w
        }
    }

    /// True when `other` lies entirely inside `self` (boundaries may touch).
    pub fn contains(&self, other: &Rect) -> bool {
        self.x0 <= other.x0 && self.y0 <= other.y0 && self.x1 >= other.x1 && self.y1 >= other.y1
    }

    /// True when `self` lies inside the image `[0, w] x [0, h]`, with a
    /// small tolerance for floating-point drift at the borders.
    pub fn inside(&self, img: ImageDims) -> bool {
        const EPS: f64 = 1e-6;
        self.x0 >= -EPS && self.y0 >= -EPS && self.x1 <= img.w() + EPS && self.y1 <= img.h() + EPS
    }

    /// Overlap area with `other` in square pixels; 0 for disjoint or
    /// merely touching rectangles.
    pub fn overlap_size(&self, other: &Rect) -> f64 {
        let w = self.x1.min(other.x1) - self.x0.max(other.x0);
        let h = self.y1.min(other.y1) - self.y0.max(other.y0);
        if w > 0.0 && h > 0.0 {
            w * h
        } else {
            0.0
        }
    }

    /// Intersection over union; symmetric, in [0, 1].
    pub fn iou(&self, other: &Rect) -> f64 {
        let o = self.overlap_size(other);
        if o == 0.0 {
            return 0.0;
        }
        o / (self.size() + other.size() - o)
    }

    /// Overlap divided by the size of the smaller rectangle; symmetric,
    /// in [0, 1], and 1 exactly when one rectangle contains the other.
    /// This is the score that decides between inclusion, adjacency and
    /// no edge during graph construction.
    pub fn link_score(&self, other: &Rect) -> f64 {
        self.overlap_size(other) / self.size().min(other.size())
    }

    /// Smallest rectangle containing both inputs. Commutative,
    /// associative, and idempotent.
    pub fn fuse(&self, other: &Rect) -> Rect {
        Rect {
            x0: self.x0.min(other.x0),
            y0: self.y0.min(other.y0),
            x1: self.x1.max(other.x1),
            y1: self.y1.max(other.y1),
        }
    }

    /// Corner coordinates rounded half-up to integer pixels. Used only
    /// when serializing crop rectangles.
    pub fn to_pixel_corners(&self) -> [i64; 4] {
        [self.x0, self.y0, self.x1, self.y1].map(|v| (v + 0.5).floor() as i64)
    }
}

impl Serialize for Rect {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        [self.x0, self.y0, self.x1, self.y1].serialize(s)
    }
}

impl<'de> Deserialize<'de> for Rect {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let [x0, y0, x1, y1] = <[f64; 4]>::deserialize(d)?;
        Rect::checked(x0, y0, x1, y1)
            .ok_or_else(|| serde::de::Error::custom(format!("degenerate rect [{x0},{y0},{x1},{y1}]")))
    }
}

/// Integer pixel dimensions of an image plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageDims {
    pub width: u32,
    pub height: u32,
}

impl ImageDims {
    pub fn new(width: u32, height: u32) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be positive");
        ImageDims { width, height }
    }

    pub fn w(&self) -> f64 {
        f64::from(self.width)
    }

    pub fn h(&self) -> f64 {
        f64::from(self.height)
    }

    pub fn area(&self) -> f64 {
        self.w() * self.h()
    }

    /// The full image extent as a rectangle.
    pub fn rect(&self) -> Rect {
        Rect::new(0.0, 0.0, self.w(), self.h())
    }
}

/// Size-level assignment of an area relative to a threshold ladder.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Level {
    /// Smaller than the lowest threshold.
    BelowRange,
    /// Within level `i`: `tl[i] <= size < tl[i + 1]`.
    At(usize),
    /// At or above the topmost threshold.
    AboveRange,
}

/// Strictly increasing ladder of `L + 1` size thresholds defining `L`
/// size levels: an area of size `s` sits at level `i` when
/// `tl[i] <= s < tl[i + 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct LevelThresholds {
    tl: Vec<f64>,
}

impl LevelThresholds {
    pub fn new(tl: Vec<f64>) -> Result<Self, String> {
        if tl.len() < 2 {
            return Err("need at least two thresholds (one level)".into());
        }
        if tl[0] <= 0.0 {
            return Err("thresholds must be positive".into());
        }
        if tl.windows(2).any(|w| w[0] >= w[1]) {
            return Err("thresholds must be strictly increasing".into());
        }
        Ok(LevelThresholds { tl })
    }

    /// Number of levels `L` (one less than the threshold count).
    pub fn num_levels(&self) -> usize {
        self.tl.len() - 1
    }

    /// Lower size bound of level `i`.
    pub fn lower_bound(&self, level: usize) -> f64 {
        self.tl[level]
    }

    /// The raw ladder.
    pub fn ladder(&self) -> &[f64] {
        &self.tl
    }

    /// Maps an area size to its level, or to a marker outside the ladder.
    pub fn level_of(&self, size: f64) -> Level {
        if size < self.tl[0] {
            return Level::BelowRange;
        }
        if size >= self.tl[self.tl.len() - 1] {
            return Level::AboveRange;
        }
        // tl is sorted, so the partition point is the first bound above size.
        let i = self.tl.partition_point(|&t| t <= size);
        Level::At(i - 1)
    }
}

impl Default for LevelThresholds {
    /// Four levels spanning roughly 80x80 up to 560x560 pixels at the
    /// 640x480 working resolution.
    fn default() -> Self {
        LevelThresholds::new(vec![6400.0, 16900.0, 65536.0, 152100.0, 313600.0]).unwrap()
    }
}

impl TryFrom<Vec<f64>> for LevelThresholds {
    type Error = String;
    fn try_from(tl: Vec<f64>) -> Result<Self, String> {
        LevelThresholds::new(tl)
    }
}

impl From<LevelThresholds> for Vec<f64> {
    fn from(t: LevelThresholds) -> Vec<f64> {
        t.tl
    }
}

/// Axis-aligned affine map `(x, y) -> (sx * x + tx, sy * y + ty)` with
/// positive scales, so rectangles map to rectangles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineMap {
    pub sx: f64,
    pub sy: f64,
    pub tx: f64,
    pub ty: f64,
}

impl AffineMap {
    pub fn new(sx: f64, sy: f64, tx: f64, ty: f64) -> Self {
        assert!(sx > 0.0 && sy > 0.0, "affine map scales must be positive");
        AffineMap { sx, sy, tx, ty }
    }

    pub fn identity() -> Self {
        AffineMap::new(1.0, 1.0, 0.0, 0.0)
    }

    /// Uniform scale plus translation.
    pub fn uniform(s: f64, tx: f64, ty: f64) -> Self {
        AffineMap::new(s, s, tx, ty)
    }

    /// Pure axis scaling that maps the `from` extent onto the `to` extent.
    pub fn scale_between(from: ImageDims, to: ImageDims) -> Self {
        AffineMap::new(to.w() / from.w(), to.h() / from.h(), 0.0, 0.0)
    }

    pub fn apply(&self, x: f64, y: f64) -> (f64, f64) {
        (self.sx * x + self.tx, self.sy * y + self.ty)
    }

    pub fn map_rect(&self, r: &Rect) -> Rect {
        let (x0, y0) = self.apply(r.x0, r.y0);
        let (x1, y1) = self.apply(r.x1, r.y1);
        Rect { x0, y0, x1, y1 }
    }

    pub fn inverse(&self) -> AffineMap {
        AffineMap::new(1.0 / self.sx, 1.0 / self.sy, -self.tx / self.sx, -self.ty / self.sy)
    }

    /// Composition: applies `self` first, then `next`.
    pub fn then(&self, next: &AffineMap) -> AffineMap {
        AffineMap::new(
            next.sx * self.sx,
            next.sy * self.sy,
            next.sx * self.tx + next.tx,
            next.sy * self.ty + next.ty,
        )
    }
}

/// Shifts a `w x h` box centered at `(cx, cy)` the minimal distance needed
/// to lie inside the image. Requires `w <= img.w()` and `h <= img.h()`.
fn place_centered(cx: f64, cy: f64, w: f64, h: f64, img: ImageDims) -> Rect {
    let mut x0 = cx - w / 2.0;
    let mut y0 = cy - h / 2.0;
    if x0 + w > img.w() {
        x0 = img.w() - w;
    }
    if x0 < 0.0 {
        x0 = 0.0;
    }
    if y0 + h > img.h() {
        y0 = img.h() - h;
    }
    if y0 < 0.0 {
        y0 = 0.0;
    }
    Rect::new(x0, y0, x0 + w, y0 + h)
}

/// Grows `r` by single ulps at whichever edges still have room until its
/// size reaches `target`. Corner arithmetic rounds, so a rect built from
/// an exact width and height can still land a few ulps short of a level
/// boundary; this repairs that on the final corners, where it counts.
/// Terminates because a rect filling the whole image has `img.area() >=
/// target` (checked by the caller).
fn nudge_size_up(mut r: Rect, target: f64, img: ImageDims) -> Rect {
    while r.size() < target {
        let mut grew = false;
        if r.x1 < img.w() {
            r.x1 = r.x1.next_up().min(img.w());
            grew = true;
        } else if r.x0 > 0.0 {
            r.x0 = r.x0.next_down().max(0.0);
            grew = true;
        }
        if r.size() >= target {
            break;
        }
        if r.y1 < img.h() {
            r.y1 = r.y1.next_up().min(img.h());
            grew = true;
        } else if r.y0 > 0.0 {
            r.y0 = r.y0.next_down().max(0.0);
            grew = true;
        }
        if !grew {
            break;
        }
    }
    r
}

/// Grows `a` to exactly `target` square pixels (within one ulp of
/// rounding, never below), centered on `a` and shifted to stay inside the
/// image. Dimensions already at least `sqrt(target)` are kept; the other
/// dimension absorbs the growth. The result always contains `a`.
///
/// Fails when `target` exceeds the image area.
pub fn expand_to_level(a: &Rect, target: f64, img: ImageDims) -> Result<Rect, GeometryError> {
    if a.size() >= target {
        return Ok(*a);
    }
    if target > img.area() {
        return Err(GeometryError::ExpansionImpossible { target, available: img.area() });
    }
    let s = target.sqrt();
    let (w, h) = (a.width(), a.height());
    let (mut nw, mut nh) = if w < s && h < s {
        (s, s)
    } else if w >= s {
        (w, target / w)
    } else {
        (target / h, h)
    };
    // Clamping one dimension to the image only happens when the recomputed
    // other dimension still covers the original (target > dim * extent),
    // so containment of `a` is preserved.
    if nw > img.w() {
        nw = img.w();
        nh = target / nw;
    }
    if nh > img.h() {
        nh = img.h();
        nw = target / nh;
    }
    let (cx, cy) = a.center();
    // Re-deriving edges from the center rounds; the union repairs any
    // ulp-sized containment miss and the nudge any ulp-sized size
    // shortfall, both on the corners that actually get returned.
    let placed = place_centered(cx, cy, nw, nh, img).fuse(a);
    Ok(nudge_size_up(placed, target, img))
}

/// A crop rectangle plus a flag recording whether it had to be clamped to
/// the image, which makes its aspect deviate from the requested one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CropResult {
    pub rect: Rect,
    pub clamped: bool,
}

/// Expands `a` to the requested width/height ratio `aspect`, scales the
/// result by `spread >= 1` about its center, and shifts it inside the
/// image. A dimension larger than the image is clamped to it and flagged.
pub fn crop_with_aspect(a: &Rect, aspect: f64, spread: f64, img: ImageDims) -> CropResult {
    assert!(aspect > 0.0, "aspect must be positive");
    assert!(spread >= 1.0, "spread must be at least 1");
    let (w, h) = (a.width(), a.height());
    let (mut cw, mut ch) = if w / h > aspect {
        (w, w / aspect)
    } else {
        (h * aspect, h)
    };
    // Never shrink below the source extent (guards rounding in the
    // equal-aspect case, keeping spread = 1 an identity).
    if cw < w {
        cw = w;
    }
    if ch < h {
        ch = h;
    }
    cw *= spread;
    ch *= spread;
    let mut clamped = false;
    if cw > img.w() {
        cw = img.w();
        clamped = true;
    }
    if ch > img.h() {
        ch = img.h();
        clamped = true;
    }
    let (cx, cy) = a.center();
    CropResult { rect: place_centered(cx, cy, cw, ch, img), clamped }
}
