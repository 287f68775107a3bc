//! Segmentation input parsing.
//!
//! Inputs are JSON documents listing labeled areas over a native-resolution
//! image. Each area carries an axis-aligned bounding box, a run-length
//! encoded binary mask, or both; masks are reduced to their tight bounding
//! box. Parsed boxes are rescaled to the working resolution and exact
//! duplicates are dropped before graph construction.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{AffineMap, ImageDims, Rect};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("segmentation JSON is malformed: {0}")]
    Json(#[from] serde_json::Error),
    #[error("image dimensions must be positive, got {width}x{height}")]
    BadDims { width: u32, height: u32 },
    #[error("area {id}: {reason}")]
    BadArea { id: String, reason: String },
}

/// Uncompressed run-length encoding of a binary mask in column-major
/// order. `size` is `[height, width]`; `counts` alternates run lengths of
/// zeros and ones, starting with zeros.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskRle {
    pub size: [u32; 2],
    pub counts: Vec<u64>,
}

impl MaskRle {
    /// Tight bounding box of the set pixels in continuous pixel
    /// coordinates, or `None` when the mask is empty.
    pub fn bbox(&self) -> Result<Option<Rect>, String> {
        let h = self.size[0] as u64;
        let w = self.size[1] as u64;
        if h == 0 || w == 0 {
            return Err("mask size must be positive".into());
        }
        let total: u64 = self.counts.iter().sum();
        if total != h * w {
            return Err(format!("run lengths sum to {total}, expected {}", h * w));
        }
        let (mut min_r, mut max_r) = (u64::MAX, 0u64);
        let (mut min_c, mut max_c) = (u64::MAX, 0u64);
        let mut idx = 0u64;
        for (k, &run) in self.counts.iter().enumerate() {
            if k % 2 == 1 && run > 0 {
                // Column-major: linear index i covers pixel (row i % h, col i / h).
                for i in idx..idx + run {
                    let (c, r) = (i / h, i % h);
                    min_r = min_r.min(r);
                    max_r = max_r.max(r);
                    min_c = min_c.min(c);
                    max_c = max_c.max(c);
                }
            }
            idx += run;
        }
        if min_r == u64::MAX {
            return Ok(None);
        }
        Ok(Some(Rect::new(
            min_c as f64,
            min_r as f64,
            (max_c + 1) as f64,
            (max_r + 1) as f64,
        )))
    }
}

/// One labeled area of the input segmentation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InputArea {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bbox: Option<[f64; 4]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask_rle: Option<MaskRle>,
}

/// A full segmentation of one image.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SegmentationInput {
    pub image: ImageDims,
    pub areas: Vec<InputArea>,
}

impl SegmentationInput {
    pub fn from_json(text: &str) -> Result<Self, IngestError> {
        let seg: SegmentationInput = serde_json::from_str(text)?;
        if seg.image.width == 0 || seg.image.height == 0 {
            return Err(IngestError::BadDims {
                width: seg.image.width,
                height: seg.image.height,
            });
        }
        Ok(seg)
    }

    /// Native-plane rect of one area: the bbox if given, otherwise the
    /// mask's bounding box. Degenerate (zero-extent or empty) areas
    /// report `None`.
    fn native_rect(area: &InputArea) -> Result<Option<Rect>, IngestError> {
        if let Some([x0, y0, x1, y1]) = area.bbox {
            return Ok(Rect::checked(x0, y0, x1, y1));
        }
        if let Some(rle) = &area.mask_rle {
            return rle
                .bbox()
                .map_err(|reason| IngestError::BadArea { id: area.id.clone(), reason });
        }
        Err(IngestError::BadArea {
            id: area.id.clone(),
            reason: "has neither bbox nor mask_rle".into(),
        })
    }

    /// All area rects rescaled to the working resolution, with degenerate
    /// areas skipped and exact duplicates dropped (first occurrence wins).
    pub fn to_work_rects(&self, work: ImageDims) -> Result<Vec<Rect>, IngestError> {
        if self.image.width == 0 || self.image.height == 0 {
            return Err(IngestError::BadDims {
                width: self.image.width,
                height: self.image.height,
            });
        }
        let map = AffineMap::scale_between(self.image, work);
        let mut out: Vec<Rect> = Vec::new();
        for area in &self.areas {
            let Some(native) = Self::native_rect(area)? else { continue };
            let scaled = map.map_rect(&native);
            if !out.contains(&scaled) {
                out.push(scaled);
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_bbox_areas_and_rescales() {
        let text = r#"{
            "image": {"width": 1280, "height": 960},
            "areas": [
                {"id": "a", "bbox": [0.0, 0.0, 200.0, 200.0]},
                {"id": "b", "bbox": [640.0, 480.0, 1280.0, 960.0]}
            ]
        }"#;
        let seg = SegmentationInput::from_json(text).unwrap();
        let rects = seg
            .to_work_rects(ImageDims { width: 640, height: 480 })
            .unwrap();
        assert_eq!(rects, vec![
            Rect::new(0.0, 0.0, 100.0, 100.0),
            Rect::new(320.0, 240.0, 640.0, 480.0),
        ]);
    }

    #[test]
    fn skips_degenerate_and_dedups_exact() {
        let text = r#"{
            "image": {"width": 640, "height": 480},
            "areas": [
                {"id": "a", "bbox": [10.0, 10.0, 110.0, 110.0]},
                {"id": "zero", "bbox": [50.0, 50.0, 50.0, 120.0]},
                {"id": "dup", "bbox": [10.0, 10.0, 110.0, 110.0]}
            ]
        }"#;
        let seg = SegmentationInput::from_json(text).unwrap();
        let rects = seg
            .to_work_rects(ImageDims { width: 640, height: 480 })
            .unwrap();
        assert_eq!(rects, vec![Rect::new(10.0, 10.0, 110.0, 110.0)]);
    }

    #[test]
    fn rejects_zero_image_dims() {
        let text = r#"{"image": {"width": 0, "height": 480}, "areas": []}"#;
        assert!(matches!(
            SegmentationInput::from_json(text),
            Err(IngestError::BadDims { .. })
        ));
    }

    #[test]
    fn rejects_area_without_geometry() {
        let text = r#"{
            "image": {"width": 640, "height": 480},
            "areas": [{"id": "bare"}]
        }"#;
        let seg = SegmentationInput::from_json(text).unwrap();
        let err = seg
            .to_work_rects(ImageDims { width: 640, height: 480 })
            .unwrap_err();
        assert!(matches!(err, IngestError::BadArea { .. }));
    }

    #[test]
    fn mask_bbox_covers_set_pixels() {
        // 4x5 mask (h=4, w=5), column-major. Set pixels: rows 1..=2 of
        // columns 2..=3, i.e. linear runs at 9..=10 and 13..=14.
        let rle = MaskRle { size: [4, 5], counts: vec![9, 2, 2, 2, 5] };
        let bbox = rle.bbox().unwrap().unwrap();
        assert_eq!(bbox, Rect::new(2.0, 1.0, 4.0, 3.0));
    }

    #[test]
    fn mask_full_and_empty() {
        let full = MaskRle { size: [3, 3], counts: vec![0, 9] };
        assert_eq!(full.bbox().unwrap().unwrap(), Rect::new(0.0, 0.0, 3.0, 3.0));
        let empty = MaskRle { size: [3, 3], counts: vec![9] };
        assert!(empty.bbox().unwrap().is_none());
    }

    #[test]
    fn mask_with_wrong_total_is_rejected() {
        let rle = MaskRle { size: [4, 4], counts: vec![3, 2] };
        assert!(rle.bbox().is_err());
    }

    #[test]
    fn mask_area_used_when_bbox_missing() {
        let text = r#"{
            "image": {"width": 640, "height": 480},
            "areas": [
                {"id": "m", "mask_rle": {"size": [480, 640], "counts": [48000, 96000, 163200]}}
            ]
        }"#;
        let seg = SegmentationInput::from_json(text).unwrap();
        let rects = seg
            .to_work_rects(ImageDims { width: 640, height: 480 })
            .unwrap();
        // Columns 100..=299 fully set: x in [100, 300), y in [0, 480).
        assert_eq!(rects, vec![Rect::new(100.0, 0.0, 300.0, 480.0)]);
    }
}
