//! Axis-aligned boxes in `(x, y, w, h)` form, IoU and greedy NMS.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Axis-aligned box: left, top, width, height in input pixels.
///
/// Construction through [`BBox::new`] guarantees finite coordinates and
/// strictly positive extent. Serialized as a `[x, y, w, h]` array.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Result<Self> {
        if !(x.is_finite() && y.is_finite() && w.is_finite() && h.is_finite()) {
            return Err(Error::Invalid(format!(
                "box [{x}, {y}, {w}, {h}] has non-finite coordinates"
            )));
        }
        if w <= 0.0 || h <= 0.0 {
            return Err(Error::Invalid(format!(
                "box [{x}, {y}, {w}, {h}] has non-positive extent"
            )));
        }
        Ok(Self { x, y, w, h })
    }

    pub fn from_corners(x1: f64, y1: f64, x2: f64, y2: f64) -> Result<Self> {
        Self::new(x1, y1, x2 - x1, y2 - y1)
    }

    pub fn x2(&self) -> f64 {
        self.x + self.w
    }

    pub fn y2(&self) -> f64 {
        self.y + self.h
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn aspect_ratio(&self) -> f64 {
        self.w / self.h
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x + 0.5 * self.w, self.y + 0.5 * self.h)
    }

    /// Half-open containment: `x <= px < x2`, `y <= py < y2`.
    pub fn contains_point(&self, px: f64, py: f64) -> bool {
        px >= self.x && px < self.x2() && py >= self.y && py < self.y2()
    }

    pub fn intersection_area(&self, other: &BBox) -> f64 {
        let iw = self.x2().min(other.x2()) - self.x.max(other.x);
        let ih = self.y2().min(other.y2()) - self.y.max(other.y);
        if iw <= 0.0 || ih <= 0.0 {
            0.0
        } else {
            iw * ih
        }
    }

    pub fn iou(&self, other: &BBox) -> f64 {
        iou(self, other)
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.x, self.y, self.w, self.h]
    }
}

impl Serialize for BBox {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_array().serialize(s)
    }
}

impl<'de> Deserialize<'de> for BBox {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let [x, y, w, h] = <[f64; 4]>::deserialize(d)?;
        BBox::new(x, y, w, h).map_err(serde::de::Error::custom)
    }
}

/// Box with a confidence in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredBox {
    #[serde(rename = "box")]
    pub bbox: BBox,
    pub score: f64,
}

impl ScoredBox {
    pub fn new(bbox: BBox, score: f64) -> Result<Self> {
        if !score.is_finite() || !(0.0..=1.0).contains(&score) {
            return Err(Error::Invalid(format!("score {score} outside [0, 1]")));
        }
        Ok(Self { bbox, score })
    }
}

pub fn area(b: &BBox) -> f64 {
    b.area()
}

pub fn aspect_ratio(b: &BBox) -> f64 {
    b.aspect_ratio()
}

/// Intersection over union. Touching edges give 0.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let inter = a.intersection_area(b);
    if inter == 0.0 {
        return 0.0;
    }
    let union = a.area() + b.area() - inter;
    (inter / union).clamp(0.0, 1.0)
}

/// Indices of `scores` sorted by score descending, ties by lower index.
pub(crate) fn order_by_score(scores: impl Iterator<Item = f64>) -> Vec<usize> {
    let scores: Vec<f64> = scores.collect();
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&i, &j| scores[j].total_cmp(&scores[i]).then(i.cmp(&j)));
    idx
}

/// Greedy NMS; returns the indices of the kept boxes in score order.
pub fn nms_indices(boxes: &[ScoredBox], iou_threshold: f64) -> Vec<usize> {
    let order = order_by_score(boxes.iter().map(|b| b.score));
    let mut kept: Vec<usize> = Vec::new();
    for i in order {
        if kept
            .iter()
            .all(|&k| iou(&boxes[k].bbox, &boxes[i].bbox) <= iou_threshold)
        {
            kept.push(i);
        }
    }
    kept
}

/// Greedy score-descending non-maximum suppression.
///
/// A box is dropped when its IoU with an already kept box exceeds
/// `iou_threshold`. Equal scores keep the lower input index first.
pub fn nms(boxes: &[ScoredBox], iou_threshold: f64) -> Vec<ScoredBox> {
    nms_indices(boxes, iou_threshold)
        .into_iter()
        .map(|i| boxes[i])
        .collect()
}
