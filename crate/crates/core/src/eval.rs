//! Open-world detection metrics and COCO-style ingest.
//!
//! All matching is greedy in score order (ties to the lower input index)
//! and one-to-one: a ground-truth box is matched at most once.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{iou, order_by_score, BBox};

/// Class label carried by unknown-object detections.
pub const UNKNOWN: &str = "unknown";

/// Known / unknown class partition of one incremental task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSplit {
    pub task_id: u32,
    /// Classes learned in earlier tasks.
    #[serde(default)]
    pub previously_known: BTreeSet<String>,
    /// Classes introduced by this task.
    pub current_known: BTreeSet<String>,
    pub unknown: BTreeSet<String>,
}

impl TaskSplit {
    pub fn validate(&self) -> Result<()> {
        if let Some(c) = self.previously_known.intersection(&self.current_known).next() {
            return Err(Error::Invalid(format!("class {c:?} is both previously and currently known")));
        }
        if let Some(c) = self.known().intersection(&self.unknown).next() {
            return Err(Error::Invalid(format!("class {c:?} is both known and unknown")));
        }
        if self.known().contains(UNKNOWN) || self.unknown.contains(UNKNOWN) {
            return Err(Error::Invalid(format!("{UNKNOWN:?} is reserved for unknown detections")));
        }
        Ok(())
    }

    /// Cumulative known classes.
    pub fn known(&self) -> BTreeSet<String> {
        self.previously_known.union(&self.current_known).cloned().collect()
    }

    pub fn is_unknown(&self, class: &str) -> bool {
        self.unknown.contains(class)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let split: TaskSplit = serde_json::from_str(&text)?;
        split.validate()?;
        Ok(split)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub image_id: u64,
    #[serde(rename = "box")]
    pub bbox: BBox,
    pub class_label: String,
    pub score: f64,
}

impl Detection {
    pub fn is_unknown(&self) -> bool {
        self.class_label == UNKNOWN
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub image_id: u64,
    #[serde(rename = "box")]
    pub bbox: BBox,
    pub class_label: String,
    pub is_unknown: bool,
}

impl GroundTruth {
    pub fn new(image_id: u64, bbox: BBox, class_label: &str, split: &TaskSplit) -> Self {
        Self {
            image_id,
            bbox,
            class_label: class_label.to_string(),
            is_unknown: split.is_unknown(class_label),
        }
    }
}

fn check_scores(dets: &[Detection]) -> Result<()> {
    match dets.iter().find(|d| !(0.0..=1.0).contains(&d.score)) {
        Some(d) => Err(Error::Invalid(format!("detection score {} outside [0, 1]", d.score))),
        None => Ok(()),
    }
}

/// Greedy matching: each detection, in score order, takes the unmatched
/// ground truth of its image with the highest IoU ≥ `iou_thresh`.
/// Returns per-detection match flags in input order and the match count.
fn greedy_match(dets: &[&Detection], gts: &[&GroundTruth], iou_thresh: f64) -> (Vec<bool>, usize) {
    let mut by_image: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
    for (g, gt) in gts.iter().enumerate() {
        by_image.entry(gt.image_id).or_default().push(g);
    }
    let mut used = vec![false; gts.len()];
    let mut matched = vec![false; dets.len()];
    let mut count = 0;
    for i in order_by_score(dets.iter().map(|d| d.score)) {
        let Some(cands) = by_image.get(&dets[i].image_id) else {
            continue;
        };
        let mut best: Option<(usize, f64)> = None;
        for &g in cands {
            if used[g] {
                continue;
            }
            let v = iou(&dets[i].bbox, &gts[g].bbox);
            if v >= iou_thresh && best.is_none_or(|(_, bv)| v > bv) {
                best = Some((g, v));
            }
        }
        if let Some((g, _)) = best {
            used[g] = true;
            matched[i] = true;
            count += 1;
        }
    }
    (matched, count)
}

/// All-point-interpolated area under the precision/recall curve for one
/// class. Callers pass only that class's detections and ground truth.
/// Returns 0 when there is no ground truth.
pub fn average_precision(dets: &[Detection], gts: &[GroundTruth], iou_thresh: f64) -> Result<f64> {
    check_scores(dets)?;
    if gts.is_empty() {
        return Ok(0.0);
    }
    let d: Vec<&Detection> = dets.iter().collect();
    let g: Vec<&GroundTruth> = gts.iter().collect();
    let (matched, _) = greedy_match(&d, &g, iou_thresh);
    let order = order_by_score(dets.iter().map(|d| d.score));
    let mut precision = Vec::with_capacity(order.len());
    let mut recall = Vec::with_capacity(order.len());
    let mut tp = 0usize;
    for (rank, &i) in order.iter().enumerate() {
        if matched[i] {
            tp += 1;
        }
        precision.push(tp as f64 / (rank + 1) as f64);
        recall.push(tp as f64 / gts.len() as f64);
    }
    // precision envelope, right to left
    for k in (0..precision.len().saturating_sub(1)).rev() {
        precision[k] = precision[k].max(precision[k + 1]);
    }
    let mut ap = 0.0;
    let mut prev_r = 0.0;
    for (p, r) in precision.iter().zip(&recall) {
        ap += (r - prev_r) * p;
        prev_r = *r;
    }
    Ok(ap)
}

fn unknown_gts(gts: &[GroundTruth]) -> Vec<&GroundTruth> {
    gts.iter().filter(|g| g.is_unknown).collect()
}

/// Fraction of unknown ground truth matched by unknown detections scoring
/// strictly above `score_thresh`.
pub fn u_recall(dets: &[Detection], gts: &[GroundTruth], score_thresh: f64, iou_thresh: f64) -> Result<f64> {
    check_scores(dets)?;
    let ug = unknown_gts(gts);
    if ug.is_empty() {
        return Ok(0.0);
    }
    let ud: Vec<&Detection> = dets
        .iter()
        .filter(|d| d.is_unknown() && d.score > score_thresh)
        .collect();
    Ok(greedy_match(&ud, &ug, iou_thresh).1 as f64 / ug.len() as f64)
}

/// Unknown recall when each image keeps only its `k` best unknown detections.
pub fn recall_at_k(dets: &[Detection], gts: &[GroundTruth], k: usize, iou_thresh: f64) -> Result<f64> {
    check_scores(dets)?;
    if k == 0 {
        return Err(Error::Invalid("k must be >= 1".into()));
    }
    let ug = unknown_gts(gts);
    if ug.is_empty() {
        return Ok(0.0);
    }
    let ud: Vec<&Detection> = dets.iter().filter(|d| d.is_unknown()).collect();
    let mut per_image: BTreeMap<u64, usize> = BTreeMap::new();
    let mut kept = Vec::new();
    for i in order_by_score(ud.iter().map(|d| d.score)) {
        let n = per_image.entry(ud[i].image_id).or_default();
        if *n < k {
            *n += 1;
            kept.push(ud[i]);
        }
    }
    Ok(greedy_match(&kept, &ug, iou_thresh).1 as f64 / ug.len() as f64)
}

/// Unknown objects claimed by known-class detections: in score order, a
/// known-class detection counts when its best-IoU ground truth (ties to the
/// lower index) is unknown, overlaps by at least `iou_thresh`, and has not
/// been counted yet.
pub fn a_ose(dets: &[Detection], gts: &[GroundTruth], iou_thresh: f64) -> Result<usize> {
    check_scores(dets)?;
    let mut by_image: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
    for (g, gt) in gts.iter().enumerate() {
        by_image.entry(gt.image_id).or_default().push(g);
    }
    let kd: Vec<&Detection> = dets.iter().filter(|d| !d.is_unknown()).collect();
    let mut counted = vec![false; gts.len()];
    let mut total = 0;
    for i in order_by_score(kd.iter().map(|d| d.score)) {
        let Some(cands) = by_image.get(&kd[i].image_id) else {
            continue;
        };
        let mut best: Option<(usize, f64)> = None;
        for &g in cands {
            let v = iou(&kd[i].bbox, &gts[g].bbox);
            if best.is_none_or(|(_, bv)| v > bv) {
                best = Some((g, v));
            }
        }
        if let Some((g, v)) = best {
            if gts[g].is_unknown && v >= iou_thresh && !counted[g] {
                counted[g] = true;
                total += 1;
            }
        }
    }
    Ok(total)
}

/// `a_ose / (tp_known + fp_known)`.
pub fn wilderness_impact(a_ose: usize, tp_known: usize, fp_known: usize) -> Result<f64> {
    let denom = tp_known + fp_known;
    if denom == 0 {
        return Err(Error::Invalid("wilderness impact needs at least one known-class detection".into()));
    }
    Ok(a_ose as f64 / denom as f64)
}

/// True and false positives among known-class detections, matched per class.
pub fn known_tp_fp(dets: &[Detection], gts: &[GroundTruth], iou_thresh: f64) -> (usize, usize) {
    let classes: BTreeSet<&str> = dets
        .iter()
        .filter(|d| !d.is_unknown())
        .map(|d| d.class_label.as_str())
        .collect();
    let (mut tp, mut fp) = (0, 0);
    for c in classes {
        let d: Vec<&Detection> = dets.iter().filter(|d| d.class_label == c).collect();
        let g: Vec<&GroundTruth> = gts.iter().filter(|g| g.class_label == c).collect();
        let m = greedy_match(&d, &g, iou_thresh).1;
        tp += m;
        fp += d.len() - m;
    }
    (tp, fp)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub iou_thresh: f64,
    pub u_recall_score_thresh: f64,
    pub recall_ks: Vec<usize>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            iou_thresh: 0.5,
            u_recall_score_thresh: 0.05,
            recall_ks: vec![10, 30, 100],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub task_id: u32,
    pub per_class_ap: BTreeMap<String, f64>,
    pub map_previously_known: f64,
    pub map_current_known: f64,
    pub map_both: f64,
    pub u_recall: f64,
    /// Keyed `R@<k>`.
    pub recall_at_k: BTreeMap<String, f64>,
    pub a_ose: usize,
    /// 0 when there are no known-class detections.
    pub wilderness_impact: f64,
    pub tp_known: usize,
    pub fp_known: usize,
    pub num_detections: usize,
    pub num_known_gt: usize,
    pub num_unknown_gt: usize,
}

/// Mean AP over `classes` that have ground truth; 0 when none do.
fn mean_ap(per_class: &BTreeMap<String, f64>, classes: &BTreeSet<String>, with_gt: &BTreeSet<&str>) -> f64 {
    let aps: Vec<f64> = classes
        .iter()
        .filter(|c| with_gt.contains(c.as_str()))
        .map(|c| per_class[c])
        .collect();
    if aps.is_empty() {
        0.0
    } else {
        aps.iter().sum::<f64>() / aps.len() as f64
    }
}

pub fn evaluate_task(
    dets: &[Detection],
    gts: &[GroundTruth],
    split: &TaskSplit,
    cfg: &EvalConfig,
) -> Result<MetricsReport> {
    split.validate()?;
    check_scores(dets)?;
    let known = split.known();
    for d in dets {
        if !d.is_unknown() && !known.contains(&d.class_label) {
            return Err(Error::Invalid(format!("detection class {:?} is not in the task split", d.class_label)));
        }
    }
    for g in gts {
        if g.is_unknown != split.is_unknown(&g.class_label) || (!g.is_unknown && !known.contains(&g.class_label)) {
            return Err(Error::Invalid(format!(
                "ground-truth class {:?} is inconsistent with the task split",
                g.class_label
            )));
        }
    }
    let mut per_class_ap = BTreeMap::new();
    for c in &known {
        let d: Vec<Detection> = dets.iter().filter(|d| &d.class_label == c).cloned().collect();
        let g: Vec<GroundTruth> = gts.iter().filter(|g| &g.class_label == c).cloned().collect();
        per_class_ap.insert(c.clone(), average_precision(&d, &g, cfg.iou_thresh)?);
    }
    let with_gt: BTreeSet<&str> = gts.iter().map(|g| g.class_label.as_str()).collect();
    let recall_at_k = cfg
        .recall_ks
        .iter()
        .map(|&k| Ok((format!("R@{k}"), recall_at_k(dets, gts, k, cfg.iou_thresh)?)))
        .collect::<Result<_>>()?;
    let a = a_ose(dets, gts, cfg.iou_thresh)?;
    let (tp, fp) = known_tp_fp(dets, gts, cfg.iou_thresh);
    Ok(MetricsReport {
        task_id: split.task_id,
        map_previously_known: mean_ap(&per_class_ap, &split.previously_known, &with_gt),
        map_current_known: mean_ap(&per_class_ap, &split.current_known, &with_gt),
        map_both: mean_ap(&per_class_ap, &known, &with_gt),
        per_class_ap,
        u_recall: u_recall(dets, gts, cfg.u_recall_score_thresh, cfg.iou_thresh)?,
        recall_at_k,
        a_ose: a,
        wilderness_impact: if tp + fp == 0 { 0.0 } else { wilderness_impact(a, tp, fp)? },
        tp_known: tp,
        fp_known: fp,
        num_detections: dets.len(),
        num_known_gt: gts.iter().filter(|g| !g.is_unknown).count(),
        num_unknown_gt: gts.iter().filter(|g| g.is_unknown).count(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CocoImage {
    pub id: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file_name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CocoAnnotation {
    pub id: u64,
    pub image_id: u64,
    pub category_id: u64,
    pub bbox: BBox,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub area: Option<f64>,
    #[serde(default)]
    pub iscrowd: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CocoCategory {
    pub id: u64,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CocoDataset {
    pub images: Vec<CocoImage>,
    pub annotations: Vec<CocoAnnotation>,
    pub categories: Vec<CocoCategory>,
}

/// One entry of a standard COCO results array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CocoResult {
    pub image_id: u64,
    pub category_id: u64,
    pub bbox: BBox,
    pub score: f64,
}

/// Category id reserved for unknown detections when the dataset does not
/// name an `"unknown"` category.
pub const UNKNOWN_CATEGORY_ID: u64 = 0;

impl CocoDataset {
    pub fn category_name(&self, id: u64) -> Option<&str> {
        self.categories.iter().find(|c| c.id == id).map(|c| c.name.as_str())
    }

    pub fn unknown_category_id(&self) -> u64 {
        self.categories
            .iter()
            .find(|c| c.name == UNKNOWN)
            .map_or(UNKNOWN_CATEGORY_ID, |c| c.id)
    }

    pub fn category_id(&self, name: &str) -> Option<u64> {
        if name == UNKNOWN {
            return Some(self.unknown_category_id());
        }
        self.categories.iter().find(|c| c.name == name).map(|c| c.id)
    }

    pub fn ground_truth(&self, split: &TaskSplit) -> Result<Vec<GroundTruth>> {
        let images: BTreeSet<u64> = self.images.iter().map(|i| i.id).collect();
        self.annotations
            .iter()
            .map(|a| {
                if !images.contains(&a.image_id) {
                    return Err(Error::Invalid(format!("annotation {} refers to unknown image {}", a.id, a.image_id)));
                }
                let name = self
                    .category_name(a.category_id)
                    .ok_or_else(|| Error::Invalid(format!("annotation {} has unknown category {}", a.id, a.category_id)))?;
                Ok(GroundTruth::new(a.image_id, a.bbox, name, split))
            })
            .collect()
    }

    pub fn detections(&self, results: &[CocoResult]) -> Result<Vec<Detection>> {
        let unk = self.unknown_category_id();
        results
            .iter()
            .map(|r| {
                let class_label = if r.category_id == unk {
                    UNKNOWN.to_string()
                } else {
                    self.category_name(r.category_id)
                        .ok_or_else(|| Error::Invalid(format!("result has unknown category {}", r.category_id)))?
                        .to_string()
                };
                Ok(Detection {
                    image_id: r.image_id,
                    bbox: r.bbox,
                    class_label,
                    score: r.score,
                })
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bx(x: f64, y: f64, w: f64, h: f64) -> BBox {
        BBox::new(x, y, w, h).unwrap()
    }

    fn det(img: u64, b: BBox, class: &str, score: f64) -> Detection {
        Detection {
            image_id: img,
            bbox: b,
            class_label: class.into(),
            score,
        }
    }

    fn gt(img: u64, b: BBox, class: &str, unknown: bool) -> GroundTruth {
        GroundTruth {
            image_id: img,
            bbox: b,
            class_label: class.into(),
            is_unknown: unknown,
        }
    }

    #[test]
    fn ap_examples() {
        let g = bx(0.0, 0.0, 10.0, 10.0);
        assert_eq!(average_precision(&[det(1, g, "a", 0.9)], &[gt(1, g, "a", false)], 0.5).unwrap(), 1.0);
        let far = bx(50.0, 50.0, 10.0, 10.0);
        assert_eq!(average_precision(&[det(1, far, "a", 0.9)], &[gt(1, g, "a", false)], 0.5).unwrap(), 0.0);
        let g2 = bx(100.0, 0.0, 10.0, 10.0);
        let dets = [det(1, g, "a", 0.9), det(1, far, "a", 0.8), det(1, g2, "a", 0.7)];
        let ap = average_precision(&dets, &[gt(1, g, "a", false), gt(1, g2, "a", false)], 0.5).unwrap();
        assert!((ap - (0.5 + 0.5 * 2.0 / 3.0)).abs() < 1e-12);
    }

    #[test]
    fn u_recall_examples() {
        let (g1, g2) = (bx(0.0, 0.0, 10.0, 10.0), bx(50.0, 0.0, 10.0, 10.0));
        let gts = [gt(1, g1, "kite", true), gt(1, g2, "kite", true)];
        assert_eq!(u_recall(&[det(1, g1, UNKNOWN, 0.5)], &gts, 0.05, 0.5).unwrap(), 0.5);
        assert_eq!(u_recall(&[det(1, g1, UNKNOWN, 0.04)], &gts, 0.05, 0.5).unwrap(), 0.0);
        // one detection cannot cover two ground-truth boxes
        let dup = [gt(1, g1, "kite", true), gt(1, g1, "kite", true)];
        assert_eq!(u_recall(&[det(1, g1, UNKNOWN, 0.5)], &dup, 0.05, 0.5).unwrap(), 0.5);
    }

    #[test]
    fn recall_at_k_truncates() {
        let (g1, g2) = (bx(0.0, 0.0, 10.0, 10.0), bx(50.0, 0.0, 10.0, 10.0));
        let gts = [gt(1, g1, "kite", true), gt(1, g2, "kite", true)];
        let dets = [det(1, g1, UNKNOWN, 0.9), det(1, g2, UNKNOWN, 0.8)];
        assert_eq!(recall_at_k(&dets, &gts, 1, 0.5).unwrap(), 0.5);
        assert_eq!(recall_at_k(&dets, &gts, 2, 0.5).unwrap(), 1.0);
        assert!(recall_at_k(&dets, &gts, 0, 0.5).is_err());
    }

    #[test]
    fn a_ose_examples() {
        let g = bx(0.0, 0.0, 10.0, 10.0);
        let gts = [gt(1, g, "kite", true)];
        assert_eq!(a_ose(&[det(1, g, UNKNOWN, 0.9)], &gts, 0.5).unwrap(), 0);
        assert_eq!(a_ose(&[det(1, g, "cat", 0.9)], &gts, 0.5).unwrap(), 1);
        assert_eq!(a_ose(&[det(1, g, "cat", 0.9), det(1, g, "dog", 0.8)], &gts, 0.5).unwrap(), 1);
    }

    #[test]
    fn wi_examples() {
        assert_eq!(wilderness_impact(10, 40, 10).unwrap(), 0.2);
        assert_eq!(wilderness_impact(0, 3, 1).unwrap(), 0.0);
        assert!(wilderness_impact(1, 0, 0).is_err());
    }

    fn split() -> TaskSplit {
        TaskSplit {
            task_id: 2,
            previously_known: ["cat".to_string()].into(),
            current_known: ["dog".to_string()].into(),
            unknown: ["kite".to_string()].into(),
        }
    }

    #[test]
    fn empty_detections_report() {
        let gts = [gt(1, bx(0.0, 0.0, 10.0, 10.0), "cat", false), gt(1, bx(20.0, 0.0, 10.0, 10.0), "kite", true)];
        let r = evaluate_task(&[], &gts, &split(), &EvalConfig::default()).unwrap();
        assert_eq!(r.map_both, 0.0);
        assert_eq!(r.u_recall, 0.0);
        assert_eq!(r.wilderness_impact, 0.0);
        assert_eq!(r.recall_at_k["R@100"], 0.0);
    }

    #[test]
    fn perfect_detector_report() {
        let gts = [
            gt(1, bx(0.0, 0.0, 10.0, 10.0), "cat", false),
            gt(1, bx(20.0, 0.0, 10.0, 10.0), "dog", false),
            gt(2, bx(0.0, 0.0, 30.0, 30.0), "kite", true),
        ];
        let dets: Vec<Detection> = gts
            .iter()
            .map(|g| det(g.image_id, g.bbox, if g.is_unknown { UNKNOWN } else { &g.class_label }, 1.0))
            .collect();
        let r = evaluate_task(&dets, &gts, &split(), &EvalConfig::default()).unwrap();
        assert_eq!(r.map_both, 1.0);
        assert_eq!(r.map_previously_known, 1.0);
        assert_eq!(r.map_current_known, 1.0);
        assert_eq!(r.u_recall, 1.0);
        assert_eq!(r.a_ose, 0);
        assert_eq!(r.wilderness_impact, 0.0);
    }

    #[test]
    fn split_validation() {
        let mut s = split();
        s.unknown.insert("cat".into());
        assert!(s.validate().is_err());
        let mut s = split();
        s.current_known.insert(UNKNOWN.into());
        assert!(s.validate().is_err());
        let d = [det(1, bx(0.0, 0.0, 5.0, 5.0), "zebra", 0.5)];
        assert!(evaluate_task(&d, &[], &split(), &EvalConfig::default()).is_err());
    }

    #[test]
    fn coco_ingest() {
        let ds: CocoDataset = serde_json::from_str(
            r#"{"images":[{"id":1}],
                "annotations":[{"id":1,"image_id":1,"category_id":3,"bbox":[0,0,10,10]},
                               {"id":2,"image_id":1,"category_id":9,"bbox":[20,0,10,10]}],
                "categories":[{"id":3,"name":"cat"},{"id":9,"name":"kite"}]}"#,
        )
        .unwrap();
        let g = ds.ground_truth(&split()).unwrap();
        assert!(!g[0].is_unknown && g[1].is_unknown);
        let res: Vec<CocoResult> =
            serde_json::from_str(r#"[{"image_id":1,"category_id":0,"bbox":[20,0,10,10],"score":0.7}]"#).unwrap();
        assert_eq!(ds.detections(&res).unwrap()[0].class_label, UNKNOWN);
        let bad: Vec<CocoResult> =
            serde_json::from_str(r#"[{"image_id":1,"category_id":42,"bbox":[20,0,10,10],"score":0.7}]"#).unwrap();
        assert!(ds.detections(&bad).is_err());
    }
}
