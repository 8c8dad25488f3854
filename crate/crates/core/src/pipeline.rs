//! Pseudo-label processing and classification-free self-training.
//!
//! Raw proposals are cleaned by NMS and three geometric rules, weighted by
//! their reconstruction-error soft labels, and extended by a linear
//! localization-quality scorer that only ever trains on positive proposals.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::feature::{ErrorMap, Level};
use crate::geometry::{self, iou, order_by_score, BBox, ScoredBox};
use crate::rew::RewModel;
use crate::rng::Rng;
use crate::softlabel::{pooled_error, roi_align, route_level, SoftLabeledProposal};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterConfig {
    pub nms_iou: f64,
    /// Boxes must be strictly larger than this many square pixels.
    pub min_area: f64,
    pub aspect_min: f64,
    pub aspect_max: f64,
    /// Boxes must have IoU strictly below this with every known box.
    pub max_known_iou: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            nms_iou: 0.3,
            min_area: 2000.0,
            aspect_min: 0.25,
            aspect_max: 4.0,
            max_known_iou: 0.3,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::Invalid(format!("{name} must be in [0, 1], got {v}")))
            }
        };
        unit("nms_iou", self.nms_iou)?;
        unit("max_known_iou", self.max_known_iou)?;
        if !(self.min_area >= 0.0) {
            return Err(Error::Invalid("min_area must be >= 0".into()));
        }
        if !(self.aspect_min > 0.0 && self.aspect_min < self.aspect_max) {
            return Err(Error::Invalid(format!(
                "need 0 < aspect_min < aspect_max, got {} / {}",
                self.aspect_min, self.aspect_max
            )));
        }
        Ok(())
    }

    /// The three geometric rules, without NMS.
    pub fn accepts(&self, b: &BBox, known: &[BBox]) -> bool {
        let ar = b.aspect_ratio();
        b.area() > self.min_area
            && ar >= self.aspect_min
            && ar <= self.aspect_max
            && known.iter().all(|k| iou(b, k) < self.max_known_iou)
    }
}

/// Indices of `raw` that survive NMS and the geometric rules, in score order.
pub fn filter_indices(raw: &[ScoredBox], known: &[BBox], cfg: &FilterConfig) -> Vec<usize> {
    geometry::nms_indices(raw, cfg.nms_iou)
        .into_iter()
        .filter(|&i| cfg.accepts(&raw[i].bbox, known))
        .collect()
}

/// NMS at `cfg.nms_iou`, then drop boxes that are too small, too elongated,
/// or overlap a known box.
pub fn filter_proposals(raw: &[ScoredBox], known: &[BBox], cfg: &FilterConfig) -> Vec<ScoredBox> {
    filter_indices(raw, known, cfg)
        .into_iter()
        .map(|i| raw[i])
        .collect()
}

/// Weighted cross-entropy: `(1/N) Σ w_i · (−ln p_i[target_i])`.
///
/// `probs[i]` is the predicted class distribution of proposal `i`.
pub fn weighted_classification_loss(probs: &[Vec<f64>], targets: &[usize], weights: &[f64]) -> Result<f64> {
    if probs.is_empty() {
        return Err(Error::Invalid("classification loss over zero proposals".into()));
    }
    if probs.len() != targets.len() || probs.len() != weights.len() {
        return Err(Error::Dimension(format!(
            "{} probability rows, {} targets, {} weights",
            probs.len(),
            targets.len(),
            weights.len()
        )));
    }
    let mut total = 0.0;
    for ((p, &t), &w) in probs.iter().zip(targets).zip(weights) {
        let pt = *p
            .get(t)
            .ok_or_else(|| Error::Dimension(format!("target class {t} out of {} classes", p.len())))?;
        if !(pt > 0.0 && pt <= 1.0) {
            return Err(Error::Invalid(format!("target probability {pt} outside (0, 1]")));
        }
        if !(0.0..=1.0).contains(&w) {
            return Err(Error::Invalid(format!("weight {w} outside [0, 1]")));
        }
        total += w * -pt.ln();
    }
    Ok(total / probs.len() as f64)
}

/// Weighted l1 loss: `(1/N) Σ w_i · |q_i − q*_i|`.
pub fn weighted_localization_loss(pred: &[f64], target: &[f64], weights: &[f64]) -> Result<f64> {
    if pred.is_empty() {
        return Err(Error::Invalid("localization loss over zero proposals".into()));
    }
    if pred.len() != target.len() || pred.len() != weights.len() {
        return Err(Error::Dimension(format!(
            "{} predictions, {} targets, {} weights",
            pred.len(),
            target.len(),
            weights.len()
        )));
    }
    Ok(pred
        .iter()
        .zip(target)
        .zip(weights)
        .map(|((q, t), w)| w * (q - t).abs())
        .sum::<f64>()
        / pred.len() as f64)
}

/// Positive match of a proposal to a ground-truth box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocTarget {
    /// IoU with the matched box, used as the quality target.
    pub target: f64,
    pub gt_index: usize,
}

/// Proposals whose best IoU exceeds `positive_iou` are positives with the
/// IoU as target; all others are left unsampled (`None`). Ties between
/// ground-truth boxes go to the lower index.
pub fn assign_localization_targets(
    proposals: &[BBox],
    gt_boxes: &[BBox],
    positive_iou: f64,
) -> Result<Vec<Option<LocTarget>>> {
    if !(positive_iou > 0.0 && positive_iou < 1.0) {
        return Err(Error::Invalid(format!("positive_iou must be in (0, 1), got {positive_iou}")));
    }
    Ok(proposals
        .iter()
        .map(|p| {
            let mut best: Option<LocTarget> = None;
            for (gi, g) in gt_boxes.iter().enumerate() {
                let v = iou(p, g);
                if best.is_none_or(|b| v > b.target) {
                    best = Some(LocTarget { target: v, gt_index: gi });
                }
            }
            best.filter(|b| b.target > positive_iou)
        })
        .collect())
}

/// Number of inner RoIAlign bins per side in a proposal descriptor.
pub const DESCRIPTOR_BINS: usize = 3;
/// Inner bins, four context strips, and their means.
pub const DESCRIPTOR_DIM: usize = DESCRIPTOR_BINS * DESCRIPTOR_BINS + 4;

/// Error-map descriptor of a box at its routed level.
///
/// Holds a 3x3 RoIAlign of the box interior followed by the pooled error
/// of four strips just outside its left, right, top and bottom edges (each
/// a quarter of the box deep). Every value `e` is mapped to
/// `ln(1 + e / m)` where `m` is the median of the level's background model.
pub fn proposal_descriptor(rew: &RewModel, error_maps: &[ErrorMap], b: &BBox) -> Result<Vec<f64>> {
    let level = route_level(b, &rew.size_ranges)?;
    let map = error_maps
        .iter()
        .find(|e| e.level() == level)
        .ok_or(Error::MissingLevel(level))?;
    let scale = rew
        .pair(level)
        .ok_or(Error::MissingLevel(level))?
        .bg
        .median()
        .max(f64::MIN_POSITIVE);
    let stride = level.stride();
    let mut out = roi_align(map, b, stride, DESCRIPTOR_BINS, 2)?;
    let (dw, dh) = (0.25 * b.w, 0.25 * b.h);
    let strips = [
        BBox::new(b.x - dw, b.y, dw, b.h)?,
        BBox::new(b.x2(), b.y, dw, b.h)?,
        BBox::new(b.x, b.y - dh, b.w, dh)?,
        BBox::new(b.x, b.y2(), b.w, dh)?,
    ];
    for s in &strips {
        // strips past the map edge read the border cells
        out.push(pooled_error(map, &clamp_into(s, map, stride), stride)?);
    }
    Ok(out.into_iter().map(|e| (e / scale).ln_1p()).collect())
}

fn clamp_into(b: &BBox, map: &ErrorMap, stride: u32) -> BBox {
    let (w, h) = (
        (map.width() as u32 * stride) as f64,
        (map.height() as u32 * stride) as f64,
    );
    let x1 = b.x.clamp(0.0, w - 1.0);
    let y1 = b.y.clamp(0.0, h - 1.0);
    let x2 = b.x2().clamp(x1 + 1.0, w);
    let y2 = b.y2().clamp(y1 + 1.0, h);
    BBox {
        x: x1,
        y: y1,
        w: x2 - x1,
        h: y2 - y1,
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// One linear head followed by a logistic squashing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearHead {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LinearHead {
    pub fn zeros(dim: usize) -> Self {
        Self {
            weights: vec![0.0; dim],
            bias: 0.0,
        }
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        sigmoid(self.bias + self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>())
    }
}

/// Linear stand-in for the detector's proposal heads: an unknown-vs-background
/// classification head and a localization-quality head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProposalScorer {
    pub classification: LinearHead,
    pub localization: LinearHead,
}

impl ProposalScorer {
    pub fn new(dim: usize) -> Self {
        Self {
            classification: LinearHead::zeros(dim),
            localization: LinearHead::zeros(dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.localization.weights.len()
    }

    pub fn quality(&self, x: &[f64]) -> f64 {
        self.localization.predict(x)
    }

    pub fn objectness(&self, x: &[f64]) -> f64 {
        self.classification.predict(x)
    }
}

/// Training example for the scorer.
#[derive(Debug, Clone, PartialEq)]
pub struct ScorerSample {
    pub features: Vec<f64>,
    /// Quality target for positives; `None` leaves the localization head untouched.
    pub loc_target: Option<f64>,
    /// Object (true) or background (false); `None` skips the classification head.
    pub cls_target: Option<bool>,
    /// Soft label for pseudo-labelled matches, 1 otherwise.
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScorerTrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
}

impl Default for ScorerTrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.5,
            epochs: 300,
        }
    }
}

/// Weighted localization loss of the scorer and its gradient with respect
/// to `(weights, bias)` of the localization head.
pub fn localization_loss_and_grad(scorer: &ProposalScorer, samples: &[ScorerSample]) -> (f64, Vec<f64>) {
    let head = &scorer.localization;
    let dim = head.weights.len();
    let mut grad = vec![0.0; dim + 1];
    let mut loss = 0.0;
    let pos: Vec<(&ScorerSample, f64)> = samples
        .iter()
        .filter_map(|s| s.loc_target.map(|t| (s, t)))
        .collect();
    if pos.is_empty() {
        return (0.0, grad);
    }
    let n = pos.len() as f64;
    for (s, t) in pos {
        let q = head.predict(&s.features);
        loss += s.weight * (q - t).abs();
        let d = s.weight * (q - t).signum() * q * (1.0 - q) / n;
        for (g, x) in grad.iter_mut().zip(&s.features) {
            *g += d * x;
        }
        grad[dim] += d;
    }
    (loss / n, grad)
}

/// Weighted binary cross-entropy of the classification head and its gradient.
pub fn classification_loss_and_grad(scorer: &ProposalScorer, samples: &[ScorerSample]) -> (f64, Vec<f64>) {
    let head = &scorer.classification;
    let dim = head.weights.len();
    let mut grad = vec![0.0; dim + 1];
    let mut loss = 0.0;
    let labelled: Vec<(&ScorerSample, bool)> = samples
        .iter()
        .filter_map(|s| s.cls_target.map(|t| (s, t)))
        .collect();
    if labelled.is_empty() {
        return (0.0, grad);
    }
    let n = labelled.len() as f64;
    for (s, y) in labelled {
        let p = head.predict(&s.features).clamp(1e-15, 1.0 - 1e-15);
        let pt = if y { p } else { 1.0 - p };
        loss += s.weight * -pt.ln();
        let d = s.weight * (p - if y { 1.0 } else { 0.0 }) / n;
        for (g, x) in grad.iter_mut().zip(&s.features) {
            *g += d * x;
        }
        grad[dim] += d;
    }
    (loss / n, grad)
}

fn step(head: &mut LinearHead, grad: &[f64], lr: f64) {
    let dim = head.weights.len();
    for (w, g) in head.weights.iter_mut().zip(grad) {
        *w -= lr * g;
    }
    head.bias -= lr * grad[dim];
}

/// Full-batch gradient descent on both heads. Each head returns the
/// iterate with the lowest training loss seen, so the final loss never
/// exceeds the initial one.
pub fn train_scorer(
    scorer: &ProposalScorer,
    samples: &[ScorerSample],
    cfg: &ScorerTrainConfig,
) -> Result<ProposalScorer> {
    let dim = scorer.dim();
    if scorer.classification.weights.len() != dim {
        return Err(Error::Dimension("scorer heads disagree on dimension".into()));
    }
    if let Some(s) = samples.iter().find(|s| s.features.len() != dim) {
        return Err(Error::Dimension(format!(
            "sample has {} features, scorer expects {dim}",
            s.features.len()
        )));
    }
    if let Some(s) = samples.iter().find(|s| !(0.0..=1.0).contains(&s.weight)) {
        return Err(Error::Invalid(format!("sample weight {} outside [0, 1]", s.weight)));
    }
    if !(cfg.learning_rate > 0.0) {
        return Err(Error::Invalid("scorer learning_rate must be > 0".into()));
    }
    let mut current = scorer.clone();
    let mut best_loc = (localization_loss_and_grad(&current, samples).0, current.localization.clone());
    let mut best_cls = (classification_loss_and_grad(&current, samples).0, current.classification.clone());
    for _ in 0..cfg.epochs {
        let (_, gl) = localization_loss_and_grad(&current, samples);
        step(&mut current.localization, &gl, cfg.learning_rate);
        let (_, gc) = classification_loss_and_grad(&current, samples);
        step(&mut current.classification, &gc, cfg.learning_rate);
        let ll = localization_loss_and_grad(&current, samples).0;
        if ll < best_loc.0 {
            best_loc = (ll, current.localization.clone());
        }
        let lc = classification_loss_and_grad(&current, samples).0;
        if lc < best_cls.0 {
            best_cls = (lc, current.classification.clone());
        }
    }
    Ok(ProposalScorer {
        classification: best_cls.1,
        localization: best_loc.1,
    })
}

/// `max(1, floor(N · P / 100))` highest-scoring entries, score-descending,
/// ties broken by input index.
pub fn select_top_percent(scored: &[ScoredBox], top_percent: f64) -> Result<Vec<ScoredBox>> {
    Ok(select_top_percent_indices(scored, top_percent)?
        .into_iter()
        .map(|i| scored[i])
        .collect())
}

pub fn select_top_percent_indices(scored: &[ScoredBox], top_percent: f64) -> Result<Vec<usize>> {
    if !(top_percent > 0.0 && top_percent <= 100.0) {
        return Err(Error::Invalid(format!("top percent must be in (0, 100], got {top_percent}")));
    }
    if scored.is_empty() {
        return Ok(Vec::new());
    }
    let keep = ((scored.len() as f64 * top_percent / 100.0).floor() as usize).max(1);
    let mut order = order_by_score(scored.iter().map(|s| s.score));
    order.truncate(keep);
    Ok(order)
}

/// Where a pseudo label came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Provenance {
    Generator,
    Round(usize),
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Provenance::Generator => write!(f, "generator"),
            Provenance::Round(k) => write!(f, "round-{k}"),
        }
    }
}

impl FromStr for Provenance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "generator" {
            return Ok(Provenance::Generator);
        }
        s.strip_prefix("round-")
            .and_then(|k| k.parse().ok())
            .map(Provenance::Round)
            .ok_or_else(|| Error::Invalid(format!("unknown provenance {s:?}")))
    }
}

impl Serialize for Provenance {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Provenance {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// One accepted unknown pseudo label; one JSON-lines record on disk.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PseudoLabel {
    pub image_id: u64,
    #[serde(flatten)]
    pub proposal: SoftLabeledProposal,
    /// Generator score, or scorer quality for self-trained labels.
    pub score: f64,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PseudoLabelSet {
    pub labels: Vec<PseudoLabel>,
}

impl PseudoLabelSet {
    pub fn for_image(&self, image_id: u64) -> impl Iterator<Item = &PseudoLabel> {
        self.labels.iter().filter(move |l| l.image_id == image_id)
    }

    pub fn boxes_for(&self, image_id: u64) -> Vec<BBox> {
        self.for_image(image_id).map(|l| l.proposal.bbox).collect()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Checks the set-level invariants against `known` annotations.
    pub fn audit(&self, known: &BTreeMap<u64, Vec<BBox>>, cfg: &FilterConfig) -> Result<()> {
        let ids: BTreeSet<u64> = self.labels.iter().map(|l| l.image_id).collect();
        let empty = Vec::new();
        for id in ids {
            let labels: Vec<&PseudoLabel> = self.for_image(id).collect();
            let kn = known.get(&id).unwrap_or(&empty);
            for (i, a) in labels.iter().enumerate() {
                if !cfg.accepts(&a.proposal.bbox, kn) {
                    return Err(Error::Invalid(format!(
                        "image {id}: label {:?} fails the filter rules",
                        a.proposal.bbox.to_array()
                    )));
                }
                if !(0.0..=1.0).contains(&a.proposal.soft_label) {
                    return Err(Error::Invalid(format!("image {id}: soft label out of range")));
                }
                for b in &labels[i + 1..] {
                    if iou(&a.proposal.bbox, &b.proposal.bbox) > cfg.nms_iou {
                        return Err(Error::Invalid(format!(
                            "image {id}: labels overlap above the NMS threshold"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Soft-labeled proposal with the generator's confidence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredProposal {
    pub image_id: u64,
    #[serde(flatten)]
    pub proposal: SoftLabeledProposal,
    #[serde(default = "default_score")]
    pub score: f64,
}

fn default_score() -> f64 {
    1.0
}

/// Applies [`filter_proposals`] per image (ranking by generator score) and
/// tags the survivors as generator labels.
pub fn initial_labels(
    proposals: &[ScoredProposal],
    known: &BTreeMap<u64, Vec<BBox>>,
    cfg: &FilterConfig,
) -> Result<PseudoLabelSet> {
    cfg.validate()?;
    let mut by_image: BTreeMap<u64, Vec<&ScoredProposal>> = BTreeMap::new();
    for p in proposals {
        by_image.entry(p.image_id).or_default().push(p);
    }
    let empty = Vec::new();
    let mut labels = Vec::new();
    for (id, props) in by_image {
        let scored: Vec<ScoredBox> = props
            .iter()
            .map(|p| ScoredBox::new(p.proposal.bbox, p.score))
            .collect::<Result<_>>()?;
        for i in filter_indices(&scored, known.get(&id).unwrap_or(&empty), cfg) {
            labels.push(PseudoLabel {
                image_id: id,
                proposal: props[i].proposal,
                score: props[i].score,
                provenance: Provenance::Generator,
            });
        }
    }
    Ok(PseudoLabelSet { labels })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelfTrainConfig {
    /// Percentage of scored proposals kept per image each round.
    pub top_percent: f64,
    pub iterations: usize,
    /// Proposals with IoU above this against a label are scorer positives.
    pub positive_iou: f64,
    /// Proposals with best IoU below this are classification negatives.
    pub negative_iou: f64,
    /// Class-agnostic proposals kept per image after NMS, before selection.
    pub max_proposals_per_image: usize,
    /// Filled from the run-level filter settings when loaded from a file.
    #[serde(skip)]
    pub filter: FilterConfig,
    pub scorer: ScorerTrainConfig,
    /// Background samples per positive for the classification head.
    pub negatives_per_positive: usize,
    pub seed: u64,
}

impl Default for SelfTrainConfig {
    fn default() -> Self {
        Self {
            top_percent: 30.0,
            iterations: 1,
            positive_iou: 0.3,
            negative_iou: 0.1,
            max_proposals_per_image: 100,
            filter: FilterConfig::default(),
            scorer: ScorerTrainConfig::default(),
            negatives_per_positive: 1,
            seed: 0,
        }
    }
}

impl SelfTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.top_percent > 0.0 && self.top_percent <= 100.0) {
            return Err(Error::Invalid(format!("top_percent must be in (0, 100], got {}", self.top_percent)));
        }
        if !(self.positive_iou > 0.0 && self.positive_iou < 1.0) {
            return Err(Error::Invalid("positive_iou must be in (0, 1)".into()));
        }
        if self.max_proposals_per_image == 0 {
            return Err(Error::Invalid("max_proposals_per_image must be >= 1".into()));
        }
        self.filter.validate()
    }
}

/// Everything self-training needs about one training image.
#[derive(Debug, Clone, PartialEq)]
pub struct SelfTrainImage {
    pub image_id: u64,
    pub width: f64,
    pub height: f64,
    pub error_maps: Vec<ErrorMap>,
    pub known: Vec<BBox>,
    /// Raw generator proposals, used as extra candidates.
    pub raw_proposals: Vec<BBox>,
}

/// Side lengths of the three candidate scales for the level whose band
/// starts at `32 · 2^k`: the band start times `2^(1/6)`, `2^(1/2)`, `2^(5/6)`.
pub fn candidate_sides(level: Level) -> [f64; 3] {
    let lo = 32.0 * (1u32 << level.index()) as f64;
    [1.0 / 6.0, 0.5, 5.0 / 6.0].map(|e| lo * 2f64.powf(e))
}

/// Sliding-window candidates: for each level, three scales times aspect
/// ratios {1/2, 1, 2} (area preserved), stepped by the level stride and
/// kept fully inside the image.
pub fn candidate_grid(levels: &[Level], width: f64, height: f64) -> Vec<BBox> {
    let mut out = Vec::new();
    for &level in levels {
        let step = level.stride() as f64;
        for side in candidate_sides(level) {
            for ar in [0.5f64, 1.0, 2.0] {
                let w = (side * ar.sqrt()).round();
                let h = (side / ar.sqrt()).round();
                if w > width || h > height {
                    continue;
                }
                let mut y = 0.0;
                while y + h <= height {
                    let mut x = 0.0;
                    while x + w <= width {
                        out.push(BBox { x, y, w, h });
                        x += step;
                    }
                    y += step;
                }
            }
        }
    }
    out
}

/// Per-round diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundReport {
    pub round: usize,
    pub positives: usize,
    pub negatives: usize,
    pub initial_loc_loss: f64,
    pub final_loc_loss: f64,
    pub added: usize,
    pub unscorable: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelfTrainReport {
    pub rounds: Vec<RoundReport>,
    /// Set when the loop ended before `iterations` rounds.
    pub stopped_early: Option<String>,
}

struct Candidates {
    boxes: Vec<BBox>,
    features: Vec<Vec<f64>>,
}

fn candidates_for(rew: &RewModel, img: &SelfTrainImage, levels: &[Level], unscorable: &mut usize) -> Candidates {
    let mut boxes = candidate_grid(levels, img.width, img.height);
    boxes.extend(img.raw_proposals.iter().copied());
    let mut kept = Vec::with_capacity(boxes.len());
    let mut features = Vec::with_capacity(boxes.len());
    for b in boxes {
        match proposal_descriptor(rew, &img.error_maps, &b) {
            Ok(f) => {
                kept.push(b);
                features.push(f);
            }
            Err(_) => *unscorable += 1,
        }
    }
    Candidates { boxes: kept, features }
}

/// Runs `cfg.iterations` rounds of: train the scorer on the current labels
/// (positives weighted by soft label), score every candidate, keep the top
/// `P%` of the post-NMS proposals, filter them against known boxes and
/// existing labels, soft-label the survivors and merge them.
pub fn self_train(
    initial: &PseudoLabelSet,
    scorer: &ProposalScorer,
    rew: &RewModel,
    images: &[SelfTrainImage],
    cfg: &SelfTrainConfig,
) -> Result<(PseudoLabelSet, ProposalScorer, SelfTrainReport)> {
    cfg.validate()?;
    if scorer.dim() != DESCRIPTOR_DIM {
        return Err(Error::Dimension(format!(
            "scorer has {} inputs, descriptors have {DESCRIPTOR_DIM}",
            scorer.dim()
        )));
    }
    let mut labels = initial.clone();
    let mut scorer = scorer.clone();
    let mut report = SelfTrainReport {
        rounds: Vec::new(),
        stopped_early: None,
    };
    if cfg.iterations == 0 {
        return Ok((labels, scorer, report));
    }
    let levels = rew.levels();
    let mut unscorable = 0;
    let cands: Vec<Candidates> = images
        .iter()
        .map(|img| candidates_for(rew, img, &levels, &mut unscorable))
        .collect();
    let mut rng = Rng::new(cfg.seed);

    for round in 1..=cfg.iterations {
        if cands.iter().all(|c| c.boxes.is_empty()) {
            report.stopped_early = Some(format!("round {round}: no scorable candidates"));
            break;
        }
        // training samples
        let mut samples = Vec::new();
        let (mut positives, mut negatives) = (0, 0);
        for (img, c) in images.iter().zip(&cands) {
            let mut gts: Vec<BBox> = img.known.clone();
            let mut weights = vec![1.0; gts.len()];
            for l in labels.for_image(img.image_id) {
                gts.push(l.proposal.bbox);
                weights.push(l.proposal.soft_label);
            }
            let targets = assign_localization_targets(&c.boxes, &gts, cfg.positive_iou)?;
            let mut background = Vec::new();
            for (k, t) in targets.iter().enumerate() {
                match t {
                    Some(t) => {
                        positives += 1;
                        samples.push(ScorerSample {
                            features: c.features[k].clone(),
                            loc_target: Some(t.target),
                            cls_target: Some(true),
                            weight: weights[t.gt_index],
                        });
                    }
                    None => {
                        let best = gts.iter().map(|g| iou(&c.boxes[k], g)).fold(0.0, f64::max);
                        if best < cfg.negative_iou {
                            background.push(k);
                        }
                    }
                }
            }
            let want = cfg.negatives_per_positive * targets.iter().filter(|t| t.is_some()).count();
            for k in rng.sample_indices(background.len(), want) {
                negatives += 1;
                samples.push(ScorerSample {
                    features: c.features[background[k]].clone(),
                    loc_target: None,
                    cls_target: Some(false),
                    weight: 1.0,
                });
            }
        }
        if positives == 0 {
            report.stopped_early = Some(format!("round {round}: no positive proposals to train on"));
            break;
        }
        let initial_loc_loss = localization_loss_and_grad(&scorer, &samples).0;
        scorer = train_scorer(&scorer, &samples, &cfg.scorer)?;
        let final_loc_loss = localization_loss_and_grad(&scorer, &samples).0;

        // extension
        let mut added = Vec::new();
        let mut round_unscorable = 0;
        for (img, c) in images.iter().zip(&cands) {
            let scored: Vec<ScoredBox> = c
                .boxes
                .iter()
                .zip(&c.features)
                .map(|(b, f)| ScoredBox {
                    bbox: *b,
                    score: scorer.quality(f),
                })
                .collect();
            let mut proposals = geometry::nms(&scored, cfg.filter.nms_iou);
            proposals.truncate(cfg.max_proposals_per_image);
            let selected = select_top_percent(&proposals, cfg.top_percent)?;
            let existing = labels.boxes_for(img.image_id);
            let fresh: Vec<ScoredBox> = filter_proposals(&selected, &img.known, &cfg.filter)
                .into_iter()
                .filter(|p| existing.iter().all(|e| iou(e, &p.bbox) <= cfg.filter.nms_iou))
                .collect();
            let boxes: Vec<BBox> = fresh.iter().map(|p| p.bbox).collect();
            for (p, res) in fresh.iter().zip(rew.label_proposals(&img.error_maps, &boxes)) {
                match res {
                    Ok(sl) => added.push(PseudoLabel {
                        image_id: img.image_id,
                        proposal: sl,
                        score: p.score,
                        provenance: Provenance::Round(round),
                    }),
                    Err(_) => round_unscorable += 1,
                }
            }
        }
        report.rounds.push(RoundReport {
            round,
            positives,
            negatives,
            initial_loc_loss,
            final_loc_loss,
            added: added.len(),
            unscorable: round_unscorable,
        });
        labels.labels.extend(added);
    }
    Ok((labels, scorer, report))
}

/// Greedy one-to-one recall of `gts` by `boxes` visited in score order.
pub fn match_recall(boxes: &[ScoredBox], gts: &[BBox], iou_thresh: f64) -> f64 {
    if gts.is_empty() {
        return 0.0;
    }
    let mut used = vec![false; gts.len()];
    let mut hits = 0;
    for i in order_by_score(boxes.iter().map(|b| b.score)) {
        let mut best: Option<(usize, f64)> = None;
        for (g, gt) in gts.iter().enumerate() {
            if used[g] {
                continue;
            }
            let v = iou(&boxes[i].bbox, gt);
            if v >= iou_thresh && best.is_none_or(|(_, bv)| v > bv) {
                best = Some((g, v));
            }
        }
        if let Some((g, _)) = best {
            used[g] = true;
            hits += 1;
        }
    }
    hits as f64 / gts.len() as f64
}

/// Images chosen for exemplar replay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExemplarSelection {
    pub images: Vec<u64>,
    /// Instances covered per class.
    pub covered: BTreeMap<String, usize>,
    /// Classes with fewer instances than requested, and how many exist.
    pub shortages: BTreeMap<String, usize>,
}

/// Greedy cover: repeatedly takes the image that adds the most still-needed
/// instances until every class has `per_class_count` or is exhausted.
/// Ties go to the earlier image in a seeded shuffle of the image ids.
pub fn select_exemplars(
    annotations: &[(u64, String)],
    per_class_count: usize,
    seed: u64,
) -> Result<ExemplarSelection> {
    if per_class_count == 0 {
        return Err(Error::Invalid("per_class_count must be >= 1".into()));
    }
    let mut per_image: BTreeMap<u64, BTreeMap<&str, usize>> = BTreeMap::new();
    let mut totals: BTreeMap<&str, usize> = BTreeMap::new();
    for (img, class) in annotations {
        *per_image.entry(*img).or_default().entry(class).or_default() += 1;
        *totals.entry(class).or_default() += 1;
    }
    let mut order: Vec<u64> = per_image.keys().copied().collect();
    Rng::new(seed).shuffle(&mut order);

    let mut need: BTreeMap<&str, usize> = totals
        .iter()
        .map(|(c, &t)| (*c, t.min(per_class_count)))
        .collect();
    let mut covered: BTreeMap<String, usize> = totals.keys().map(|c| (c.to_string(), 0)).collect();
    let mut chosen = Vec::new();
    let mut taken = BTreeSet::new();
    loop {
        let mut best: Option<(u64, usize)> = None;
        for &img in &order {
            if taken.contains(&img) {
                continue;
            }
            let gain: usize = per_image[&img]
                .iter()
                .map(|(c, &n)| n.min(need[c]))
                .sum();
            if gain > 0 && best.is_none_or(|(_, g)| gain > g) {
                best = Some((img, gain));
            }
        }
        let Some((img, _)) = best else { break };
        taken.insert(img);
        chosen.push(img);
        for (c, &n) in &per_image[&img] {
            let nd = need.get_mut(c).unwrap();
            *nd = nd.saturating_sub(n);
            *covered.get_mut(*c).unwrap() += n;
        }
    }
    let shortages = totals
        .iter()
        .filter(|(_, &t)| t < per_class_count)
        .map(|(c, &t)| (c.to_string(), t))
        .collect();
    Ok(ExemplarSelection {
        images: chosen,
        covered,
        shortages,
    })
}
