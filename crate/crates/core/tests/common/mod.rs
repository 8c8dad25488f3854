//! Independent reference implementations shared by the integration tests.
//! Nothing here calls the library's matching or pooling code.
#![allow(dead_code)]

use rewod::eval::{Detection, GroundTruth, UNKNOWN};
use rewod::geometry::{BBox, ScoredBox};
use rewod::rng::Rng;

/// Mann–Whitney AUC, ties counted as one half.
pub fn auc(pos: &[f64], neg: &[f64]) -> f64 {
    let mut wins = 0.0;
    for &p in pos {
        for &n in neg {
            wins += if p > n {
                1.0
            } else if p == n {
                0.5
            } else {
                0.0
            };
        }
    }
    wins / (pos.len() * neg.len()) as f64
}

/// Same statistic via sorting, for large samples.
pub fn auc_ranked(pos: &[f64], neg: &[f64]) -> f64 {
    let mut sorted = neg.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut wins = 0.0;
    for &p in pos {
        let below = sorted.partition_point(|&v| v < p);
        let upto = sorted.partition_point(|&v| v <= p);
        wins += below as f64 + 0.5 * (upto - below) as f64;
    }
    wins / (pos.len() * neg.len()) as f64
}

/// Composite Simpson rule with `n` (even) panels.
pub fn simpson(f: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> f64 {
    assert!(n % 2 == 0);
    let h = (hi - lo) / n as f64;
    let mut s = f(lo) + f(hi);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(lo + k as f64 * h);
    }
    s * h / 3.0
}

pub fn ref_iou(a: &BBox, b: &BBox) -> f64 {
    let iw = (a.x + a.w).min(b.x + b.w) - a.x.max(b.x);
    let ih = (a.y + a.h).min(b.y + b.h) - a.y.max(b.y);
    if iw <= 0.0 || ih <= 0.0 {
        return 0.0;
    }
    let inter = iw * ih;
    inter / (a.w * a.h + b.w * b.h - inter)
}

/// Indices sorted by descending score, ties by index.
pub fn priority(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&i, &j| scores[j].partial_cmp(&scores[i]).unwrap().then(i.cmp(&j)));
    idx
}

/// Checks the defining properties of greedy NMS output `kept` (indices in
/// output order): kept boxes are pairwise within threshold, appear in
/// priority order, and every dropped box overlaps a higher-priority kept
/// box above threshold. Those properties determine the result uniquely.
pub fn nms_characterization(boxes: &[ScoredBox], thresh: f64, kept: &[usize]) -> Result<(), String> {
    let scores: Vec<f64> = boxes.iter().map(|b| b.score).collect();
    let order = priority(&scores);
    let rank: Vec<usize> = {
        let mut r = vec![0; boxes.len()];
        for (k, &i) in order.iter().enumerate() {
            r[i] = k;
        }
        r
    };
    for w in kept.windows(2) {
        if rank[w[0]] > rank[w[1]] {
            return Err("kept boxes out of priority order".into());
        }
    }
    for (a, &i) in kept.iter().enumerate() {
        for &j in &kept[a + 1..] {
            if ref_iou(&boxes[i].bbox, &boxes[j].bbox) > thresh {
                return Err(format!("kept {i} and {j} overlap"));
            }
        }
    }
    for d in 0..boxes.len() {
        if kept.contains(&d) {
            continue;
        }
        let covered = kept
            .iter()
            .any(|&k| rank[k] < rank[d] && ref_iou(&boxes[k].bbox, &boxes[d].bbox) > thresh);
        if !covered {
            return Err(format!("box {d} dropped without a suppressor"));
        }
    }
    Ok(())
}

/// Best-IoU target per proposal, `None` unless strictly above `thresh`.
pub fn ref_loc_targets(props: &[BBox], gts: &[BBox], thresh: f64) -> Vec<Option<(f64, usize)>> {
    props
        .iter()
        .map(|p| {
            let mut best: Option<(f64, usize)> = None;
            for (g, gt) in gts.iter().enumerate() {
                let v = ref_iou(p, gt);
                match best {
                    Some((bv, _)) if bv >= v => {}
                    _ => best = Some((v, g)),
                }
            }
            best.filter(|(v, _)| *v > thresh)
        })
        .collect()
}

/// Greedy one-to-one matching; returns per-detection flags.
pub fn ref_match(dets: &[&Detection], gts: &[&GroundTruth], thresh: f64) -> Vec<bool> {
    let scores: Vec<f64> = dets.iter().map(|d| d.score).collect();
    let mut taken = vec![false; gts.len()];
    let mut hit = vec![false; dets.len()];
    for i in priority(&scores) {
        let mut best = None;
        let mut best_v = -1.0;
        for (g, gt) in gts.iter().enumerate() {
            if taken[g] || gt.image_id != dets[i].image_id {
                continue;
            }
            let v = ref_iou(&dets[i].bbox, &gt.bbox);
            if v >= thresh && v > best_v {
                best_v = v;
                best = Some(g);
            }
        }
        if let Some(g) = best {
            taken[g] = true;
            hit[i] = true;
        }
    }
    hit
}

/// AP as `(1/G) Σ_{TP rank k} max_{j ≥ k} precision_j`.
pub fn ref_ap(dets: &[Detection], gts: &[GroundTruth], thresh: f64) -> f64 {
    if gts.is_empty() {
        return 0.0;
    }
    let d: Vec<&Detection> = dets.iter().collect();
    let g: Vec<&GroundTruth> = gts.iter().collect();
    let hit = ref_match(&d, &g, thresh);
    let scores: Vec<f64> = dets.iter().map(|d| d.score).collect();
    let order = priority(&scores);
    let mut prec = Vec::new();
    let mut tp = 0;
    for (k, &i) in order.iter().enumerate() {
        if hit[i] {
            tp += 1;
        }
        prec.push(tp as f64 / (k + 1) as f64);
    }
    let mut total = 0.0;
    for (k, &i) in order.iter().enumerate() {
        if hit[i] {
            total += prec[k..].iter().cloned().fold(0.0, f64::max);
        }
    }
    total / gts.len() as f64
}

pub fn ref_u_recall(dets: &[Detection], gts: &[GroundTruth], score_thresh: f64, thresh: f64) -> f64 {
    let g: Vec<&GroundTruth> = gts.iter().filter(|g| g.is_unknown).collect();
    if g.is_empty() {
        return 0.0;
    }
    let d: Vec<&Detection> = dets
        .iter()
        .filter(|d| d.class_label == UNKNOWN && d.score > score_thresh)
        .collect();
    ref_match(&d, &g, thresh).iter().filter(|&&h| h).count() as f64 / g.len() as f64
}

pub fn ref_recall_at_k(dets: &[Detection], gts: &[GroundTruth], k: usize, thresh: f64) -> f64 {
    let g: Vec<&GroundTruth> = gts.iter().filter(|g| g.is_unknown).collect();
    if g.is_empty() {
        return 0.0;
    }
    let unk: Vec<&Detection> = dets.iter().filter(|d| d.class_label == UNKNOWN).collect();
    let mut images: Vec<u64> = unk.iter().map(|d| d.image_id).collect();
    images.sort();
    images.dedup();
    let mut kept: Vec<&Detection> = Vec::new();
    for img in images {
        let mine: Vec<&Detection> = unk.iter().copied().filter(|d| d.image_id == img).collect();
        let scores: Vec<f64> = mine.iter().map(|d| d.score).collect();
        kept.extend(priority(&scores).into_iter().take(k).map(|i| mine[i]));
    }
    // restore global input order so tie-breaks match the untruncated list
    kept.sort_by_key(|d| unk.iter().position(|u| std::ptr::eq(*u, *d)).unwrap());
    ref_match(&kept, &g, thresh).iter().filter(|&&h| h).count() as f64 / g.len() as f64
}

pub fn ref_a_ose(dets: &[Detection], gts: &[GroundTruth], thresh: f64) -> usize {
    let known: Vec<&Detection> = dets.iter().filter(|d| d.class_label != UNKNOWN).collect();
    let scores: Vec<f64> = known.iter().map(|d| d.score).collect();
    let mut counted = vec![false; gts.len()];
    let mut n = 0;
    for i in priority(&scores) {
        let mut best: Option<usize> = None;
        let mut best_v = -1.0;
        for (g, gt) in gts.iter().enumerate() {
            if gt.image_id != known[i].image_id {
                continue;
            }
            let v = ref_iou(&known[i].bbox, &gt.bbox);
            if v > best_v {
                best_v = v;
                best = Some(g);
            }
        }
        if let Some(g) = best {
            if gts[g].is_unknown && best_v >= thresh && !counted[g] {
                counted[g] = true;
                n += 1;
            }
        }
    }
    n
}

/// Box with integer-ish corners on a small canvas, so overlaps and ties are common.
pub fn random_box(rng: &mut Rng, canvas: f64) -> BBox {
    let w = 4.0 + rng.below((canvas / 2.0) as usize) as f64;
    let h = 4.0 + rng.below((canvas / 2.0) as usize) as f64;
    let x = rng.below((canvas - w).max(1.0) as usize) as f64;
    let y = rng.below((canvas - h).max(1.0) as usize) as f64;
    BBox::new(x, y, w, h).unwrap()
}

/// Scores drawn from a coarse grid to force ties.
pub fn random_score(rng: &mut Rng) -> f64 {
    rng.below(11) as f64 / 10.0
}

pub const CLASSES: [&str; 2] = ["cat", "dog"];
pub const UNKNOWN_CLASSES: [&str; 1] = ["kite"];

/// Random detections and ground truth over `images` images.
pub fn random_instance(rng: &mut Rng, images: u64, canvas: f64) -> (Vec<Detection>, Vec<GroundTruth>) {
    let mut dets = Vec::new();
    let mut gts = Vec::new();
    for img in 1..=images {
        for _ in 0..rng.below(5) {
            let unknown = rng.below(3) == 0;
            let class = if unknown { UNKNOWN_CLASSES[0] } else { CLASSES[rng.below(2)] };
            gts.push(GroundTruth {
                image_id: img,
                bbox: random_box(rng, canvas),
                class_label: class.into(),
                is_unknown: unknown,
            });
        }
        for _ in 0..rng.below(7) {
            let label = match rng.below(3) {
                0 => UNKNOWN,
                k => CLASSES[k - 1],
            };
            // half the detections are perturbed copies of a ground truth box
            let bbox = match gts.iter().filter(|g| g.image_id == img).nth(rng.below(4)) {
                Some(g) if rng.below(2) == 0 => {
                    let dx = rng.below(5) as f64 - 2.0;
                    BBox::new((g.bbox.x + dx).max(0.0), g.bbox.y, g.bbox.w, g.bbox.h).unwrap()
                }
                _ => random_box(rng, canvas),
            };
            dets.push(Detection {
                image_id: img,
                bbox,
                class_label: label.into(),
                score: random_score(rng),
            });
        }
    }
    (dets, gts)
}
