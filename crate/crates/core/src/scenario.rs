//! Seeded synthetic scenes for desk-scale validation.
//!
//! Background cells draw from a handful of shared prototype vectors plus
//! small Gaussian noise, so background patterns repeat across every image.
//! Each object (known or unknown) gets its own random direction per level
//! plus per-cell texture noise, so foreground patterns are rare and diverse.
//! A simulated unsupervised proposal generator hits some objects and emits
//! random background boxes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feature::{FeatureMap, Level};
use crate::geometry::{BBox, ScoredBox};
use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProposalSimConfig {
    /// Probability that an unknown object gets a proposal.
    pub unknown_hit_rate: f64,
    /// Probability that a known object gets a proposal.
    pub known_hit_rate: f64,
    /// Relative corner jitter of object proposals (fraction of side length).
    pub jitter: f64,
    /// Random background proposals per image.
    pub background_per_image: usize,
}

impl Default for ProposalSimConfig {
    fn default() -> Self {
        Self {
            unknown_hit_rate: 0.5,
            known_hit_rate: 0.8,
            jitter: 0.06,
            background_per_image: 24,
        }
    }
}

/// Scenario parameters; every field has a default so a partial JSON
/// document is accepted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Square image side in input pixels; must be a multiple of 64.
    pub image_size: u32,
    pub images: usize,
    pub channels: usize,
    pub levels: Vec<Level>,
    pub background_prototypes: usize,
    /// Standard deviation of prototype entries.
    pub prototype_scale: f64,
    /// Standard deviation of per-object direction entries.
    pub object_scale: f64,
    /// Per-cell noise on background cells.
    pub noise_sigma: f64,
    /// Per-cell noise on object cells.
    pub texture_sigma: f64,
    pub known_per_image: usize,
    pub unknown_per_image: usize,
    pub min_side: f64,
    pub max_side: f64,
    /// Largest allowed `max(w/h, h/w)` of an object.
    pub max_aspect: f64,
    pub known_classes: Vec<String>,
    pub unknown_classes: Vec<String>,
    pub proposals: ProposalSimConfig,
    /// Placement attempts per object before giving up.
    pub max_retries: usize,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            image_size: 512,
            images: 16,
            channels: 64,
            levels: Level::ALL.to_vec(),
            background_prototypes: 5,
            prototype_scale: 1.0,
            object_scale: 1.0,
            noise_sigma: 0.1,
            texture_sigma: 0.3,
            known_per_image: 3,
            unknown_per_image: 3,
            min_side: 48.0,
            max_side: 192.0,
            max_aspect: 2.0,
            known_classes: vec!["cat".into(), "dog".into(), "car".into()],
            unknown_classes: vec!["kite".into(), "pizza".into(), "laptop".into()],
            proposals: ProposalSimConfig::default(),
            max_retries: 500,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Invalid(m));
        if self.image_size == 0 || self.image_size % 64 != 0 {
            return bad(format!("image_size {} must be a positive multiple of 64", self.image_size));
        }
        if self.images == 0 {
            return bad("images must be >= 1".into());
        }
        if self.channels == 0 {
            return bad("channels must be >= 1".into());
        }
        if self.levels.is_empty() {
            return bad("at least one level required".into());
        }
        if self.background_prototypes == 0 {
            return bad("background_prototypes must be >= 1".into());
        }
        for (name, v) in [
            ("prototype_scale", self.prototype_scale),
            ("object_scale", self.object_scale),
            ("noise_sigma", self.noise_sigma),
            ("texture_sigma", self.texture_sigma),
        ] {
            if !v.is_finite() || v < 0.0 {
                return bad(format!("{name} must be finite and >= 0, got {v}"));
            }
        }
        if !(self.min_side > 0.0 && self.min_side <= self.max_side) {
            return bad(format!(
                "need 0 < min_side <= max_side, got {} / {}",
                self.min_side, self.max_side
            ));
        }
        if self.max_side > self.image_size as f64 {
            return bad("max_side exceeds image_size".into());
        }
        if !(self.max_aspect >= 1.0) {
            return bad("max_aspect must be >= 1".into());
        }
        if self.known_per_image > 0 && self.known_classes.is_empty() {
            return bad("known_classes empty".into());
        }
        if self.unknown_per_image > 0 && self.unknown_classes.is_empty() {
            return bad("unknown_classes empty".into());
        }
        if self
            .known_classes
            .iter()
            .any(|k| self.unknown_classes.contains(k))
        {
            return bad("known and unknown class sets overlap".into());
        }
        let p = &self.proposals;
        for (name, v) in [
            ("unknown_hit_rate", p.unknown_hit_rate),
            ("known_hit_rate", p.known_hit_rate),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} must be in [0, 1]"));
            }
        }
        if !(0.0..0.5).contains(&p.jitter) {
            return bad("jitter must be in [0, 0.5)".into());
        }
        Ok(())
    }

    pub fn grid_side(&self, level: Level) -> usize {
        (self.image_size / level.stride()) as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledBox {
    #[serde(rename = "box")]
    pub bbox: BBox,
    pub class_name: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticImage {
    pub image_id: u64,
    /// One map per configured level, in config order.
    pub feature_maps: Vec<FeatureMap>,
    pub known: Vec<LabeledBox>,
    /// Held-out truth; never visible to the pipeline.
    pub unknown: Vec<LabeledBox>,
    /// Simulated unsupervised proposals.
    pub proposals: Vec<ScoredBox>,
}

impl SyntheticImage {
    pub fn feature_map(&self, level: Level) -> Option<&FeatureMap> {
        self.feature_maps.iter().find(|m| m.level() == level)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticScenario {
    pub config: ScenarioConfig,
    pub seed: u64,
    pub images: Vec<SyntheticImage>,
    /// Prototypes per level, in config level order.
    pub background_prototypes: Vec<Vec<Vec<f32>>>,
    pub noise_sigma: f64,
}

fn random_vector(rng: &mut Rng, dim: usize, scale: f64) -> Vec<f32> {
    (0..dim).map(|_| (rng.normal() * scale) as f32).collect()
}

fn place_objects(
    rng: &mut Rng,
    cfg: &ScenarioConfig,
    count: usize,
    taken: &mut Vec<BBox>,
) -> Result<Vec<BBox>> {
    let size = cfg.image_size as f64;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let mut placed = None;
        for _ in 0..cfg.max_retries.max(1) {
            let side = rng.range(cfg.min_side, cfg.max_side);
            let log_ar = rng.range(-cfg.max_aspect.ln(), cfg.max_aspect.ln());
            let ar = log_ar.exp();
            let w = (side * ar.sqrt()).clamp(1.0, size).round();
            let h = (side / ar.sqrt()).clamp(1.0, size).round();
            let x = (rng.uniform() * (size - w)).round();
            let y = (rng.uniform() * (size - h)).round();
            let b = BBox::new(x, y, w, h)?;
            if taken.iter().all(|t| t.intersection_area(&b) == 0.0) {
                placed = Some(b);
                break;
            }
        }
        let b = placed.ok_or_else(|| {
            Error::Generation(format!(
                "could not place a disjoint object after {} attempts",
                cfg.max_retries
            ))
        })?;
        taken.push(b);
        out.push(b);
    }
    Ok(out)
}

fn jitter_box(rng: &mut Rng, b: &BBox, jitter: f64, size: f64) -> Result<BBox> {
    let dx1 = rng.range(-jitter, jitter) * b.w;
    let dx2 = rng.range(-jitter, jitter) * b.w;
    let dy1 = rng.range(-jitter, jitter) * b.h;
    let dy2 = rng.range(-jitter, jitter) * b.h;
    let x1 = (b.x + dx1).clamp(0.0, size - 1.0);
    let y1 = (b.y + dy1).clamp(0.0, size - 1.0);
    let x2 = (b.x2() + dx2).clamp(x1 + 1.0, size);
    let y2 = (b.y2() + dy2).clamp(y1 + 1.0, size);
    BBox::from_corners(x1, y1, x2, y2)
}

fn simulate_proposals(
    rng: &mut Rng,
    cfg: &ScenarioConfig,
    known: &[LabeledBox],
    unknown: &[LabeledBox],
) -> Result<Vec<ScoredBox>> {
    let p = &cfg.proposals;
    let size = cfg.image_size as f64;
    let mut out = Vec::new();
    for (objs, rate) in [(unknown, p.unknown_hit_rate), (known, p.known_hit_rate)] {
        for o in objs {
            if rng.uniform() < rate {
                let b = jitter_box(rng, &o.bbox, p.jitter, size)?;
                out.push(ScoredBox::new(b, rng.range(0.3, 1.0))?);
            }
        }
    }
    for _ in 0..p.background_per_image {
        let w = rng.range(cfg.min_side, cfg.max_side).round();
        let h = rng.range(cfg.min_side, cfg.max_side).round();
        let x = (rng.uniform() * (size - w)).round();
        let y = (rng.uniform() * (size - h)).round();
        out.push(ScoredBox::new(BBox::new(x, y, w, h)?, rng.uniform())?);
    }
    Ok(out)
}

/// Builds a scenario; identical `(seed, config)` gives identical output.
pub fn generate_scenario(seed: u64, config: &ScenarioConfig) -> Result<SyntheticScenario> {
    config.validate()?;
    let mut master = Rng::new(seed);
    let c = config.channels;

    let mut proto_rng = master.fork(1);
    let background_prototypes: Vec<Vec<Vec<f32>>> = config
        .levels
        .iter()
        .map(|_| {
            (0..config.background_prototypes)
                .map(|_| random_vector(&mut proto_rng, c, config.prototype_scale))
                .collect()
        })
        .collect();

    let mut images = Vec::with_capacity(config.images);
    for img in 0..config.images {
        let mut rng = master.fork(100 + img as u64);
        let mut taken = Vec::new();
        let known_boxes = place_objects(&mut rng, config, config.known_per_image, &mut taken)?;
        let unknown_boxes = place_objects(&mut rng, config, config.unknown_per_image, &mut taken)?;
        let known: Vec<LabeledBox> = known_boxes
            .into_iter()
            .map(|bbox| LabeledBox {
                bbox,
                class_name: config.known_classes[rng.below(config.known_classes.len())].clone(),
            })
            .collect();
        let unknown: Vec<LabeledBox> = unknown_boxes
            .into_iter()
            .map(|bbox| LabeledBox {
                bbox,
                class_name: config.unknown_classes[rng.below(config.unknown_classes.len())]
                    .clone(),
            })
            .collect();
        let objects: Vec<BBox> = known.iter().chain(&unknown).map(|o| o.bbox).collect();

        let mut feature_maps = Vec::with_capacity(config.levels.len());
        for (li, &level) in config.levels.iter().enumerate() {
            let side = config.grid_side(level);
            let stride = level.stride() as f64;
            let obj_vecs: Vec<Vec<f32>> = objects
                .iter()
                .map(|_| random_vector(&mut rng, c, config.object_scale))
                .collect();
            let protos = &background_prototypes[li];
            let mut data = Vec::with_capacity(side * side * c);
            for i in 0..side {
                for j in 0..side {
                    let (cx, cy) = ((j as f64 + 0.5) * stride, (i as f64 + 0.5) * stride);
                    match objects.iter().position(|o| o.contains_point(cx, cy)) {
                        Some(k) => {
                            for &v in &obj_vecs[k] {
                                data.push(v + (rng.normal() * config.texture_sigma) as f32);
                            }
                        }
                        None => {
                            let p = &protos[rng.below(protos.len())];
                            for &v in p {
                                data.push(v + (rng.normal() * config.noise_sigma) as f32);
                            }
                        }
                    }
                }
            }
            feature_maps.push(FeatureMap::new(level, side, side, c, data)?);
        }

        let proposals = simulate_proposals(&mut rng, config, &known, &unknown)?;
        images.push(SyntheticImage {
            image_id: img as u64 + 1,
            feature_maps,
            known,
            unknown,
            proposals,
        });
    }

    Ok(SyntheticScenario {
        config: config.clone(),
        seed,
        images,
        background_prototypes,
        noise_sigma: config.noise_sigma,
    })
}
