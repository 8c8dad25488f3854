//! Small scenario and model shared by the examples, sized to run in seconds.
#![allow(dead_code)]

use std::collections::BTreeMap;

use rewod::feature::Level;
use rewod::rew::{train_rew, ImageFeatures, RewConfig, RewModel};
use rewod::scenario::{generate_scenario, ScenarioConfig, SyntheticScenario};

pub fn small_scenario(seed: u64) -> SyntheticScenario {
    let cfg = ScenarioConfig {
        image_size: 256,
        images: 6,
        channels: 16,
        levels: vec![Level::P3, Level::P4, Level::P5],
        known_per_image: 2,
        unknown_per_image: 2,
        max_side: 96.0,
        ..ScenarioConfig::default()
    };
    generate_scenario(seed, &cfg).expect("valid scenario config")
}

pub fn small_rew_config() -> RewConfig {
    let mut cfg = RewConfig {
        latent_dims: BTreeMap::from([(Level::P3, 8), (Level::P4, 4), (Level::P5, 2)]),
        ..RewConfig::default()
    };
    cfg.train.epochs = 8;
    cfg.weibull.min_samples = 20;
    cfg
}

/// Images with their known boxes; the proposals double as background exclusion.
pub fn rew_images(sc: &SyntheticScenario) -> Vec<ImageFeatures> {
    sc.images
        .iter()
        .map(|im| ImageFeatures {
            image_id: im.image_id,
            maps: im.feature_maps.clone(),
            known: im.known.iter().map(|k| k.bbox).collect(),
            pseudo: Vec::new(),
        })
        .collect()
}

pub fn small_model(sc: &SyntheticScenario) -> RewModel {
    train_rew(&rew_images(sc), &small_rew_config()).expect("training succeeds").0
}
