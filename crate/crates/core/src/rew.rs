//! Assembled reconstruction-error scoring model: one autoencoder and one
//! foreground/background Weibull pair per pyramid level.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feature::{ErrorMap, FeatureMap, Level};
use crate::geometry::BBox;
use crate::reconstructor::{self, Autoencoder, TrainConfig};
use crate::softlabel::{self, default_size_ranges, SizeRange, SoftLabeledProposal};
use crate::weibull::{self, ImageRegions, WeibullConfig, WeibullPair};

pub const DEFAULT_GAMMA: f64 = 4.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewConfig {
    pub latent_dims: BTreeMap<Level, usize>,
    pub train: TrainConfig,
    pub weibull: WeibullConfig,
    pub gamma: f64,
    pub size_ranges: Vec<SizeRange>,
}

impl Default for RewConfig {
    fn default() -> Self {
        Self {
            latent_dims: Level::ALL
                .iter()
                .map(|&l| (l, l.default_latent_dim()))
                .collect(),
            train: TrainConfig::default(),
            weibull: WeibullConfig::default(),
            gamma: DEFAULT_GAMMA,
            size_ranges: default_size_ranges(),
        }
    }
}

/// Feature maps of one image plus the boxes that drive foreground and
/// background sampling.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageFeatures {
    pub image_id: u64,
    pub maps: Vec<FeatureMap>,
    pub known: Vec<BBox>,
    /// Pseudo labels excluded from background sampling.
    pub pseudo: Vec<BBox>,
}

impl ImageFeatures {
    pub fn map(&self, level: Level) -> Option<&FeatureMap> {
        self.maps.iter().find(|m| m.level() == level)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewModel {
    pub gamma: f64,
    pub size_ranges: Vec<SizeRange>,
    pub autoencoders: Vec<Autoencoder>,
    pub weibull_pairs: Vec<WeibullPair>,
}

/// Per-level training summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelReport {
    pub level: Level,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub epoch_losses: Vec<f64>,
    pub fg_sample_count: usize,
    pub bg_sample_count: usize,
}

fn levels_of(images: &[ImageFeatures]) -> Result<Vec<Level>> {
    let first = images
        .first()
        .ok_or_else(|| Error::Invalid("no images".into()))?;
    let mut levels: Vec<Level> = first.maps.iter().map(|m| m.level()).collect();
    levels.sort();
    levels.dedup();
    if levels.is_empty() {
        return Err(Error::Invalid(format!("image {} has no feature maps", first.image_id)));
    }
    for im in images {
        for &l in &levels {
            if im.map(l).is_none() {
                return Err(Error::MissingLevel(l));
            }
        }
    }
    Ok(levels)
}

/// Trains the per-level autoencoders (levels run on separate threads),
/// computes error maps, and fits the Weibull pairs.
pub fn train_rew(images: &[ImageFeatures], cfg: &RewConfig) -> Result<(RewModel, Vec<LevelReport>)> {
    cfg.train.validate()?;
    if !(cfg.gamma > 0.0 && cfg.gamma.is_finite()) {
        return Err(Error::Invalid(format!("gamma must be > 0, got {}", cfg.gamma)));
    }
    let levels = levels_of(images)?;

    let trained: Vec<Result<(Autoencoder, Vec<f64>, f64, f64)>> = std::thread::scope(|scope| {
        let handles: Vec<_> = levels
            .iter()
            .map(|&level| {
                scope.spawn(move || -> Result<(Autoencoder, Vec<f64>, f64, f64)> {
                    let maps: Vec<&FeatureMap> =
                        images.iter().filter_map(|im| im.map(level)).collect();
                    let channels = maps[0].channels();
                    let latent = *cfg
                        .latent_dims
                        .get(&level)
                        .unwrap_or(&level.default_latent_dim());
                    let seed = cfg.train.seed ^ u64::from(level.code());
                    let init = Autoencoder::init(level, channels, latent, seed)?;
                    let initial = mean_loss(&init, &maps)?;
                    let (ae, history) = reconstructor::train_with_history(&init, &maps, &cfg.train)?;
                    let last = mean_loss(&ae, &maps)?;
                    let epochs = history.iter().map(|h| h.mean_batch_loss).collect();
                    Ok((ae, epochs, initial, last))
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("training thread panicked"))
            .collect()
    });

    let mut autoencoders = Vec::with_capacity(levels.len());
    let mut partial = Vec::with_capacity(levels.len());
    for (level, res) in levels.iter().zip(trained) {
        let (ae, epochs, initial, last) = res?;
        autoencoders.push(ae);
        partial.push((*level, epochs, initial, last));
    }

    let mut model = RewModel {
        gamma: cfg.gamma,
        size_ranges: cfg.size_ranges.clone(),
        autoencoders,
        weibull_pairs: Vec::new(),
    };
    model.refit_weibull(images, &cfg.weibull)?;

    let reports = partial
        .into_iter()
        .map(|(level, epoch_losses, initial_loss, final_loss)| {
            let pair = model.pair(level).expect("pair fitted for every level");
            LevelReport {
                level,
                initial_loss,
                final_loss,
                epoch_losses,
                fg_sample_count: pair.fg_sample_count,
                bg_sample_count: pair.bg_sample_count,
            }
        })
        .collect();
    Ok((model, reports))
}

fn mean_loss(ae: &Autoencoder, maps: &[&FeatureMap]) -> Result<f64> {
    let mut total = 0.0;
    let mut cells = 0;
    for m in maps {
        total += reconstructor::error_map(ae, m)?.data().iter().sum::<f64>();
        cells += m.cells();
    }
    Ok(total / cells as f64)
}

impl RewModel {
    pub fn levels(&self) -> Vec<Level> {
        self.autoencoders.iter().map(|a| a.level).collect()
    }

    pub fn autoencoder(&self, level: Level) -> Option<&Autoencoder> {
        self.autoencoders.iter().find(|a| a.level == level)
    }

    pub fn pair(&self, level: Level) -> Option<&WeibullPair> {
        self.weibull_pairs.iter().find(|p| p.level == level)
    }

    /// Error maps for every level the model carries. Maps for levels the
    /// model lacks are skipped.
    pub fn error_maps(&self, maps: &[FeatureMap]) -> Result<Vec<ErrorMap>> {
        maps.iter()
            .filter_map(|m| self.autoencoder(m.level()).map(|ae| reconstructor::error_map(ae, m)))
            .collect()
    }

    /// Refits the Weibull pairs against new annotations, keeping the
    /// autoencoders.
    pub fn refit_weibull(&mut self, images: &[ImageFeatures], cfg: &WeibullConfig) -> Result<()> {
        let regions: Vec<ImageRegions> = images
            .iter()
            .map(|im| {
                Ok(ImageRegions {
                    error_maps: self.error_maps(&im.maps)?,
                    known: im.known.clone(),
                    pseudo: im.pseudo.clone(),
                })
            })
            .collect::<Result<_>>()?;
        for level in self.levels() {
            if regions.iter().all(|r| r.error_maps.iter().all(|e| e.level() != level)) {
                return Err(Error::MissingLevel(level));
            }
        }
        self.weibull_pairs = weibull::fit_pair(&regions, cfg)?;
        Ok(())
    }

    /// Routes, pools and scores each proposal; output order follows input.
    /// A proposal that cannot be scored yields an `Err` entry without
    /// affecting the others.
    pub fn label_proposals(
        &self,
        error_maps: &[ErrorMap],
        proposals: &[BBox],
    ) -> Vec<Result<SoftLabeledProposal>> {
        proposals
            .iter()
            .map(|b| self.label_one(error_maps, b))
            .collect()
    }

    fn label_one(&self, error_maps: &[ErrorMap], b: &BBox) -> Result<SoftLabeledProposal> {
        let level = softlabel::route_level(b, &self.size_ranges)?;
        let map = error_maps
            .iter()
            .find(|e| e.level() == level)
            .ok_or(Error::MissingLevel(level))?;
        let pair = self.pair(level).ok_or(Error::MissingLevel(level))?;
        let pooled = softlabel::pooled_error(map, b, level.stride())?;
        let s = softlabel::soft_label(pair, pooled, self.gamma)?;
        Ok(SoftLabeledProposal {
            bbox: *b,
            level,
            pooled_error: pooled,
            soft_label: s.value,
            underflow: s.underflow,
        })
    }
}
