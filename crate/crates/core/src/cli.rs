//! Command-line front end. Every subcommand reads an optional config file
//! (`--config`, TOML or JSON), takes `--seed`, writes into `--out`, and
//! echoes the effective config there as `effective_config.json`.
//!
//! Exit codes: 0 success, 1 usage, 2 data error, 3 numerical failure.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{self, Detection, EvalConfig, UNKNOWN};
use crate::geometry::{BBox, ScoredBox};
use crate::io::{read_config, read_json, read_jsonl, write_json, write_jsonl, DataDir, Manifest, ProposalRecord};
use crate::pipeline::{
    self, filter_proposals, FilterConfig, ProposalScorer, PseudoLabel, PseudoLabelSet, ScoredProposal,
    SelfTrainConfig, SelfTrainImage, DESCRIPTOR_DIM,
};
use crate::rew::{self, ImageFeatures, RewConfig, RewModel};
use crate::rng::Rng;
use crate::scenario::{generate_scenario, ScenarioConfig};

/// Everything a run can be configured with. Sub-seeds are derived from
/// `seed`; the seeds inside the nested sections are overwritten.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub scenario: ScenarioConfig,
    pub rew: RewConfig,
    /// Shared by the filter and self-train commands.
    pub filter: FilterConfig,
    pub self_train: SelfTrainConfig,
    pub eval: EvalConfig,
}

impl RunConfig {
    pub fn load(path: Option<&Path>, seed: Option<u64>) -> Result<Self> {
        let mut cfg: RunConfig = match path {
            Some(p) => read_config(p)?,
            None => RunConfig::default(),
        };
        if let Some(s) = seed {
            cfg.seed = s;
        }
        cfg.resolve();
        cfg.validate()?;
        Ok(cfg)
    }

    /// Derives the component seeds and shares the filter settings.
    pub fn resolve(&mut self) {
        let mut root = Rng::new(self.seed);
        self.rew.train.seed = root.fork(1).next_u64();
        self.rew.weibull.seed = root.fork(2).next_u64();
        self.self_train.seed = root.fork(3).next_u64();
        self.self_train.filter = self.filter.clone();
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        self.rew.train.validate()?;
        self.filter.validate()?;
        self.self_train.validate()
    }
}

#[derive(Debug, Parser)]
#[command(name = "rewod", version, about = "Reconstruction-error soft labels for unknown-object pseudo labels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Config file (.toml or .json); unspecified fields take defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory, created if needed.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic dataset directory.
    SynthGen {
        #[command(flatten)]
        common: Common,
    },
    /// Train per-level autoencoders and fit the Weibull pairs.
    TrainRew {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
    },
    /// Refit the Weibull pairs of a trained model.
    FitWeibull {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        model: PathBuf,
        /// Pseudo labels to exclude from background sampling; defaults to the
        /// filtered raw proposals.
        #[arg(long)]
        labels: Option<PathBuf>,
    },
    /// Soft-label proposals.
    Score {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        model: PathBuf,
        /// Defaults to the dataset's proposals.jsonl.
        #[arg(long)]
        proposals: Option<PathBuf>,
    },
    /// NMS and geometric filtering of soft-labeled proposals.
    Filter {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        scored: PathBuf,
    },
    /// Extend pseudo labels by self-training.
    SelfTrain {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        /// Warm-start scorer; defaults to zero weights.
        #[arg(long)]
        scorer: Option<PathBuf>,
    },
    /// Open-world metrics against the held-out annotations.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        /// Pseudo labels evaluated as unknown detections, with the known
        /// annotations passed through as known detections.
        #[arg(long, conflicts_with = "detections", required_unless_present = "detections")]
        labels: Option<PathBuf>,
        /// COCO results array.
        #[arg(long)]
        detections: Option<PathBuf>,
    },
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code. Errors are printed to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn prepare(common: &Common) -> Result<RunConfig> {
    let cfg = RunConfig::load(common.config.as_deref(), common.seed)?;
    fs::create_dir_all(&common.out).map_err(|e| Error::io(format!("creating {}", common.out.display()), e))?;
    write_json(&common.out.join("effective_config.json"), &cfg)?;
    Ok(cfg)
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::SynthGen { common } => {
            let cfg = prepare(&common)?;
            synth_gen(&cfg, &common.out)
        }
        Command::TrainRew { common, data } => {
            let cfg = prepare(&common)?;
            train_rew(&cfg, &DataDir::new(data), &common.out)
        }
        Command::FitWeibull {
            common,
            data,
            model,
            labels,
        } => {
            let cfg = prepare(&common)?;
            fit_weibull(&cfg, &DataDir::new(data), &model, labels.as_deref(), &common.out)
        }
        Command::Score {
            common,
            data,
            model,
            proposals,
        } => {
            prepare(&common)?;
            let data = DataDir::new(data);
            let proposals = proposals.unwrap_or_else(|| data.proposals_path());
            score(&data, &model, &proposals, &common.out).map(|_| ())
        }
        Command::Filter { common, data, scored } => {
            let cfg = prepare(&common)?;
            filter(&cfg, &DataDir::new(data), &scored, &common.out)
        }
        Command::SelfTrain {
            common,
            data,
            model,
            labels,
            scorer,
        } => {
            let cfg = prepare(&common)?;
            self_train(&cfg, &DataDir::new(data), &model, &labels, scorer.as_deref(), &common.out)
        }
        Command::Evaluate {
            common,
            data,
            labels,
            detections,
        } => {
            let cfg = prepare(&common)?;
            let data = DataDir::new(data);
            let dets = match (labels, detections) {
                (Some(l), _) => label_detections(&data, &l)?,
                (None, Some(d)) => data.heldout()?.detections(&read_json::<Vec<eval::CocoResult>>(&d)?)?,
                (None, None) => unreachable!("clap requires one of --labels / --detections"),
            };
            evaluate(&cfg, &data, &dets, &common.out)
        }
    }
}

pub fn synth_gen(cfg: &RunConfig, out: &Path) -> Result<()> {
    let sc = generate_scenario(cfg.seed, &cfg.scenario)?;
    DataDir::new(out).write_scenario(&sc)
}

/// Feature maps, known boxes, and background-exclusion boxes per image.
fn rew_images(
    data: &DataDir,
    manifest: &Manifest,
    pseudo: &BTreeMap<u64, Vec<BBox>>,
) -> Result<Vec<ImageFeatures>> {
    let known = data.known_boxes()?;
    manifest
        .image_ids
        .iter()
        .map(|&id| {
            Ok(ImageFeatures {
                image_id: id,
                maps: data.features(manifest, id)?,
                known: known.get(&id).cloned().unwrap_or_default(),
                pseudo: pseudo.get(&id).cloned().unwrap_or_default(),
            })
        })
        .collect()
}

/// Raw proposals after NMS and the geometric rules, per image.
fn filtered_raw(data: &DataDir, filter: &FilterConfig) -> Result<BTreeMap<u64, Vec<BBox>>> {
    let known = data.known_boxes()?;
    let empty = Vec::new();
    Ok(data
        .proposals()?
        .into_iter()
        .map(|(id, raw)| {
            let kept = filter_proposals(&raw, known.get(&id).unwrap_or(&empty), filter);
            (id, kept.into_iter().map(|p| p.bbox).collect())
        })
        .collect())
}

pub fn train_rew(cfg: &RunConfig, data: &DataDir, out: &Path) -> Result<()> {
    let manifest = data.manifest()?;
    let images = rew_images(data, &manifest, &filtered_raw(data, &cfg.filter)?)?;
    let (model, reports) = rew::train_rew(&images, &cfg.rew)?;
    write_json(&out.join("model.json"), &model)?;
    write_json(&out.join("train_report.json"), &reports)
}

pub fn fit_weibull(cfg: &RunConfig, data: &DataDir, model: &Path, labels: Option<&Path>, out: &Path) -> Result<()> {
    let mut model: RewModel = read_json(model)?;
    let manifest = data.manifest()?;
    let pseudo = match labels {
        Some(p) => {
            let mut m: BTreeMap<u64, Vec<BBox>> = BTreeMap::new();
            for l in read_jsonl::<PseudoLabel>(p)? {
                m.entry(l.image_id).or_default().push(l.proposal.bbox);
            }
            m
        }
        None => filtered_raw(data, &cfg.filter)?,
    };
    model.refit_weibull(&rew_images(data, &manifest, &pseudo)?, &cfg.rew.weibull)?;
    write_json(&out.join("model.json"), &model)?;
    write_json(&out.join("weibull_report.json"), &model.weibull_pairs)
}

/// A proposal that could not be scored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreFailure {
    pub line: usize,
    pub image_id: u64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub scored: usize,
    pub failed: Vec<ScoreFailure>,
}

/// Writes `soft_labels.jsonl` (input order, failures skipped) and
/// `score_report.json`.
pub fn score(data: &DataDir, model: &Path, proposals: &Path, out: &Path) -> Result<ScoreReport> {
    let model: RewModel = read_json(model)?;
    let records: Vec<ProposalRecord> = read_jsonl(proposals)?;
    let mut by_image: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
    for (k, r) in records.iter().enumerate() {
        by_image.entry(r.image_id).or_default().push(k);
    }
    let mut results: Vec<Option<std::result::Result<ScoredProposal, String>>> = vec![None; records.len()];
    if !records.is_empty() {
        let manifest = data.manifest()?;
        for (id, idx) in &by_image {
            if !manifest.image_ids.contains(id) {
                for &k in idx {
                    results[k] = Some(Err(format!("image {id} is not in the dataset")));
                }
                continue;
            }
            let maps = model.error_maps(&data.features(&manifest, *id)?)?;
            let boxes: Vec<BBox> = idx.iter().map(|&k| records[k].bbox).collect();
            for (&k, res) in idx.iter().zip(model.label_proposals(&maps, &boxes)) {
                results[k] = Some(res.map_err(|e| e.to_string()).map(|p| ScoredProposal {
                    image_id: *id,
                    proposal: p,
                    score: records[k].score,
                }));
            }
        }
    }
    let mut scored = Vec::new();
    let mut failed = Vec::new();
    for (k, r) in results.into_iter().enumerate() {
        match r.expect("every record visited") {
            Ok(p) => scored.push(p),
            Err(error) => failed.push(ScoreFailure {
                line: k + 1,
                image_id: records[k].image_id,
                error,
            }),
        }
    }
    write_jsonl(&out.join("soft_labels.jsonl"), &scored)?;
    let report = ScoreReport {
        scored: scored.len(),
        failed,
    };
    write_json(&out.join("score_report.json"), &report)?;
    Ok(report)
}

pub fn filter(cfg: &RunConfig, data: &DataDir, scored: &Path, out: &Path) -> Result<()> {
    let proposals: Vec<ScoredProposal> = read_jsonl(scored)?;
    let labels = pipeline::initial_labels(&proposals, &data.known_boxes()?, &cfg.filter)?;
    write_jsonl(&out.join("pseudo_labels.jsonl"), &labels.labels)
}

pub fn self_train(
    cfg: &RunConfig,
    data: &DataDir,
    model: &Path,
    labels: &Path,
    scorer: Option<&Path>,
    out: &Path,
) -> Result<()> {
    let model: RewModel = read_json(model)?;
    let initial = PseudoLabelSet {
        labels: read_jsonl(labels)?,
    };
    let scorer = match scorer {
        Some(p) => read_json(p)?,
        None => ProposalScorer::new(DESCRIPTOR_DIM),
    };
    let manifest = data.manifest()?;
    let known = data.known_boxes()?;
    let raw = data.proposals()?;
    let images = manifest
        .image_ids
        .iter()
        .map(|&id| {
            Ok(SelfTrainImage {
                image_id: id,
                width: manifest.image_width as f64,
                height: manifest.image_height as f64,
                error_maps: model.error_maps(&data.features(&manifest, id)?)?,
                known: known.get(&id).cloned().unwrap_or_default(),
                raw_proposals: raw.get(&id).map_or_else(Vec::new, |r| r.iter().map(|p| p.bbox).collect()),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let (labels, scorer, report) = pipeline::self_train(&initial, &scorer, &model, &images, &cfg.self_train)?;
    write_jsonl(&out.join("pseudo_labels.jsonl"), &labels.labels)?;
    write_json(&out.join("scorer.json"), &scorer)?;
    write_json(&out.join("self_train_report.json"), &report)
}

/// Pseudo labels as unknown detections scored by their soft label, plus
/// every known annotation as a known detection with score 1.
pub fn label_detections(data: &DataDir, labels: &Path) -> Result<Vec<Detection>> {
    let ann = data.annotations()?;
    let mut dets: Vec<Detection> = ann
        .annotations
        .iter()
        .map(|a| {
            let name = ann
                .category_name(a.category_id)
                .ok_or_else(|| Error::Invalid(format!("annotation {} has unknown category", a.id)))?;
            Ok(Detection {
                image_id: a.image_id,
                bbox: a.bbox,
                class_label: name.to_string(),
                score: 1.0,
            })
        })
        .collect::<Result<_>>()?;
    for l in read_jsonl::<PseudoLabel>(labels)? {
        dets.push(Detection {
            image_id: l.image_id,
            bbox: l.proposal.bbox,
            class_label: UNKNOWN.to_string(),
            score: l.proposal.soft_label,
        });
    }
    Ok(dets)
}

pub fn evaluate(cfg: &RunConfig, data: &DataDir, dets: &[Detection], out: &Path) -> Result<()> {
    let split = data.split()?;
    let gts = data.heldout()?.ground_truth(&split)?;
    let report = eval::evaluate_task(dets, &gts, &split, &cfg.eval)?;
    write_json(&out.join("metrics.json"), &report)
}

/// Held-out unknown recall of a label set: one-to-one matches at IoU ≥ 0.5
/// against the unknown annotations, regardless of score.
pub fn heldout_label_recall(data: &DataDir, labels: &[PseudoLabel]) -> Result<f64> {
    let split = data.split()?;
    let gts = data.heldout()?.ground_truth(&split)?;
    let mut hits = 0.0;
    let mut total = 0;
    let ids: std::collections::BTreeSet<u64> = gts.iter().map(|g| g.image_id).collect();
    for id in ids {
        let g: Vec<BBox> = gts
            .iter()
            .filter(|g| g.image_id == id && g.is_unknown)
            .map(|g| g.bbox)
            .collect();
        let b: Vec<ScoredBox> = labels
            .iter()
            .filter(|l| l.image_id == id)
            .map(|l| ScoredBox {
                bbox: l.proposal.bbox,
                score: l.proposal.soft_label,
            })
            .collect();
        hits += pipeline::match_recall(&b, &g, 0.5) * g.len() as f64;
        total += g.len();
    }
    Ok(if total == 0 { 0.0 } else { hits / total as f64 })
}
