//! On-disk formats: JSON-lines streams, JSON/TOML documents, and the
//! dataset directory layout shared by the command-line tools.
//!
//! ```text
//! <data>/manifest.json          image size, levels, image ids
//! <data>/features/<id>_<L>.rfm  one feature map per image and level
//! <data>/annotations.json       COCO, known classes only (training view)
//! <data>/heldout.json           COCO, every object including unknowns
//! <data>/split.json             task split
//! <data>/proposals.jsonl        {image_id, box, score} per raw proposal
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{CocoAnnotation, CocoCategory, CocoDataset, CocoImage, TaskSplit};
use crate::feature::{read_feature_map, write_feature_map, FeatureMap, Level};
use crate::geometry::{BBox, ScoredBox};
use crate::scenario::SyntheticScenario;

/// Reads one JSON value per non-blank line; errors carry the 1-based line.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = fs::File::open(path).map_err(|e| Error::io(format!("opening {}", path.display()), e))?;
    let mut out = Vec::new();
    for (k, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: k + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let ctx = || format!("writing {}", path.display());
    let file = fs::File::create(path).map_err(|e| Error::io(ctx(), e))?;
    let mut w = BufWriter::new(file);
    for item in items {
        serde_json::to_writer(&mut w, item)?;
        w.write_all(b"\n").map_err(|e| Error::io(ctx(), e))?;
    }
    w.flush().map_err(|e| Error::io(ctx(), e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        message: e.to_string(),
    })
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

/// Loads a config document; `.toml` files are parsed as TOML, anything
/// else as JSON. Missing fields take their defaults.
pub fn read_config<T: DeserializeOwned>(path: &Path) -> Result<T> {
    if path.extension().is_some_and(|e| e == "toml") {
        let text = fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        toml::from_str(&text).map_err(|e| Error::Invalid(format!("{}: {e}", path.display())))
    } else {
        read_json(path)
    }
}

/// Raw generator proposal record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProposalRecord {
    pub image_id: u64,
    #[serde(rename = "box")]
    pub bbox: BBox,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub image_width: u32,
    pub image_height: u32,
    pub levels: Vec<Level>,
    pub image_ids: Vec<u64>,
}

/// Handle on a dataset directory.
#[derive(Debug, Clone)]
pub struct DataDir {
    pub root: PathBuf,
}

impl DataDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.root.join("manifest.json")
    }

    pub fn feature_path(&self, image_id: u64, level: Level) -> PathBuf {
        self.root.join("features").join(format!("{image_id}_{level}.rfm"))
    }

    pub fn annotations_path(&self) -> PathBuf {
        self.root.join("annotations.json")
    }

    pub fn heldout_path(&self) -> PathBuf {
        self.root.join("heldout.json")
    }

    pub fn split_path(&self) -> PathBuf {
        self.root.join("split.json")
    }

    pub fn proposals_path(&self) -> PathBuf {
        self.root.join("proposals.jsonl")
    }

    pub fn manifest(&self) -> Result<Manifest> {
        read_json(&self.manifest_path())
    }

    pub fn annotations(&self) -> Result<CocoDataset> {
        read_json(&self.annotations_path())
    }

    pub fn heldout(&self) -> Result<CocoDataset> {
        read_json(&self.heldout_path())
    }

    pub fn split(&self) -> Result<TaskSplit> {
        TaskSplit::load(&self.split_path())
    }

    /// Feature maps of one image for every manifest level.
    pub fn features(&self, manifest: &Manifest, image_id: u64) -> Result<Vec<FeatureMap>> {
        manifest
            .levels
            .iter()
            .map(|&level| {
                let path = self.feature_path(image_id, level);
                if !path.exists() {
                    return Err(Error::Invalid(format!(
                        "feature map for level {level} of image {image_id} not found at {}",
                        path.display()
                    )));
                }
                let map = read_feature_map(&path)?;
                if map.level() != level {
                    return Err(Error::Invalid(format!(
                        "{} holds level {}, expected {level}",
                        path.display(),
                        map.level()
                    )));
                }
                Ok(map)
            })
            .collect()
    }

    /// Known boxes per image from the training annotations.
    pub fn known_boxes(&self) -> Result<BTreeMap<u64, Vec<BBox>>> {
        let ann = self.annotations()?;
        let mut out: BTreeMap<u64, Vec<BBox>> = ann.images.iter().map(|i| (i.id, Vec::new())).collect();
        for a in &ann.annotations {
            out.entry(a.image_id).or_default().push(a.bbox);
        }
        Ok(out)
    }

    /// Raw proposals per image, or an empty map when the file is absent.
    pub fn proposals(&self) -> Result<BTreeMap<u64, Vec<ScoredBox>>> {
        let path = self.proposals_path();
        let mut out: BTreeMap<u64, Vec<ScoredBox>> = BTreeMap::new();
        if !path.exists() {
            return Ok(out);
        }
        for r in read_jsonl::<ProposalRecord>(&path)? {
            out.entry(r.image_id).or_default().push(ScoredBox::new(r.bbox, r.score)?);
        }
        Ok(out)
    }

    /// Writes a synthetic scenario in the layout above.
    pub fn write_scenario(&self, sc: &SyntheticScenario) -> Result<()> {
        let features = self.root.join("features");
        fs::create_dir_all(&features).map_err(|e| Error::io(format!("creating {}", features.display()), e))?;
        let size = sc.config.image_size;
        write_json(
            &self.manifest_path(),
            &Manifest {
                image_width: size,
                image_height: size,
                levels: sc.config.levels.clone(),
                image_ids: sc.images.iter().map(|i| i.image_id).collect(),
            },
        )?;
        for im in &sc.images {
            for m in &im.feature_maps {
                write_feature_map(m, self.feature_path(im.image_id, m.level()))?;
            }
        }

        let classes: Vec<&String> = sc.config.known_classes.iter().chain(&sc.config.unknown_classes).collect();
        let categories: Vec<CocoCategory> = classes
            .iter()
            .enumerate()
            .map(|(k, c)| CocoCategory {
                id: k as u64 + 1,
                name: (*c).clone(),
            })
            .collect();
        let cat_id = |name: &str| categories.iter().find(|c| c.name == name).map(|c| c.id).unwrap();
        let images: Vec<CocoImage> = sc
            .images
            .iter()
            .map(|im| CocoImage {
                id: im.image_id,
                file_name: None,
                width: Some(size),
                height: Some(size),
            })
            .collect();
        let mut known = Vec::new();
        let mut all = Vec::new();
        for im in &sc.images {
            for (obj, is_known) in im.known.iter().map(|o| (o, true)).chain(im.unknown.iter().map(|o| (o, false))) {
                let a = CocoAnnotation {
                    id: all.len() as u64 + 1,
                    image_id: im.image_id,
                    category_id: cat_id(&obj.class_name),
                    bbox: obj.bbox,
                    area: Some(obj.bbox.area()),
                    iscrowd: 0,
                };
                if is_known {
                    known.push(a.clone());
                }
                all.push(a);
            }
        }
        write_json(
            &self.annotations_path(),
            &CocoDataset {
                images: images.clone(),
                annotations: known,
                categories: categories.clone(),
            },
        )?;
        write_json(
            &self.heldout_path(),
            &CocoDataset {
                images,
                annotations: all,
                categories,
            },
        )?;
        write_json(
            &self.split_path(),
            &TaskSplit {
                task_id: 1,
                previously_known: Default::default(),
                current_known: sc.config.known_classes.iter().cloned().collect(),
                unknown: sc.config.unknown_classes.iter().cloned().collect(),
            },
        )?;
        let proposals: Vec<ProposalRecord> = sc
            .images
            .iter()
            .flat_map(|im| {
                im.proposals.iter().map(|p| ProposalRecord {
                    image_id: im.image_id,
                    bbox: p.bbox,
                    score: p.score,
                })
            })
            .collect();
        write_jsonl(&self.proposals_path(), &proposals)
    }
}
