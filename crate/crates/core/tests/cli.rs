use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

use rewod::eval::{CocoDataset, CocoResult, MetricsReport, UNKNOWN_CATEGORY_ID};
use rewod::pipeline::ScoredProposal;

const SMALL: &str = r#"
[scenario]
images = 3
image_size = 256
channels = 16
levels = ["P3", "P4", "P5"]
known_per_image = 2
unknown_per_image = 2
max_side = 96.0

[rew.latent_dims]
P3 = 8
P4 = 4
P5 = 2

[rew.train]
epochs = 4

[rew.weibull]
min_samples = 20

[self_train.scorer]
epochs = 50
"#;

fn rewod(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rewod")).args(args).output().unwrap()
}

fn ok(args: &[&str]) {
    let out = rewod(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Fixture {
    _dir: tempfile::TempDir,
    root: PathBuf,
}

impl Fixture {
    fn config(&self) -> PathBuf {
        self.root.join("small.toml")
    }
    fn data(&self) -> PathBuf {
        self.root.join("data")
    }
    fn model(&self) -> PathBuf {
        self.root.join("model/model.json")
    }
}

/// Small dataset plus a trained model, shared by the tests in this file.
fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_path_buf();
        fs::write(root.join("small.toml"), SMALL).unwrap();
        let f = Fixture { _dir: dir, root };
        let cfg = f.config();
        ok(&["synth-gen", "--config", s(&cfg), "--seed", "3", "--out", s(&f.data())]);
        let model_dir = f.root.join("model");
        ok(&["train-rew", "--config", s(&cfg), "--seed", "3", "--data", s(&f.data()), "--out", s(&model_dir)]);
        f
    })
}

fn tree(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn synth_gen_is_byte_identical_for_a_seed() {
    let f = fixture();
    let tmp = tempfile::tempdir().unwrap();
    let again = tmp.path().join("again");
    ok(&["synth-gen", "--config", s(&f.config()), "--seed", "3", "--out", s(&again)]);
    assert_eq!(tree(&f.data()), tree(&again));
    let other = tmp.path().join("other");
    ok(&["synth-gen", "--config", s(&f.config()), "--seed", "4", "--out", s(&other)]);
    assert_ne!(tree(&f.data()), tree(&other));
}

#[test]
fn generated_annotations_parse_back() {
    let f = fixture();
    let heldout: CocoDataset = serde_json::from_str(&fs::read_to_string(f.data().join("heldout.json")).unwrap()).unwrap();
    assert_eq!(heldout.images.len(), 3);
    assert_eq!(heldout.annotations.len(), 3 * 4);
    let train: CocoDataset = serde_json::from_str(&fs::read_to_string(f.data().join("annotations.json")).unwrap()).unwrap();
    assert_eq!(train.annotations.len(), 3 * 2);
}

#[test]
fn invalid_config_is_a_data_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.toml");
    fs::write(&cfg, "[scenario]\nimages = 0\n").unwrap();
    let out = rewod(&["synth-gen", "--config", s(&cfg), "--out", s(&tmp.path().join("o"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
    fs::write(&cfg, "bogus = 1\n").unwrap();
    let out = rewod(&["synth-gen", "--config", s(&cfg), "--out", s(&tmp.path().join("o"))]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(rewod(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(rewod(&["score", "--out", "x"]).status.code(), Some(1));
    assert_eq!(rewod(&["synth-gen", "--out", "x", "--seed", "minus-one"]).status.code(), Some(1));
    assert_eq!(rewod(&["--help"]).status.code(), Some(0));
}

#[test]
fn divergence_exits_three() {
    let f = fixture();
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("hot.toml");
    fs::write(&cfg, format!("{SMALL}\n").replace("epochs = 4", "epochs = 4\nlearning_rate = 1e300")).unwrap();
    let out = rewod(&["train-rew", "--config", s(&cfg), "--data", s(&f.data()), "--out", s(&tmp.path().join("m"))]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn train_rew_is_reproducible() {
    let f = fixture();
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("m");
    ok(&["train-rew", "--config", s(&f.config()), "--seed", "3", "--data", s(&f.data()), "--out", s(&dir)]);
    assert_eq!(fs::read(f.model()).unwrap(), fs::read(dir.join("model.json")).unwrap());
}

#[test]
fn missing_level_file_names_the_level() {
    let f = fixture();
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    ok(&["synth-gen", "--config", s(&f.config()), "--seed", "3", "--out", s(&data)]);
    fs::remove_file(data.join("features/2_P4.rfm")).unwrap();
    let out = rewod(&["train-rew", "--config", s(&f.config()), "--data", s(&data), "--out", s(&tmp.path().join("m"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("P4"));
}

#[test]
fn reloaded_model_reproduces_soft_labels() {
    let f = fixture();
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    ok(&["score", "--data", s(&f.data()), "--model", s(&f.model()), "--out", s(&a)]);
    // re-serialise the model before scoring again
    let model: rewod::rew::RewModel = serde_json::from_str(&fs::read_to_string(f.model()).unwrap()).unwrap();
    let copy = tmp.path().join("copy.json");
    fs::write(&copy, serde_json::to_string(&model).unwrap()).unwrap();
    ok(&["score", "--data", s(&f.data()), "--model", s(&copy), "--out", s(&b)]);
    let first = fs::read_to_string(a.join("soft_labels.jsonl")).unwrap();
    assert_eq!(first, fs::read_to_string(b.join("soft_labels.jsonl")).unwrap());
    let labels: Vec<ScoredProposal> = first.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert!(!labels.is_empty());
    assert!(labels.iter().all(|p| (0.0..=1.0).contains(&p.proposal.soft_label)));
}

#[test]
fn empty_and_malformed_proposal_files() {
    let f = fixture();
    let tmp = tempfile::tempdir().unwrap();
    let empty = tmp.path().join("empty.jsonl");
    fs::write(&empty, "").unwrap();
    let out_dir = tmp.path().join("e");
    ok(&["score", "--data", s(&f.data()), "--model", s(&f.model()), "--proposals", s(&empty), "--out", s(&out_dir)]);
    assert_eq!(fs::read_to_string(out_dir.join("soft_labels.jsonl")).unwrap(), "");

    let bad = tmp.path().join("bad.jsonl");
    fs::write(&bad, "{\"image_id\":1,\"box\":[0,0,60,60],\"score\":0.5}\n{\"image_id\":1,\"box\":[0,0]}\n").unwrap();
    let out = rewod(&["score", "--data", s(&f.data()), "--model", s(&f.model()), "--proposals", s(&bad), "--out", s(&out_dir)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad.jsonl:2:"));
}

#[test]
fn perfect_detections_score_full_marks() {
    let f = fixture();
    let tmp = tempfile::tempdir().unwrap();
    let heldout: CocoDataset = serde_json::from_str(&fs::read_to_string(f.data().join("heldout.json")).unwrap()).unwrap();
    let unknown_ids: Vec<u64> = heldout
        .categories
        .iter()
        .filter(|c| ["kite", "pizza", "laptop"].contains(&c.name.as_str()))
        .map(|c| c.id)
        .collect();
    let results: Vec<CocoResult> = heldout
        .annotations
        .iter()
        .map(|a| CocoResult {
            image_id: a.image_id,
            category_id: if unknown_ids.contains(&a.category_id) { UNKNOWN_CATEGORY_ID } else { a.category_id },
            bbox: a.bbox,
            score: 1.0,
        })
        .collect();
    let dets = tmp.path().join("dets.json");
    fs::write(&dets, serde_json::to_string(&results).unwrap()).unwrap();
    let out = tmp.path().join("ev");
    ok(&["evaluate", "--data", s(&f.data()), "--detections", s(&dets), "--out", s(&out)]);
    let m: MetricsReport = serde_json::from_str(&fs::read_to_string(out.join("metrics.json")).unwrap()).unwrap();
    assert_eq!(m.map_both, 1.0);
    assert_eq!(m.u_recall, 1.0);
    assert_eq!(m.a_ose, 0);
    assert_eq!(m.wilderness_impact, 0.0);
}

#[test]
fn self_train_with_zero_rounds_passes_labels_through() {
    let f = fixture();
    let tmp = tempfile::tempdir().unwrap();
    let (sc, fl, st) = (tmp.path().join("s"), tmp.path().join("f"), tmp.path().join("st"));
    ok(&["score", "--data", s(&f.data()), "--model", s(&f.model()), "--out", s(&sc)]);
    let scored = sc.join("soft_labels.jsonl");
    ok(&["filter", "--config", s(&f.config()), "--data", s(&f.data()), "--scored", s(&scored), "--out", s(&fl)]);
    let cfg = tmp.path().join("l0.toml");
    fs::write(&cfg, format!("{SMALL}\n[self_train]\niterations = 0\n").replace("[self_train.scorer]\nepochs = 50\n", "")).unwrap();
    let labels = fl.join("pseudo_labels.jsonl");
    ok(&["self-train", "--config", s(&cfg), "--data", s(&f.data()), "--model", s(&f.model()), "--labels", s(&labels), "--out", s(&st)]);
    assert_eq!(fs::read(&labels).unwrap(), fs::read(st.join("pseudo_labels.jsonl")).unwrap());

    // one round only ever adds labels
    let st1 = tmp.path().join("st1");
    ok(&["self-train", "--config", s(&f.config()), "--data", s(&f.data()), "--model", s(&f.model()), "--labels", s(&labels), "--out", s(&st1)]);
    let before = fs::read_to_string(&labels).unwrap();
    let after = fs::read_to_string(st1.join("pseudo_labels.jsonl")).unwrap();
    assert!(after.starts_with(&before));
}

#[test]
fn fit_weibull_refits_and_echoes_config() {
    let f = fixture();
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("w");
    ok(&["fit-weibull", "--config", s(&f.config()), "--seed", "3", "--data", s(&f.data()), "--model", s(&f.model()), "--out", s(&out)]);
    // same seed and exclusions: refitting reproduces the trained pairs
    assert_eq!(fs::read(f.model()).unwrap(), fs::read(out.join("model.json")).unwrap());

    // the echoed config is itself a valid config that echoes unchanged
    let echoed = out.join("effective_config.json");
    let again = tmp.path().join("again");
    ok(&["synth-gen", "--config", s(&echoed), "--out", s(&again)]);
    assert_eq!(fs::read(&echoed).unwrap(), fs::read(again.join("effective_config.json")).unwrap());
}
