//! The full command chain on the reference scenario, driven through the
//! same entry point as the `rewod` binary:
//! synth-gen → train-rew → score → filter → self-train → evaluate.
//!
//!     cargo run --release --example end_to_end -- [SEED] [WORK_DIR]

use std::path::PathBuf;

fn main() {
    let mut args = std::env::args().skip(1);
    let seed = args.next().unwrap_or_else(|| "0".into());
    let tmp;
    let root: PathBuf = match args.next() {
        Some(dir) => dir.into(),
        None => {
            tmp = tempfile::tempdir().expect("temp dir");
            tmp.path().to_path_buf()
        }
    };
    let p = |rel: &str| root.join(rel).to_string_lossy().into_owned();
    let steps: [Vec<String>; 6] = [
        vec!["synth-gen".into(), "--out".into(), p("data")],
        vec!["train-rew".into(), "--data".into(), p("data"), "--out".into(), p("train")],
        vec!["score".into(), "--data".into(), p("data"), "--model".into(), p("train/model.json"), "--out".into(), p("score")],
        vec!["filter".into(), "--data".into(), p("data"), "--scored".into(), p("score/soft_labels.jsonl"), "--out".into(), p("filter")],
        vec![
            "self-train".into(),
            "--data".into(),
            p("data"),
            "--model".into(),
            p("train/model.json"),
            "--labels".into(),
            p("filter/pseudo_labels.jsonl"),
            "--out".into(),
            p("self_train"),
        ],
        vec!["evaluate".into(), "--data".into(), p("data"), "--labels".into(), p("self_train/pseudo_labels.jsonl"), "--out".into(), p("eval")],
    ];
    for step in steps {
        let started = std::time::Instant::now();
        let mut argv = vec!["rewod".to_string()];
        argv.extend(step.iter().cloned());
        argv.extend(["--seed".into(), seed.clone()]);
        let code = rewod::cli::run(argv);
        println!("{:<10} exit {code} ({:.1}s)", step[0], started.elapsed().as_secs_f64());
        if code != 0 {
            std::process::exit(code);
        }
    }
    print!("{}", std::fs::read_to_string(root.join("eval/metrics.json")).expect("metrics written"));
}
