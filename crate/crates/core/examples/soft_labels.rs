//! Trains the per-level model on a small scenario and soft-labels the
//! simulated proposals, grouped by what they actually cover.
//!
//!     cargo run --release --example soft_labels

mod common;

use rewod::softlabel::{soft_label, SizeRange};

fn main() -> rewod::Result<()> {
    let sc = common::small_scenario(1);
    let model = common::small_model(&sc);
    for p in &model.weibull_pairs {
        println!(
            "{:?}: fg median {:.3} ({} cells), bg median {:.3} ({} cells)",
            p.level,
            p.fg.median(),
            p.fg_sample_count,
            p.bg.median(),
            p.bg_sample_count
        );
    }
    for SizeRange { level, min_area, max_area } in &model.size_ranges {
        println!("{level:?} routes sides [{}, {})", min_area.sqrt(), max_area.sqrt());
    }

    let (mut unknown, mut known, mut background) = (Vec::new(), Vec::new(), Vec::new());
    for im in &sc.images {
        let maps = model.error_maps(&im.feature_maps)?;
        let boxes: Vec<_> = im.proposals.iter().map(|p| p.bbox).collect();
        for (b, r) in boxes.iter().zip(model.label_proposals(&maps, &boxes)) {
            let Ok(r) = r else { continue };
            let best = |objs: &[rewod::scenario::LabeledBox]| objs.iter().map(|o| o.bbox.iou(b)).fold(0.0, f64::max);
            if best(&im.unknown) >= 0.5 {
                unknown.push(r.soft_label);
            } else if best(&im.known) >= 0.5 {
                known.push(r.soft_label);
            } else if best(&im.unknown) == 0.0 && best(&im.known) == 0.0 {
                background.push(r.soft_label);
            }
        }
    }
    let mean = |v: &[f64]| if v.is_empty() { f64::NAN } else { v.iter().sum::<f64>() / v.len() as f64 };
    println!("mean soft label: unknown {:.3} (n={}), known {:.3} (n={}), background {:.3} (n={})",
        mean(&unknown), unknown.len(), mean(&known), known.len(), mean(&background), background.len());

    // the sharpening exponent
    let pair = &model.weibull_pairs[0];
    let re = pair.fg.median();
    for gamma in [0.5, 1.0, 4.0, 16.0] {
        println!("gamma {gamma:>4}: s(fg median) = {:.4}", soft_label(pair, re, gamma)?.value);
    }
    Ok(())
}
