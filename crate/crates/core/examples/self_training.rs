//! Initial pseudo labels from soft-labelled proposals, then rounds of
//! scorer training and label growth, with recall against the hidden truth.
//!
//!     cargo run --release --example self_training

mod common;

use std::collections::BTreeMap;

use rewod::geometry::{BBox, ScoredBox};
use rewod::pipeline::{
    initial_labels, match_recall, self_train, FilterConfig, ProposalScorer, PseudoLabelSet, ScoredProposal,
    SelfTrainConfig, SelfTrainImage, DESCRIPTOR_DIM,
};
use rewod::scenario::SyntheticScenario;

fn recall(sc: &SyntheticScenario, labels: &PseudoLabelSet) -> f64 {
    let (mut hit, mut total) = (0.0, 0);
    for im in &sc.images {
        let truth: Vec<BBox> = im.unknown.iter().map(|u| u.bbox).collect();
        let mine: Vec<ScoredBox> = labels
            .for_image(im.image_id)
            .map(|l| ScoredBox { bbox: l.proposal.bbox, score: l.proposal.soft_label })
            .collect();
        hit += match_recall(&mine, &truth, 0.5) * truth.len() as f64;
        total += truth.len();
    }
    hit / total as f64
}

fn main() -> rewod::Result<()> {
    let sc = common::small_scenario(2);
    let model = common::small_model(&sc);
    let filter = FilterConfig::default();

    let mut scored = Vec::new();
    let mut known = BTreeMap::new();
    let mut images = Vec::new();
    for im in &sc.images {
        let maps = model.error_maps(&im.feature_maps)?;
        let boxes: Vec<BBox> = im.proposals.iter().map(|p| p.bbox).collect();
        for (p, r) in im.proposals.iter().zip(model.label_proposals(&maps, &boxes)) {
            if let Ok(proposal) = r {
                scored.push(ScoredProposal { image_id: im.image_id, proposal, score: p.score });
            }
        }
        let k: Vec<BBox> = im.known.iter().map(|k| k.bbox).collect();
        known.insert(im.image_id, k.clone());
        images.push(SelfTrainImage {
            image_id: im.image_id,
            width: sc.config.image_size as f64,
            height: sc.config.image_size as f64,
            error_maps: maps,
            known: k,
            raw_proposals: boxes,
        });
    }

    let l0 = initial_labels(&scored, &known, &filter)?;
    println!("l=0: {} labels, unknown recall {:.3}", l0.len(), recall(&sc, &l0));

    let cfg = SelfTrainConfig { iterations: 2, filter, ..SelfTrainConfig::default() };
    let (labels, scorer, report) = self_train(&l0, &ProposalScorer::new(DESCRIPTOR_DIM), &model, &images, &cfg)?;
    for r in &report.rounds {
        println!(
            "round {}: {} positives, loc loss {:.4} -> {:.4}, {} labels added",
            r.round, r.positives, r.initial_loc_loss, r.final_loc_loss, r.added
        );
    }
    if let Some(why) = &report.stopped_early {
        println!("stopped early: {why}");
    }
    println!("l={}: {} labels, unknown recall {:.3}", report.rounds.len(), labels.len(), recall(&sc, &labels));
    labels.audit(&known, &cfg.filter)?;
    println!("scorer localization weights {:?}", scorer.localization.weights.iter().map(|w| format!("{w:.2}")).collect::<Vec<_>>());
    Ok(())
}
