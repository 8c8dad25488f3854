//! Open-world metrics on a hand-made task: per-class AP, unknown recall,
//! R@K, open-set errors and wilderness impact, plus COCO-style ingest.
//!
//!     cargo run --example evaluate_metrics

use rewod::eval::{evaluate_task, CocoDataset, Detection, EvalConfig, GroundTruth, TaskSplit, UNKNOWN};
use rewod::geometry::BBox;

fn b(x: f64, y: f64, w: f64, h: f64) -> BBox {
    BBox::new(x, y, w, h).unwrap()
}

fn gt(img: u64, bbox: BBox, class: &str, unknown: bool) -> GroundTruth {
    GroundTruth { image_id: img, bbox, class_label: class.into(), is_unknown: unknown }
}

fn det(img: u64, bbox: BBox, class: &str, score: f64) -> Detection {
    Detection { image_id: img, bbox, class_label: class.into(), score }
}

fn main() -> rewod::Result<()> {
    let split = TaskSplit {
        task_id: 1,
        previously_known: Default::default(),
        current_known: ["cat".to_string(), "dog".to_string()].into(),
        unknown: ["kite".to_string()].into(),
    };
    let gts = vec![
        gt(1, b(0.0, 0.0, 50.0, 50.0), "cat", false),
        gt(1, b(100.0, 100.0, 60.0, 40.0), "kite", true),
        gt(2, b(10.0, 10.0, 40.0, 80.0), "dog", false),
        gt(2, b(200.0, 50.0, 50.0, 50.0), "kite", true),
    ];
    let dets = vec![
        det(1, b(2.0, 0.0, 50.0, 50.0), "cat", 0.9),
        det(1, b(100.0, 100.0, 60.0, 40.0), "dog", 0.6), // a kite called dog: open-set error
        det(1, b(101.0, 100.0, 60.0, 40.0), UNKNOWN, 0.4),
        det(2, b(10.0, 12.0, 40.0, 80.0), "dog", 0.8),
        det(2, b(300.0, 300.0, 30.0, 30.0), UNKNOWN, 0.7),
    ];
    let report = evaluate_task(&dets, &gts, &split, &EvalConfig::default())?;
    println!("{}", serde_json::to_string_pretty(&report).expect("serializable"));

    // the same ground truth as a COCO document
    let coco = r#"{
        "images": [{"id": 1}],
        "annotations": [{"id": 1, "image_id": 1, "category_id": 1, "bbox": [0, 0, 50, 50]},
                        {"id": 2, "image_id": 1, "category_id": 3, "bbox": [100, 100, 60, 40]}],
        "categories": [{"id": 1, "name": "cat"}, {"id": 2, "name": "dog"}, {"id": 3, "name": "kite"}]
    }"#;
    let ds: CocoDataset = serde_json::from_str(coco).expect("valid COCO json");
    for g in ds.ground_truth(&split)? {
        println!("image {} {} unknown={}", g.image_id, g.class_label, g.is_unknown);
    }
    Ok(())
}
