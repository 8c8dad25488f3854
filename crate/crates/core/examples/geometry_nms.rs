//! Box geometry, non-maximum suppression, the pseudo-label filter rules and
//! top-percent selection.
//!
//!     cargo run --example geometry_nms

use rewod::geometry::{iou, nms, nms_indices, BBox, ScoredBox};
use rewod::pipeline::{filter_proposals, select_top_percent, FilterConfig};

fn sb(x: f64, y: f64, w: f64, h: f64, s: f64) -> ScoredBox {
    ScoredBox::new(BBox::new(x, y, w, h).unwrap(), s).unwrap()
}

fn main() {
    let a = BBox::new(0.0, 0.0, 100.0, 100.0).unwrap();
    let b = BBox::new(50.0, 0.0, 100.0, 100.0).unwrap();
    println!("iou(a, b) = {:.4}", iou(&a, &b));

    let raw = vec![
        sb(10.0, 10.0, 80.0, 80.0, 0.9),
        sb(15.0, 12.0, 80.0, 80.0, 0.8), // near-duplicate of the first
        sb(200.0, 40.0, 60.0, 70.0, 0.7),
        sb(300.0, 300.0, 40.0, 40.0, 0.95), // 1600 px^2, too small
        sb(300.0, 100.0, 150.0, 30.0, 0.6), // aspect 5
        sb(0.0, 200.0, 100.0, 50.0, 0.5),
    ];
    println!("nms @0.3 keeps indices {:?}", nms_indices(&raw, 0.3));
    println!("nms @0.3 keeps {} of {}", nms(&raw, 0.3).len(), raw.len());

    let known = [BBox::new(0.0, 200.0, 100.0, 100.0).unwrap()];
    let cfg = FilterConfig::default();
    for p in filter_proposals(&raw, &known, &cfg) {
        println!("kept {:?} score {}", p.bbox.to_array(), p.score);
    }

    let ten: Vec<ScoredBox> = (0..10).map(|k| sb(k as f64 * 60.0, 0.0, 50.0, 50.0, k as f64 / 10.0)).collect();
    let top = select_top_percent(&ten, 30.0).unwrap();
    println!("top 30% of 10: {:?}", top.iter().map(|p| p.score).collect::<Vec<_>>());
}
