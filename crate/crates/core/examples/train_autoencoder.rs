//! Trains one level's autoencoder on background-dominated features and
//! shows that object cells reconstruct worse than background cells.
//!
//!     cargo run --release --example train_autoencoder

mod common;

use rewod::feature::Level;
use rewod::reconstructor::{error_map, train_with_history, Autoencoder, TrainConfig};

fn main() -> rewod::Result<()> {
    let sc = common::small_scenario(0);
    let level = Level::P3;
    let maps: Vec<_> = sc.images.iter().filter_map(|im| im.feature_map(level)).collect();
    let channels = maps[0].channels();

    let ae = Autoencoder::init(level, channels, 8, 1)?;
    let cfg = TrainConfig {
        epochs: 10,
        ..TrainConfig::default()
    };
    let (ae, history) = train_with_history(&ae, &maps, &cfg)?;
    for s in &history {
        println!("epoch {:>2}  mean batch loss {:.4}", s.epoch, s.mean_batch_loss);
    }

    let (mut fg, mut bg) = (Vec::new(), Vec::new());
    for im in &sc.images {
        let e = error_map(&ae, im.feature_map(level).unwrap())?;
        let s = e.stride() as f64;
        let objects: Vec<_> = im.known.iter().chain(&im.unknown).map(|o| o.bbox).collect();
        for i in 0..e.height() {
            for j in 0..e.width() {
                let (cx, cy) = ((j as f64 + 0.5) * s, (i as f64 + 0.5) * s);
                if objects.iter().any(|b| b.contains_point(cx, cy)) { &mut fg } else { &mut bg }.push(e.get(i, j));
            }
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    println!("mean error: object cells {:.3}, background cells {:.3}", mean(&fg), mean(&bg));
    Ok(())
}
