//! Writing and reading RFM1 feature maps, and turning a map into a
//! reconstruction-error map with an (untrained) autoencoder.
//!
//!     cargo run --example feature_io

use rewod::feature::{read_feature_map, write_feature_map, FeatureMap, Level};
use rewod::reconstructor::{error_map, Autoencoder};
use rewod::rng::Rng;

fn main() -> rewod::Result<()> {
    let (h, w, c) = (8, 8, 16);
    let mut rng = Rng::new(7);
    let data = (0..h * w * c).map(|_| rng.normal() as f32).collect();
    let map = FeatureMap::new(Level::P4, h, w, c, data)?;

    let dir = tempfile::tempdir().expect("temp dir");
    let path = dir.path().join("0_P4.rfm");
    write_feature_map(&map, &path)?;
    let bytes = std::fs::read(&path).expect("written");
    println!("{} bytes, magic {:?}", bytes.len(), std::str::from_utf8(&bytes[..4]).unwrap_or("?"));

    let back = read_feature_map(&path)?;
    assert_eq!(back, map);
    println!(
        "level {:?} stride {} grid {}x{} channels {}",
        back.level(),
        back.stride(),
        back.height(),
        back.width(),
        back.channels()
    );

    let ae = Autoencoder::init(Level::P4, c, 4, 1)?;
    let e = error_map(&ae, &back)?;
    println!("untrained error map mean {:.3}", e.mean());

    // a truncated file is a format error, not a panic
    std::fs::write(&path, &bytes[..10]).expect("write");
    match read_feature_map(&path) {
        Err(err) => println!("truncated file: {err}"),
        Ok(_) => unreachable!(),
    }
    Ok(())
}
