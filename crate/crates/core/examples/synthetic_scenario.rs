//! Generates the synthetic scenario and writes it as a data directory.
//!
//!     cargo run --example synthetic_scenario -- [SEED] [OUT_DIR]

use rewod::io::DataDir;
use rewod::scenario::{generate_scenario, ScenarioConfig};

fn main() -> rewod::Result<()> {
    let mut args = std::env::args().skip(1);
    let seed: u64 = args.next().map_or(0, |s| s.parse().expect("seed must be an integer"));
    let cfg = ScenarioConfig::default();
    let sc = generate_scenario(seed, &cfg)?;

    for im in sc.images.iter().take(3) {
        println!("image {}:", im.image_id);
        for k in &im.known {
            println!("  known   {:<7} {:?}", k.class_name, k.bbox.to_array());
        }
        for u in &im.unknown {
            println!("  unknown {:<7} {:?}", u.class_name, u.bbox.to_array());
        }
        println!("  {} proposals, {} feature maps", im.proposals.len(), im.feature_maps.len());
    }
    let objects: usize = sc.images.iter().map(|i| i.known.len() + i.unknown.len()).sum();
    println!("{} images, {objects} objects", sc.images.len());

    if let Some(out) = args.next() {
        DataDir::new(&out).write_scenario(&sc)?;
        println!("wrote {out}");
    }
    Ok(())
}
