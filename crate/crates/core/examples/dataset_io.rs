//! Write a synthetic dataset to disk, reload it and inspect the split and
//! augmentation.
//!
//! cargo run --example dataset_io -- [dir]

use std::collections::BTreeSet;
use std::path::PathBuf;

use chansr::dataset::{augment, load_dataset, manifest_for, save_dataset, synthesize_maps, SplitTag, SynthesisSpec};

fn main() -> chansr::Result<()> {
    let dir = std::env::args().nth(1).map_or_else(|| std::env::temp_dir().join("chansr-example-data"), PathBuf::from);
    let spec = SynthesisSpec {
        scenes: 10,
        grid_h: 32,
        grid_w: 32,
        ..SynthesisSpec::default()
    };
    let maps = synthesize_maps(&spec)?;
    save_dataset(&dir, &manifest_for(&spec, &maps)?, &maps)?;
    println!("wrote {} maps to {}", maps.len(), dir.display());

    let ds = load_dataset(&dir)?;
    let ids = |tag| ds.manifest.with_split(tag).map(|e| e.scene_id).collect::<BTreeSet<_>>();
    println!("train scenes {:?}", ids(SplitTag::Train));
    println!("test scenes  {:?}", ids(SplitTag::Test));

    let train = ds.load_split(SplitTag::Train)?;
    let aug = augment(&train);
    println!("{} training maps become {} after augmentation", train.len(), aug.len());
    for m in aug.iter().take(6) {
        println!("  scene {} {:?}", m.meta.scene_id, m.meta.transform);
    }
    assert_eq!(ds.load_sample(0)?, maps[0]);
    Ok(())
}
