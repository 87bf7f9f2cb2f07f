use std::collections::HashSet;

use chansr::dataset::{
    augment, encode_sample, load_dataset, manifest_for, save_dataset, synthesize_maps, ChannelMap, MapMeta, SplitTag,
    SynthesisSpec, MANIFEST_FILE,
};
use chansr::Error;

fn spec(scenes: usize) -> SynthesisSpec {
    SynthesisSpec {
        scenes,
        grid_h: 24,
        grid_w: 24,
        seed: 11,
        ..Default::default()
    }
}

fn written(scenes: usize) -> (tempfile::TempDir, Vec<ChannelMap>) {
    let s = spec(scenes);
    let maps = synthesize_maps(&s).unwrap();
    let dir = tempfile::tempdir().unwrap();
    save_dataset(dir.path(), &manifest_for(&s, &maps).unwrap(), &maps).unwrap();
    (dir, maps)
}

#[test]
fn save_then_load_is_bit_identical() {
    let (dir, maps) = written(5);
    let ds = load_dataset(dir.path()).unwrap();
    assert_eq!(ds.len(), 5);
    for (i, m) in maps.iter().enumerate() {
        let back = ds.load_sample(i).unwrap();
        let a: Vec<u32> = m.data().iter().map(|v| v.to_bits()).collect();
        let b: Vec<u32> = back.data().iter().map(|v| v.to_bits()).collect();
        assert_eq!(a, b);
        assert_eq!(back.meta, m.meta);
    }
}

#[test]
fn split_is_seven_to_three_and_scene_disjoint() {
    let (dir, _) = written(10);
    let ds = load_dataset(dir.path()).unwrap();
    let train: HashSet<u64> = ds.manifest.with_split(SplitTag::Train).map(|e| e.scene_id).collect();
    let test: HashSet<u64> = ds.manifest.with_split(SplitTag::Test).map(|e| e.scene_id).collect();
    assert_eq!((train.len(), test.len()), (7, 3));
    let augmented = augment(&ds.load_split(SplitTag::Train).unwrap());
    assert_eq!(augmented.len(), 42);
    assert!(augmented.iter().all(|m| !test.contains(&m.meta.scene_id)));
}

#[test]
fn synthesis_is_deterministic() {
    let a = synthesize_maps(&spec(3)).unwrap();
    let b = synthesize_maps(&spec(3)).unwrap();
    assert_eq!(a, b);
    let c = synthesize_maps(&SynthesisSpec { seed: 12, ..spec(3) }).unwrap();
    assert_ne!(a, c);
}

#[test]
fn corrupted_manifest_is_a_parse_error() {
    let (dir, _) = written(2);
    let path = dir.path().join(MANIFEST_FILE);
    std::fs::write(&path, "{ not json").unwrap();
    assert!(matches!(load_dataset(dir.path()), Err(Error::Parse(_))));
}

#[test]
fn future_manifest_version_is_rejected() {
    let (dir, _) = written(2);
    let path = dir.path().join(MANIFEST_FILE);
    let mut v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    v["format_version"] = 99.into();
    std::fs::write(&path, v.to_string()).unwrap();
    assert!(matches!(load_dataset(dir.path()), Err(Error::Version { found: 99, .. })));
}

#[test]
fn payload_of_wrong_size_names_the_sample() {
    let (dir, _) = written(2);
    let ds = load_dataset(dir.path()).unwrap();
    let entry = ds.manifest.samples[1].clone();
    let small = ChannelMap::zeros(12, 12, MapMeta::default());
    std::fs::write(dir.path().join(&entry.file), encode_sample(&small)).unwrap();
    match load_dataset(dir.path()) {
        Err(e @ Error::SampleShape { .. }) => assert!(e.to_string().contains(&entry.file), "{e}"),
        other => panic!("expected a shape error, got {other:?}"),
    }
}

#[test]
fn missing_directory_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(load_dataset(&dir.path().join("nope")), Err(Error::MissingFile(_))));
}
