use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::io::{DatasetManifest, SampleEntry, SplitTag};
use crate::error::{Error, Result};

/// Number of training scenes for a ratio, rounded to the nearest scene and
/// keeping at least one scene on each side when there are two or more.
pub fn train_count(n_scenes: usize, ratio: f64) -> usize {
    let k = (ratio * n_scenes as f64).round() as usize;
    if n_scenes >= 2 {
        k.clamp(1, n_scenes - 1)
    } else {
        k.min(n_scenes)
    }
}

/// Deterministic scene-level partition of `scene_ids` (duplicates allowed;
/// every id goes entirely to one side).
pub fn split_scene_ids(scene_ids: &[u64], ratio: f64, seed: u64) -> Result<(Vec<u64>, Vec<u64>)> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::invalid(format!("split ratio {ratio} outside (0, 1)")));
    }
    let mut unique: Vec<u64> = scene_ids.to_vec();
    unique.sort_unstable();
    unique.dedup();
    if unique.is_empty() {
        return Err(Error::invalid("cannot split an empty manifest"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    unique.shuffle(&mut rng);
    let k = train_count(unique.len(), ratio);
    let test = unique.split_off(k);
    Ok((unique, test))
}

/// Splits manifest samples into (train, test) by scene. Augmented variants
/// of a scene always stay on the side of their source scene.
pub fn split(manifest: &DatasetManifest, ratio: f64, seed: u64) -> Result<(Vec<SampleEntry>, Vec<SampleEntry>)> {
    let ids: Vec<u64> = manifest.samples.iter().map(|s| s.scene_id).collect();
    let (train_ids, _) = split_scene_ids(&ids, ratio, seed)?;
    let (train, test): (Vec<_>, Vec<_>) = manifest
        .samples
        .iter()
        .cloned()
        .partition(|s| train_ids.contains(&s.scene_id));
    let tag = |mut v: Vec<SampleEntry>, t: SplitTag| {
        v.iter_mut().for_each(|s| s.split = t);
        v
    };
    Ok((tag(train, SplitTag::Train), tag(test, SplitTag::Test)))
}

/// Writes split tags into the manifest in place.
pub fn assign_split(manifest: &mut DatasetManifest, ratio: f64, seed: u64) -> Result<()> {
    let (train, _) = split(manifest, ratio, seed)?;
    for s in &mut manifest.samples {
        s.split = if train.iter().any(|t| t.id == s.id) {
            SplitTag::Train
        } else {
            SplitTag::Test
        };
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ten_scenes_split_seven_three() {
        let ids: Vec<u64> = (0..10).collect();
        let (train, test) = split_scene_ids(&ids, 0.7, 3).unwrap();
        assert_eq!((train.len(), test.len()), (7, 3));
        assert_eq!(split_scene_ids(&ids, 0.7, 3).unwrap(), (train, test));
    }

    #[test]
    fn sixty_scenes_split() {
        let ids: Vec<u64> = (0..60).collect();
        let (train, test) = split_scene_ids(&ids, 0.7, 1).unwrap();
        assert_eq!((train.len(), test.len()), (42, 18));
    }

    #[test]
    fn errors() {
        assert!(split_scene_ids(&[], 0.7, 1).is_err());
        assert!(split_scene_ids(&[1, 2], 1.0, 1).is_err());
        assert!(split_scene_ids(&[1, 2], 0.0, 1).is_err());
    }
}
