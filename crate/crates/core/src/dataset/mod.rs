//! Channel maps, the HR→LR degradation, augmentation, splitting and the
//! on-disk dataset format.

mod augment;
mod degrade;
mod io;
mod map;
mod normalize;
mod split;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use augment::{augment, Transform};
pub use degrade::{degrade, degrade_on, DegradedMap, Lattice};
pub use io::{
    decode_header, decode_sample, encode_sample, load_dataset, save_dataset, Dataset, DatasetManifest,
    GeneratorRecord, SampleEntry, SplitTag, MANIFEST_FILE, MANIFEST_VERSION, SAMPLE_HEADER_LEN,
};
pub use map::{Channel, ChannelMap, LosState, MapMeta, NUM_CHANNELS, REGRESSION_TARGETS};
pub use normalize::{AffineRange, Normalization};
pub use split::{assign_split, split, split_scene_ids, train_count};

use crate::error::Result;
use crate::scene::{self, noise, PropagationParams, SceneParams};

/// Everything needed to synthesize a dataset deterministically.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthesisSpec {
    pub scenes: usize,
    pub grid_h: usize,
    pub grid_w: usize,
    pub seed: u64,
    pub split_ratio: f64,
    pub split_seed: u64,
    pub scale_factors: Vec<usize>,
    pub scene: SceneParams,
    pub propagation: PropagationParams,
}

impl Default for SynthesisSpec {
    fn default() -> Self {
        Self {
            scenes: 60,
            grid_h: 64,
            grid_w: 64,
            seed: 7,
            split_ratio: 0.7,
            split_seed: 7,
            scale_factors: vec![2, 4, 8],
            scene: SceneParams::default(),
            propagation: PropagationParams::default(),
        }
    }
}

impl SynthesisSpec {
    pub fn scene_seed(&self, index: usize) -> u64 {
        noise::hash4(self.seed, 0x5CE4E, index as i64, 0)
    }

    pub fn noise_seed(&self, index: usize) -> u64 {
        noise::hash4(self.seed, 0x5CE4E, index as i64, 1)
    }
}

/// Generates and renders every scene of `spec`, in index order.
pub fn synthesize_maps(spec: &SynthesisSpec) -> Result<Vec<ChannelMap>> {
    (0..spec.scenes)
        .into_par_iter()
        .map(|i| {
            let sc = scene::generate_scene(spec.scene_seed(i), spec.grid_h, spec.grid_w, &spec.scene)?;
            let mut map = scene::render_maps_with(&sc, spec.noise_seed(i), &spec.propagation);
            map.meta.scene_id = i as u64;
            Ok(map)
        })
        .collect()
}

/// Manifest for synthesized maps with the scene-level split applied.
pub fn manifest_for(spec: &SynthesisSpec, maps: &[ChannelMap]) -> Result<DatasetManifest> {
    let mut manifest = DatasetManifest::new(
        spec.grid_h,
        spec.grid_w,
        GeneratorRecord {
            base_seed: spec.seed,
            scene_params: spec.scene.clone(),
            propagation: spec.propagation.clone(),
        },
    );
    manifest.scale_factors = spec.scale_factors.clone();
    for m in maps {
        manifest.push_map(m);
    }
    assign_split(&mut manifest, spec.split_ratio, spec.split_seed)?;
    Ok(manifest)
}
