//! On-disk dataset layout.
//!
//! A dataset directory holds `manifest.json` plus one binary file per
//! sample: a 28-byte header (`"CSRD"`, `u16` version, `C`, `H`, `W` as
//! little-endian `u32`, 10 reserved zero bytes) followed by `C*H*W`
//! little-endian `f32` values, channel-major then row-major.

use std::collections::HashSet;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::augment::Transform;
use super::map::{ChannelMap, MapMeta, NUM_CHANNELS};
use super::normalize::Normalization;
use crate::error::{Error, Result};
use crate::scene::{PropagationParams, SceneParams};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_VERSION: u32 = 1;
pub const SAMPLE_MAGIC: &[u8; 4] = b"CSRD";
pub const SAMPLE_VERSION: u16 = 1;
pub const SAMPLE_HEADER_LEN: usize = 28;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitTag {
    Train,
    Test,
    #[default]
    Unassigned,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleEntry {
    pub id: usize,
    pub scene_id: u64,
    pub file: String,
    /// `[C, H, W]`
    pub shape: [usize; 3],
    pub split: SplitTag,
    pub scene_seed: u64,
    pub noise_seed: u64,
    #[serde(default)]
    pub transform: Transform,
    pub cell_size_m: f32,
}

impl SampleEntry {
    pub fn meta(&self) -> MapMeta {
        MapMeta {
            scene_id: self.scene_id,
            scene_seed: self.scene_seed,
            noise_seed: self.noise_seed,
            cell_size_m: self.cell_size_m,
            transform: self.transform,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorRecord {
    pub base_seed: u64,
    pub scene_params: SceneParams,
    pub propagation: PropagationParams,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub format_version: u32,
    pub grid_h: usize,
    pub grid_w: usize,
    pub scale_factors: Vec<usize>,
    pub augmented: bool,
    pub generator: GeneratorRecord,
    pub normalization: Normalization,
    pub samples: Vec<SampleEntry>,
}

impl DatasetManifest {
    pub fn new(grid_h: usize, grid_w: usize, generator: GeneratorRecord) -> Self {
        Self {
            format_version: MANIFEST_VERSION,
            grid_h,
            grid_w,
            scale_factors: vec![2, 4, 8],
            augmented: false,
            generator,
            normalization: Normalization::default(),
            samples: Vec::new(),
        }
    }

    /// Appends an entry for `map`, naming its file after the sample id.
    pub fn push_map(&mut self, map: &ChannelMap) -> &SampleEntry {
        let id = self.samples.len();
        self.samples.push(SampleEntry {
            id,
            scene_id: map.meta.scene_id,
            file: format!("sample_{id:05}.csrd"),
            shape: [NUM_CHANNELS, map.height(), map.width()],
            split: SplitTag::Unassigned,
            scene_seed: map.meta.scene_seed,
            noise_seed: map.meta.noise_seed,
            transform: map.meta.transform,
            cell_size_m: map.meta.cell_size_m,
        });
        &self.samples[id]
    }

    pub fn with_split(&self, tag: SplitTag) -> impl Iterator<Item = &SampleEntry> {
        self.samples.iter().filter(move |s| s.split == tag)
    }

    /// Structural checks that need no file access.
    pub fn validate(&self) -> Result<()> {
        if self.format_version != MANIFEST_VERSION {
            return Err(Error::Version {
                found: self.format_version,
                expected: MANIFEST_VERSION,
            });
        }
        if !self.normalization.validate() {
            return Err(Error::Parse("normalization record must list 7 channels in order".into()));
        }
        let mut files = HashSet::new();
        let mut train_scenes = HashSet::new();
        let mut test_scenes = HashSet::new();
        for s in &self.samples {
            if !files.insert(&s.file) {
                return Err(Error::Parse(format!("file {} listed twice", s.file)));
            }
            match s.split {
                SplitTag::Train => {
                    train_scenes.insert(s.scene_id);
                }
                SplitTag::Test => {
                    test_scenes.insert(s.scene_id);
                }
                SplitTag::Unassigned => {}
            }
        }
        if let Some(id) = train_scenes.intersection(&test_scenes).next() {
            return Err(Error::Parse(format!("scene {id} appears in both train and test")));
        }
        Ok(())
    }
}

pub fn encode_sample(map: &ChannelMap) -> Vec<u8> {
    let mut buf = Vec::with_capacity(SAMPLE_HEADER_LEN + 4 * map.data().len());
    buf.extend_from_slice(SAMPLE_MAGIC);
    buf.extend_from_slice(&SAMPLE_VERSION.to_le_bytes());
    for d in [NUM_CHANNELS, map.height(), map.width()] {
        buf.extend_from_slice(&(d as u32).to_le_bytes());
    }
    buf.extend_from_slice(&[0u8; 10]);
    for v in map.data() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    buf
}

fn read_u32(b: &[u8]) -> usize {
    u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize
}

/// Parses and checks a sample header, returning `[C, H, W]`.
pub fn decode_header(header: &[u8]) -> Result<[usize; 3]> {
    if header.len() < SAMPLE_HEADER_LEN {
        return Err(Error::Parse("sample header truncated".into()));
    }
    if &header[..4] != SAMPLE_MAGIC {
        return Err(Error::Parse("bad sample magic".into()));
    }
    let version = u16::from_le_bytes([header[4], header[5]]);
    if version != SAMPLE_VERSION {
        return Err(Error::Version {
            found: version as u32,
            expected: SAMPLE_VERSION as u32,
        });
    }
    Ok([read_u32(&header[6..]), read_u32(&header[10..]), read_u32(&header[14..])])
}

pub fn decode_sample(bytes: &[u8], meta: MapMeta) -> Result<ChannelMap> {
    let [c, h, w] = decode_header(bytes)?;
    if c != NUM_CHANNELS {
        return Err(Error::shape(format!("sample has {c} channels, expected 7")));
    }
    let payload = &bytes[SAMPLE_HEADER_LEN..];
    if payload.len() != 4 * c * h * w {
        return Err(Error::shape(format!(
            "payload of {} bytes does not match {c}x{h}x{w}",
            payload.len()
        )));
    }
    let data = payload
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect();
    ChannelMap::new(h, w, data, meta)
}

/// Writes `maps[i]` for every manifest entry `i` plus `manifest.json`.
pub fn save_dataset(dir: &Path, manifest: &DatasetManifest, maps: &[ChannelMap]) -> Result<()> {
    if manifest.samples.len() != maps.len() {
        return Err(Error::invalid(format!(
            "manifest lists {} samples but {} maps were given",
            manifest.samples.len(),
            maps.len()
        )));
    }
    manifest.validate()?;
    fs::create_dir_all(dir)?;
    for (entry, map) in manifest.samples.iter().zip(maps) {
        let found = [NUM_CHANNELS, map.height(), map.width()];
        if entry.shape != found {
            return Err(Error::SampleShape {
                sample: entry.file.clone(),
                declared: entry.shape,
                found,
            });
        }
        fs::write(dir.join(&entry.file), encode_sample(map))?;
    }
    let mut f = fs::File::create(dir.join(MANIFEST_FILE))?;
    f.write_all(serde_json::to_string_pretty(manifest)?.as_bytes())?;
    f.write_all(b"\n")?;
    Ok(())
}

/// A dataset whose manifest and sample headers have been verified; sample
/// payloads are read on demand.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub dir: PathBuf,
    pub manifest: DatasetManifest,
}

pub fn load_dataset(dir: &Path) -> Result<Dataset> {
    let path = dir.join(MANIFEST_FILE);
    if !path.exists() {
        return Err(Error::MissingFile(path));
    }
    let text = fs::read_to_string(&path)?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    // Report version problems before schema problems.
    if let Some(v) = value.get("format_version").and_then(|v| v.as_u64()) {
        if v != MANIFEST_VERSION as u64 {
            return Err(Error::Version {
                found: v as u32,
                expected: MANIFEST_VERSION,
            });
        }
    }
    let manifest: DatasetManifest =
        serde_json::from_value(value).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    manifest.validate()?;

    for entry in &manifest.samples {
        let file = dir.join(&entry.file);
        if !file.exists() {
            return Err(Error::MissingFile(file));
        }
        let mut header = [0u8; SAMPLE_HEADER_LEN];
        let mut f = fs::File::open(&file)?;
        f.read_exact(&mut header)
            .map_err(|_| Error::Parse(format!("{}: header truncated", entry.file)))?;
        let found = decode_header(&header)?;
        let len = f.metadata()?.len() as usize;
        let payload_ok = len == SAMPLE_HEADER_LEN + 4 * found.iter().product::<usize>();
        if found != entry.shape || !payload_ok {
            return Err(Error::SampleShape {
                sample: entry.file.clone(),
                declared: entry.shape,
                found,
            });
        }
    }
    Ok(Dataset {
        dir: dir.to_path_buf(),
        manifest,
    })
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.manifest.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.manifest.samples.is_empty()
    }

    pub fn load_entry(&self, entry: &SampleEntry) -> Result<ChannelMap> {
        let bytes = fs::read(self.dir.join(&entry.file))?;
        let map = decode_sample(&bytes, entry.meta())?;
        let found = [NUM_CHANNELS, map.height(), map.width()];
        if found != entry.shape {
            return Err(Error::SampleShape {
                sample: entry.file.clone(),
                declared: entry.shape,
                found,
            });
        }
        Ok(map)
    }

    pub fn load_sample(&self, index: usize) -> Result<ChannelMap> {
        let entry = self
            .manifest
            .samples
            .get(index)
            .ok_or_else(|| Error::invalid(format!("no sample {index}")))?;
        self.load_entry(entry)
    }

    pub fn load_split(&self, tag: SplitTag) -> Result<Vec<ChannelMap>> {
        self.manifest.with_split(tag).map(|e| self.load_entry(e)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout() {
        let map = ChannelMap::zeros(2, 3, MapMeta::default());
        let bytes = encode_sample(&map);
        assert_eq!(bytes.len(), 28 + 4 * 7 * 6);
        assert_eq!(&bytes[..4], b"CSRD");
        assert_eq!(&bytes[4..6], &[1, 0]);
        assert_eq!(&bytes[6..10], &[7, 0, 0, 0]);
        assert_eq!(&bytes[10..14], &[2, 0, 0, 0]);
        assert_eq!(&bytes[14..18], &[3, 0, 0, 0]);
        assert!(bytes[18..28].iter().all(|&b| b == 0));
    }

    #[test]
    fn decode_rejects_bad_magic_and_short_payload() {
        let map = ChannelMap::zeros(2, 2, MapMeta::default());
        let mut bytes = encode_sample(&map);
        assert!(decode_sample(&bytes[..40], MapMeta::default()).is_err());
        bytes[0] = b'X';
        assert!(matches!(decode_sample(&bytes, MapMeta::default()), Err(Error::Parse(_))));
    }
}
