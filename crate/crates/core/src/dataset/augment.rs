use serde::{Deserialize, Serialize};

use super::degrade::Lattice;
use super::map::{ChannelMap, NUM_CHANNELS};
use crate::error::Result;

/// Dihedral transforms used for augmentation. Rotations are clockwise.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Transform {
    #[default]
    Identity,
    Rot90,
    Rot180,
    Rot270,
    FlipHorizontal,
    FlipVertical,
}

impl Transform {
    /// Identity first, then the five augmenting transforms.
    pub const ALL: [Transform; 6] = [
        Transform::Identity,
        Transform::Rot90,
        Transform::Rot180,
        Transform::Rot270,
        Transform::FlipHorizontal,
        Transform::FlipVertical,
    ];

    pub fn output_dims(self, h: usize, w: usize) -> (usize, usize) {
        match self {
            Transform::Rot90 | Transform::Rot270 => (w, h),
            _ => (h, w),
        }
    }

    /// Where source cell `(r, c)` of an `h`×`w` grid lands.
    pub fn map_point(self, h: usize, w: usize, r: usize, c: usize) -> (usize, usize) {
        match self {
            Transform::Identity => (r, c),
            Transform::Rot90 => (c, h - 1 - r),
            Transform::Rot180 => (h - 1 - r, w - 1 - c),
            Transform::Rot270 => (w - 1 - c, r),
            Transform::FlipHorizontal => (r, w - 1 - c),
            Transform::FlipVertical => (h - 1 - r, c),
        }
    }

    pub fn inverse(self) -> Transform {
        match self {
            Transform::Rot90 => Transform::Rot270,
            Transform::Rot270 => Transform::Rot90,
            t => t,
        }
    }

    /// Transforms a stack of `planes` row-major `h`×`w` planes.
    pub fn apply_planes<T: Copy + Default>(self, data: &[T], h: usize, w: usize) -> Vec<T> {
        let plane = h * w;
        let (_, ow) = self.output_dims(h, w);
        let mut out = vec![T::default(); data.len()];
        for (src, dst) in data.chunks(plane).zip(out.chunks_mut(plane)) {
            for r in 0..h {
                for c in 0..w {
                    let (nr, nc) = self.map_point(h, w, r, c);
                    dst[nr * ow + nc] = src[r * w + c];
                }
            }
        }
        out
    }

    pub fn apply_map(self, map: &ChannelMap) -> ChannelMap {
        let (h, w) = (map.height(), map.width());
        let (oh, ow) = self.output_dims(h, w);
        let data = self.apply_planes(map.data(), h, w);
        debug_assert_eq!(data.len(), NUM_CHANNELS * oh * ow);
        let mut meta = map.meta.clone();
        meta.transform = self.compose_after(meta.transform);
        ChannelMap::new(oh, ow, data, meta).expect("transform preserves payload size")
    }

    /// Lattice occupied by the anchors of an `h`×`w` map after transforming.
    pub fn apply_lattice(self, lattice: Lattice, h: usize, w: usize) -> Result<Lattice> {
        lattice.check_dims(h, w)?;
        let (r, c) = self.map_point(h, w, lattice.row_phase, lattice.col_phase);
        Lattice::with_phase(lattice.scale, r % lattice.scale, c % lattice.scale)
    }

    /// `self ∘ earlier` as a single transform (for provenance only).
    fn compose_after(self, earlier: Transform) -> Transform {
        // Probe a 2x3 grid to identify the composite.
        let (h, w) = (2, 3);
        let (h1, w1) = earlier.output_dims(h, w);
        let probe = |t: Transform| {
            (0..h)
                .flat_map(|r| (0..w).map(move |c| (r, c)))
                .map(|(r, c)| t.map_point(h, w, r, c))
                .collect::<Vec<_>>()
        };
        let composite: Vec<_> = (0..h)
            .flat_map(|r| (0..w).map(move |c| (r, c)))
            .map(|(r, c)| {
                let (r1, c1) = earlier.map_point(h, w, r, c);
                self.map_point(h1, w1, r1, c1)
            })
            .collect();
        Transform::ALL
            .into_iter()
            .find(|t| probe(*t) == composite)
            // Transpose-like composites are outside the six; keep the latest.
            .unwrap_or(self)
    }
}

/// Original plus three rotations and two flips of every map: exactly 6×.
pub fn augment(samples: &[ChannelMap]) -> Vec<ChannelMap> {
    samples
        .iter()
        .flat_map(|m| Transform::ALL.iter().map(move |t| t.apply_map(m)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::MapMeta;

    fn numbered(h: usize, w: usize) -> ChannelMap {
        let data = (0..7 * h * w).map(|i| i as f32).collect();
        ChannelMap::new(h, w, data, MapMeta::default()).unwrap()
    }

    #[test]
    fn six_outputs_per_input() {
        let maps = vec![numbered(4, 4), numbered(4, 4), numbered(4, 4)];
        assert_eq!(augment(&maps).len(), 18);
    }

    #[test]
    fn rot180_is_involution_and_inverse_undoes() {
        let m = numbered(4, 6);
        let twice = Transform::Rot180.apply_map(&Transform::Rot180.apply_map(&m));
        assert_eq!(twice.data(), m.data());
        for t in Transform::ALL {
            let back = t.inverse().apply_map(&t.apply_map(&m));
            assert_eq!(back.data(), m.data(), "{t:?}");
        }
    }

    #[test]
    fn rot90_moves_top_left_to_top_right() {
        let m = numbered(3, 3);
        let r = Transform::Rot90.apply_map(&m);
        // source (0,0) value 0 lands at (0, 2)
        assert_eq!(r.data()[2], 0.0);
        assert_eq!(r.meta.transform, Transform::Rot90);
    }

    #[test]
    fn lattice_phase_follows_transform() {
        let l = Lattice::new(4).unwrap();
        let t = Transform::Rot90.apply_lattice(l, 8, 8).unwrap();
        assert_eq!((t.row_phase, t.col_phase), (0, 3));
        let f = Transform::FlipVertical.apply_lattice(l, 8, 8).unwrap();
        assert_eq!((f.row_phase, f.col_phase), (3, 0));
    }
}
