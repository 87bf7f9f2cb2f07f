use serde::{Deserialize, Serialize};

use super::map::{Channel, NUM_CHANNELS};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffineRange {
    pub channel: Channel,
    pub lo: f32,
    pub hi: f32,
}

impl AffineRange {
    pub fn forward(&self, v: f32) -> f32 {
        (v - self.lo) / (self.hi - self.lo)
    }

    pub fn inverse(&self, u: f32) -> f32 {
        self.lo + u * (self.hi - self.lo)
    }

    /// Physical units per normalized unit.
    pub fn span(&self) -> f32 {
        self.hi - self.lo
    }
}

/// Per-channel affine map onto [0, 1]. The domain of every channel covers
/// both its normal range and its NaN sentinel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub ranges: Vec<AffineRange>,
}

impl Default for Normalization {
    fn default() -> Self {
        let r = |channel, lo, hi| AffineRange { channel, lo, hi };
        Self {
            ranges: vec![
                r(Channel::Height, 0.0, 150.0),
                r(Channel::PathLoss, -200.0, 200.0),
                r(Channel::PowerRatio, -30.0, 100.0),
                r(Channel::DelaySpread, -100.0, 500.0),
                r(Channel::AzimuthSpread, -360.0, 360.0),
                r(Channel::ElevationSpread, -180.0, 180.0),
                r(Channel::LosClass, -1.0, 1.0),
            ],
        }
    }
}

impl Normalization {
    pub fn range(&self, c: Channel) -> &AffineRange {
        &self.ranges[c.index()]
    }

    pub fn validate(&self) -> bool {
        self.ranges.len() == NUM_CHANNELS
            && self
                .ranges
                .iter()
                .enumerate()
                .all(|(i, r)| r.channel.index() == i && r.hi > r.lo)
    }

    /// Normalizes a channel-major 7×H×W payload.
    pub fn normalize(&self, data: &[f32], plane: usize) -> Vec<f32> {
        let mut out = Vec::with_capacity(data.len());
        for (c, chunk) in data.chunks(plane).enumerate() {
            let r = &self.ranges[c];
            out.extend(chunk.iter().map(|&v| r.forward(v)));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sentinels_and_ranges_land_in_unit_interval() {
        let n = Normalization::default();
        assert!(n.validate());
        for ch in &Channel::ALL[1..] {
            let r = n.range(*ch);
            let (lo, hi) = ch.normal_range();
            for v in [lo, hi, ch.sentinel()] {
                let u = r.forward(v);
                assert!((0.0..=1.0).contains(&u), "{ch:?} {v} -> {u}");
                assert!((r.inverse(u) - v).abs() < 1e-4);
            }
        }
    }
}
