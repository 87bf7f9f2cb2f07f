use serde::{Deserialize, Serialize};

use super::augment::Transform;
use crate::error::{Error, Result};

pub const NUM_CHANNELS: usize = 7;

/// Channels of a [`ChannelMap`], in storage order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Channel {
    Height,
    PathLoss,
    PowerRatio,
    DelaySpread,
    AzimuthSpread,
    ElevationSpread,
    LosClass,
}

/// The five regression targets, in report order.
pub const REGRESSION_TARGETS: [Channel; 5] = [
    Channel::PathLoss,
    Channel::PowerRatio,
    Channel::DelaySpread,
    Channel::AzimuthSpread,
    Channel::ElevationSpread,
];

impl Channel {
    pub const ALL: [Channel; NUM_CHANNELS] = [
        Channel::Height,
        Channel::PathLoss,
        Channel::PowerRatio,
        Channel::DelaySpread,
        Channel::AzimuthSpread,
        Channel::ElevationSpread,
        Channel::LosClass,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Channel::Height => "height",
            Channel::PathLoss => "PL",
            Channel::PowerRatio => "Rp",
            Channel::DelaySpread => "DS",
            Channel::AzimuthSpread => "phi",
            Channel::ElevationSpread => "theta",
            Channel::LosClass => "LOS/NLOS",
        }
    }

    pub fn unit(self) -> &'static str {
        match self {
            Channel::Height => "m",
            Channel::PathLoss | Channel::PowerRatio => "dB",
            Channel::DelaySpread => "ns",
            Channel::AzimuthSpread | Channel::ElevationSpread => "deg",
            Channel::LosClass => "",
        }
    }

    /// Value stored for receivers inside buildings. The height channel has
    /// no sentinel and keeps the roof height.
    pub fn sentinel(self) -> f32 {
        match self {
            Channel::Height => f32::NAN,
            Channel::PathLoss => 200.0,
            Channel::PowerRatio => 100.0,
            Channel::DelaySpread => -100.0,
            Channel::AzimuthSpread => -360.0,
            Channel::ElevationSpread => -180.0,
            Channel::LosClass => 1.0,
        }
    }

    /// Nominal `(low, high)` endpoints of the normal range.
    pub fn normal_range(self) -> (f32, f32) {
        match self {
            Channel::Height => (0.0, 150.0),
            Channel::PathLoss => (-200.0, 0.0),
            Channel::PowerRatio => (-30.0, 0.0),
            Channel::DelaySpread => (0.0, 500.0),
            Channel::AzimuthSpread => (0.0, 360.0),
            Channel::ElevationSpread => (0.0, 180.0),
            Channel::LosClass => (-1.0, 0.0),
        }
    }

    /// Membership in the normal range. Clamping puts out-of-threshold
    /// values exactly on the range minimum (PL, R_p) or maximum (DS), so
    /// those endpoints are admitted.
    pub fn in_normal_range(self, v: f32) -> bool {
        let (lo, hi) = self.normal_range();
        match self {
            Channel::Height => (lo..=hi).contains(&v),
            Channel::PathLoss => v >= lo && v < hi,
            Channel::PowerRatio => (lo..=hi).contains(&v),
            Channel::DelaySpread => v > lo && v <= hi,
            Channel::AzimuthSpread | Channel::ElevationSpread => v >= lo && v < hi,
            Channel::LosClass => v == -1.0 || v == 0.0,
        }
    }
}

/// Propagation condition of a receiver cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LosState {
    Los,
    Nlos,
    Nan,
}

impl LosState {
    pub const ALL: [LosState; 3] = [LosState::Los, LosState::Nlos, LosState::Nan];

    /// Code stored in the LOS channel: -1 LOS, 0 NLOS, 1 NaN.
    pub fn code(self) -> f32 {
        match self {
            LosState::Los => -1.0,
            LosState::Nlos => 0.0,
            LosState::Nan => 1.0,
        }
    }

    pub fn from_code(code: f32) -> Option<Self> {
        match code {
            c if c == -1.0 => Some(LosState::Los),
            c if c == 0.0 => Some(LosState::Nlos),
            c if c == 1.0 => Some(LosState::Nan),
            _ => None,
        }
    }

    /// Index of the class in the classifier output.
    pub fn class_index(self) -> usize {
        match self {
            LosState::Los => 0,
            LosState::Nlos => 1,
            LosState::Nan => 2,
        }
    }

    pub fn from_class_index(i: usize) -> Self {
        Self::ALL[i]
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MapMeta {
    pub scene_id: u64,
    pub scene_seed: u64,
    pub noise_seed: u64,
    pub cell_size_m: f32,
    #[serde(default)]
    pub transform: Transform,
}

/// 7×H×W grid of channel characteristics, channel-major and row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelMap {
    h: usize,
    w: usize,
    data: Vec<f32>,
    pub meta: MapMeta,
}

impl ChannelMap {
    pub fn new(h: usize, w: usize, data: Vec<f32>, meta: MapMeta) -> Result<Self> {
        if h == 0 || w == 0 {
            return Err(Error::shape("empty map"));
        }
        if data.len() != NUM_CHANNELS * h * w {
            return Err(Error::shape(format!(
                "map payload has {} values, expected 7x{h}x{w}",
                data.len()
            )));
        }
        Ok(Self { h, w, data, meta })
    }

    pub fn zeros(h: usize, w: usize, meta: MapMeta) -> Self {
        Self {
            h,
            w,
            data: vec![0.0; NUM_CHANNELS * h * w],
            meta,
        }
    }

    pub fn height(&self) -> usize {
        self.h
    }

    pub fn width(&self) -> usize {
        self.w
    }

    pub fn plane_len(&self) -> usize {
        self.h * self.w
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn channel(&self, c: Channel) -> &[f32] {
        let n = self.plane_len();
        &self.data[c.index() * n..(c.index() + 1) * n]
    }

    pub fn channel_mut(&mut self, c: Channel) -> &mut [f32] {
        let n = self.plane_len();
        &mut self.data[c.index() * n..(c.index() + 1) * n]
    }

    pub fn get(&self, c: Channel, row: usize, col: usize) -> f32 {
        self.data[c.index() * self.plane_len() + row * self.w + col]
    }

    pub fn set(&mut self, c: Channel, row: usize, col: usize, v: f32) {
        let n = self.plane_len();
        self.data[c.index() * n + row * self.w + col] = v;
    }

    pub fn los_state(&self, row: usize, col: usize) -> Option<LosState> {
        LosState::from_code(self.get(Channel::LosClass, row, col))
    }

    /// Cell-wise check: NaN cells carry every sentinel, other cells keep
    /// every characteristic inside its normal range.
    pub fn check_invariants(&self) -> Result<()> {
        for r in 0..self.h {
            for c in 0..self.w {
                let height = self.get(Channel::Height, r, c);
                if !Channel::Height.in_normal_range(height) {
                    return Err(Error::invalid(format!("height {height} at ({r},{c})")));
                }
                let state = self
                    .los_state(r, c)
                    .ok_or_else(|| Error::invalid(format!("bad LOS code at ({r},{c})")))?;
                for ch in &Channel::ALL[1..6] {
                    let v = self.get(*ch, r, c);
                    let ok = if state == LosState::Nan {
                        v == ch.sentinel()
                    } else {
                        ch.in_normal_range(v)
                    };
                    if !ok {
                        return Err(Error::invalid(format!(
                            "{} = {v} at ({r},{c}) with state {state:?}",
                            ch.name()
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}
