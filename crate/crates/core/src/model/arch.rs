use serde::{Deserialize, Serialize};

use crate::dataset::{Channel, NUM_CHANNELS};
use crate::diffcore::KERNEL_SIZE;
use crate::error::{Error, Result};

pub const NUM_TASKS: usize = 6;

/// The six prediction targets, in head order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Task {
    #[serde(rename = "PL")]
    PathLoss,
    #[serde(rename = "Rp")]
    PowerRatio,
    #[serde(rename = "DS")]
    DelaySpread,
    #[serde(rename = "phi")]
    AzimuthSpread,
    #[serde(rename = "theta")]
    ElevationSpread,
    #[serde(rename = "LOS")]
    LosClass,
}

impl Task {
    pub const ALL: [Task; NUM_TASKS] = [
        Task::PathLoss,
        Task::PowerRatio,
        Task::DelaySpread,
        Task::AzimuthSpread,
        Task::ElevationSpread,
        Task::LosClass,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn channel(self) -> Channel {
        match self {
            Task::PathLoss => Channel::PathLoss,
            Task::PowerRatio => Channel::PowerRatio,
            Task::DelaySpread => Channel::DelaySpread,
            Task::AzimuthSpread => Channel::AzimuthSpread,
            Task::ElevationSpread => Channel::ElevationSpread,
            Task::LosClass => Channel::LosClass,
        }
    }

    pub fn name(self) -> &'static str {
        self.channel().name()
    }

    pub fn is_regression(self) -> bool {
        self != Task::LosClass
    }

    pub fn parse(s: &str) -> Result<Self> {
        Task::ALL
            .into_iter()
            .find(|t| t.name().eq_ignore_ascii_case(s) || (s.eq_ignore_ascii_case("los") && *t == Task::LosClass))
            .ok_or_else(|| Error::invalid(format!("unknown task {s:?}")))
    }
}

/// Channel schedule of the network.
///
/// Each backbone block maps `in_channels → block_mid → in_channels`; each
/// head maps `in_channels → head_mid → out` with `out` 1 for regression
/// targets and `class_channels` for the classifier.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ArchConfig {
    pub n_blocks: usize,
    pub in_channels: usize,
    pub block_mid: usize,
    pub head_mid: usize,
    pub class_channels: usize,
    pub residual: bool,
}

impl Default for ArchConfig {
    fn default() -> Self {
        Self {
            n_blocks: 3,
            in_channels: NUM_CHANNELS,
            block_mid: 8,
            head_mid: 4,
            class_channels: 3,
            residual: true,
        }
    }
}

impl ArchConfig {
    /// Same depth without the residual add and with constant block width.
    pub fn flat() -> Self {
        Self {
            block_mid: NUM_CHANNELS,
            residual: false,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_blocks == 0 {
            return Err(Error::invalid("the backbone needs at least one block"));
        }
        if self.in_channels != NUM_CHANNELS {
            return Err(Error::invalid(format!(
                "input maps have {NUM_CHANNELS} channels, config says {}",
                self.in_channels
            )));
        }
        if self.head_mid == 0 {
            return Err(Error::invalid("head width must be positive"));
        }
        if self.class_channels != 3 {
            return Err(Error::invalid("the classifier separates exactly LOS, NLOS and NaN"));
        }
        if self.residual && self.block_mid <= self.in_channels {
            return Err(Error::invalid(format!(
                "residual blocks widen then narrow: block_mid {} must exceed {}",
                self.block_mid, self.in_channels
            )));
        }
        if !self.residual && self.block_mid == 0 {
            return Err(Error::invalid("block width must be positive"));
        }
        Ok(())
    }

    pub fn head_out(&self, task: Task) -> usize {
        if task.is_regression() {
            1
        } else {
            self.class_channels
        }
    }

    /// Closed-form count of trainable scalars, including one log-sigma per task.
    pub fn param_count(&self) -> usize {
        let k2 = KERNEL_SIZE * KERNEL_SIZE;
        let conv = |co: usize, ci: usize| co * ci * k2 + co;
        let c = self.in_channels;
        let block = conv(self.block_mid, c) + conv(c, self.block_mid);
        let heads: usize = Task::ALL
            .iter()
            .map(|&t| conv(self.head_mid, c) + conv(self.head_out(t), self.head_mid))
            .sum();
        self.n_blocks * block + heads + NUM_TASKS
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_count() {
        let c = ArchConfig::default();
        c.validate().unwrap();
        // blocks 3 * (7*8*9+8 + 8*7*9+7), heads 6 * (7*4*9+4) + 8 * (4*9+1), six log-sigmas
        assert_eq!(c.param_count(), 3 * 1023 + 6 * 256 + 8 * 37 + 6);
        assert_eq!(c.param_count(), 4907);
    }

    #[test]
    fn flat_is_valid_but_narrow_residual_is_not() {
        ArchConfig::flat().validate().unwrap();
        let bad = ArchConfig {
            block_mid: 7,
            ..ArchConfig::default()
        };
        assert!(bad.validate().is_err());
        let zero = ArchConfig {
            n_blocks: 0,
            ..ArchConfig::default()
        };
        assert!(zero.validate().is_err());
    }

    #[test]
    fn task_names_parse() {
        for t in Task::ALL {
            assert_eq!(Task::parse(t.name()).unwrap(), t);
        }
        assert_eq!(Task::parse("los").unwrap(), Task::LosClass);
        assert!(Task::parse("snr").is_err());
    }
}
