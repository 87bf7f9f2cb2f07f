use serde::{Deserialize, Serialize};

use super::los::obstructions;
use super::noise::smooth_field;
use super::Scene;
use crate::dataset::{Channel, LosState};

pub const RX_HEIGHT_M: f32 = 2.0;

const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Bound on every noise term, in units of its standard deviation.
const NOISE_CLAMP: f64 = 3.0;

// Noise field salts, one per characteristic.
const SALT_SHADOW: u64 = 1;
const SALT_RP: u64 = 2;
const SALT_DS: u64 = 3;
const SALT_PHI: u64 = 4;
const SALT_THETA: u64 = 5;

/// Constants of the simplified propagation model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PropagationParams {
    pub carrier_ghz: f64,
    pub los_exponent: f64,
    pub nlos_exponent: f64,
    /// Extra loss per obstructing building.
    pub diffraction_db: f64,
    pub max_diffractions: usize,
    pub shadowing_sigma_db: f64,
    /// Direct-to-multipath power ratio next to the transmitter.
    pub k_factor_db: f64,
    /// Change of that ratio per metre of distance.
    pub k_factor_slope_db_per_m: f64,
    pub k_factor_sigma_db: f64,
    pub ds_los: SpreadModel,
    pub ds_nlos: SpreadModel,
    pub phi_los: SpreadModel,
    pub phi_nlos: SpreadModel,
    pub theta_los: SpreadModel,
    pub theta_nlos: SpreadModel,
}

/// `base + slope * d + per_blocker * blockers + sigma * noise`
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpreadModel {
    pub base: f64,
    pub slope_per_m: f64,
    pub per_blocker: f64,
    pub sigma: f64,
}

impl SpreadModel {
    const fn new(base: f64, slope_per_m: f64, per_blocker: f64, sigma: f64) -> Self {
        Self {
            base,
            slope_per_m,
            per_blocker,
            sigma,
        }
    }

    fn eval(&self, distance_m: f64, blockers: usize, noise: f64) -> f64 {
        self.base + self.slope_per_m * distance_m + self.per_blocker * blockers as f64 + self.sigma * noise
    }
}

impl Default for PropagationParams {
    fn default() -> Self {
        Self {
            carrier_ghz: 3.55,
            los_exponent: 2.2,
            nlos_exponent: 3.3,
            diffraction_db: 6.0,
            max_diffractions: 3,
            shadowing_sigma_db: 3.0,
            k_factor_db: 14.0,
            k_factor_slope_db_per_m: -0.035,
            k_factor_sigma_db: 2.5,
            ds_los: SpreadModel::new(25.0, 0.12, 0.0, 8.0),
            ds_nlos: SpreadModel::new(70.0, 0.25, 12.0, 15.0),
            phi_los: SpreadModel::new(12.0, 0.06, 0.0, 4.0),
            phi_nlos: SpreadModel::new(35.0, 0.10, 6.0, 8.0),
            theta_los: SpreadModel::new(4.0, 0.015, 0.0, 1.5),
            theta_nlos: SpreadModel::new(9.0, 0.03, 1.5, 3.0),
        }
    }
}

impl PropagationParams {
    /// Free-space loss at the 1 m reference distance.
    pub fn reference_loss_db(&self) -> f64 {
        20.0 * (4.0 * std::f64::consts::PI * self.carrier_ghz * 1e9 / SPEED_OF_LIGHT).log10()
    }
}

/// The six characteristics of one receiver cell.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChannelSample {
    pub pl_db: f32,
    pub rp_db: f32,
    pub ds_ns: f32,
    pub phi_deg: f32,
    pub theta_deg: f32,
    pub los: LosState,
}

impl ChannelSample {
    /// Sentinel sample of a receiver inside a building.
    pub fn nan() -> Self {
        let s = |c: Channel| c.sentinel();
        Self {
            pl_db: s(Channel::PathLoss),
            rp_db: s(Channel::PowerRatio),
            ds_ns: s(Channel::DelaySpread),
            phi_deg: s(Channel::AzimuthSpread),
            theta_deg: s(Channel::ElevationSpread),
            los: LosState::Nan,
        }
    }

    /// True when the sample is the NaN sentinel set or every field lies in
    /// its normal range; there is no third state.
    pub fn is_well_formed(&self) -> bool {
        if self.los == LosState::Nan {
            return *self == Self::nan();
        }
        Channel::PathLoss.in_normal_range(self.pl_db)
            && Channel::PowerRatio.in_normal_range(self.rp_db)
            && Channel::DelaySpread.in_normal_range(self.ds_ns)
            && Channel::AzimuthSpread.in_normal_range(self.phi_deg)
            && Channel::ElevationSpread.in_normal_range(self.theta_deg)
    }
}

/// Multipath power ratio in dB from linear ray powers, where `direct` is the
/// direct-path power and `rays` are all other rays. The ratio is the share
/// of total power not carried by the direct ray; it is clamped to
/// [-30, 0] dB (a lone direct ray gives -inf dB, which clamps to -30).
pub fn multipath_power_ratio_db(direct: f64, rays: &[f64]) -> f32 {
    let total = direct + rays.iter().sum::<f64>();
    if total <= 0.0 {
        return 0.0;
    }
    let ratio = (total - direct) / total;
    let db = 10.0 * ratio.log10();
    clamp_power_ratio(db)
}

fn clamp_power_ratio(db: f64) -> f32 {
    let (lo, hi) = Channel::PowerRatio.normal_range();
    if db.is_nan() || db <= lo as f64 {
        lo
    } else if db > hi as f64 {
        hi
    } else {
        db as f32
    }
}

fn bounded_noise(seed: u64, salt: u64, rx: (usize, usize)) -> f64 {
    smooth_field(seed, salt, rx.0, rx.1).clamp(-NOISE_CLAMP, NOISE_CLAMP)
}

/// Channel characteristics at receiver `rx` under default propagation
/// constants.
pub fn trace_channel(scene: &Scene, rx: (usize, usize), noise_seed: u64) -> ChannelSample {
    trace_channel_with(scene, rx, noise_seed, &PropagationParams::default())
}

pub(crate) fn trace_channel_with(
    scene: &Scene,
    rx: (usize, usize),
    noise_seed: u64,
    p: &PropagationParams,
) -> ChannelSample {
    assert!(rx.0 < scene.grid_h() && rx.1 < scene.grid_w(), "receiver outside grid");
    if scene.is_building(rx.0, rx.1) {
        return ChannelSample::nan();
    }
    let blockers = obstructions(scene, rx).len();
    let los = if blockers == 0 { LosState::Los } else { LosState::Nlos };

    let tx = scene.tx();
    let cs = scene.cell_size_m() as f64;
    let dy = (rx.0 as f64 - tx.row as f64) * cs;
    let dx = (rx.1 as f64 - tx.col as f64) * cs;
    let dz = tx.height_m as f64 - RX_HEIGHT_M as f64;
    let d = (dy * dy + dx * dx + dz * dz).sqrt().max(1.0);

    let shadow = p.shadowing_sigma_db * bounded_noise(noise_seed, SALT_SHADOW, rx);
    let loss = match los {
        LosState::Los => p.reference_loss_db() + 10.0 * p.los_exponent * d.log10(),
        _ => {
            p.reference_loss_db()
                + 10.0 * p.nlos_exponent * d.log10()
                + p.diffraction_db * blockers.min(p.max_diffractions) as f64
        }
    } + shadow;
    let pl_db = clamp_low(-loss, Channel::PathLoss);

    let rp_db = match los {
        LosState::Los => {
            let k_db = p.k_factor_db
                + p.k_factor_slope_db_per_m * d
                + p.k_factor_sigma_db * bounded_noise(noise_seed, SALT_RP, rx);
            let direct = 1.0;
            let scattered = direct * 10f64.powf(-k_db / 10.0);
            // ground bounce plus three wall reflections
            let rays = [0.5, 0.25, 0.15, 0.10].map(|share| share * scattered);
            multipath_power_ratio_db(direct, &rays)
        }
        // no direct ray: the scattered share is the whole power
        _ => multipath_power_ratio_db(0.0, &[1.0]),
    };

    let (ds_m, phi_m, theta_m) = match los {
        LosState::Los => (&p.ds_los, &p.phi_los, &p.theta_los),
        _ => (&p.ds_nlos, &p.phi_nlos, &p.theta_nlos),
    };
    let ds_ns = clamp_high(ds_m.eval(d, blockers, bounded_noise(noise_seed, SALT_DS, rx)), Channel::DelaySpread);
    let phi_deg = clamp_high(phi_m.eval(d, blockers, bounded_noise(noise_seed, SALT_PHI, rx)), Channel::AzimuthSpread);
    let theta_deg = clamp_high(
        theta_m.eval(d, blockers, bounded_noise(noise_seed, SALT_THETA, rx)),
        Channel::ElevationSpread,
    );

    ChannelSample {
        pl_db,
        rp_db,
        ds_ns,
        phi_deg,
        theta_deg,
        los,
    }
}

/// Values past the low end take the range minimum (path loss).
fn clamp_low(v: f64, channel: Channel) -> f32 {
    let (lo, hi) = channel.normal_range();
    if v <= lo as f64 {
        lo
    } else {
        (v as f32).min(hi - 0.01)
    }
}

/// Values past the high end take the range maximum (spreads).
fn clamp_high(v: f64, channel: Channel) -> f32 {
    let (lo, hi) = channel.normal_range();
    let hi_inclusive = channel.in_normal_range(hi);
    if v >= hi as f64 {
        if hi_inclusive {
            hi
        } else {
            hi - 0.01
        }
    } else if v <= lo as f64 {
        if channel.in_normal_range(lo) {
            lo
        } else {
            lo + 0.01
        }
    } else {
        v as f32
    }
}
