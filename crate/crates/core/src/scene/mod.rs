//! Synthetic urban scenes and a lightweight propagation model that stands in
//! for a full ray tracer.
//!
//! A [`Scene`] is a raster of axis-aligned building prisms plus a rooftop
//! transmitter. [`line_of_sight`] classifies each receiver cell and
//! [`trace_channel`] produces the six channel characteristics for it;
//! [`render_maps`] assembles the whole 7-channel [`ChannelMap`].

mod los;
pub mod noise;
mod propagation;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{Channel, ChannelMap, LosState, MapMeta};
use crate::error::{Error, Result};

pub use los::line_of_sight;
pub use propagation::{
    multipath_power_ratio_db, trace_channel, ChannelSample, PropagationParams, RX_HEIGHT_M,
};

pub const MIN_GRID: usize = 16;
pub const MAX_BUILDING_HEIGHT_M: f32 = 150.0;
pub const TX_HEIGHT_RANGE_M: (f32, f32) = (30.0, 50.0);
pub const COVERAGE_RANGE: (f32, f32) = (0.10, 0.60);

const NO_BUILDING: u32 = u32::MAX;

/// Axis-aligned building footprint in cell coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Building {
    pub row: usize,
    pub col: usize,
    pub rows: usize,
    pub cols: usize,
    pub height_m: f32,
}

impl Building {
    pub fn contains(&self, row: usize, col: usize) -> bool {
        row >= self.row && row < self.row + self.rows && col >= self.col && col < self.col + self.cols
    }

    pub fn area(&self) -> usize {
        self.rows * self.cols
    }

    fn overlaps_with_gap(&self, other: &Building, gap: usize) -> bool {
        let r0 = self.row.saturating_sub(gap);
        let c0 = self.col.saturating_sub(gap);
        let r1 = self.row + self.rows + gap;
        let c1 = self.col + self.cols + gap;
        other.row < r1 && other.row + other.rows > r0 && other.col < c1 && other.col + other.cols > c0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transmitter {
    pub row: usize,
    pub col: usize,
    pub height_m: f32,
}

/// Randomization knobs for [`generate_scene`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SceneParams {
    pub cell_size_m: f32,
    /// Target footprint coverage is drawn uniformly from this range.
    pub coverage: (f32, f32),
    /// Footprint side length range in cells.
    pub building_side: (usize, usize),
    /// Minimum free cells between footprints (streets).
    pub street_gap: usize,
    /// Height range of ordinary buildings.
    pub building_height_m: (f32, f32),
    pub tx_height_m: (f32, f32),
    /// Antenna height above the transmitter's roof.
    pub tx_mast_m: f32,
    pub max_attempts: usize,
    pub max_placements: usize,
}

impl Default for SceneParams {
    fn default() -> Self {
        Self {
            cell_size_m: 5.0,
            coverage: (0.18, 0.40),
            building_side: (2, 7),
            street_gap: 1,
            building_height_m: (5.0, 30.0),
            tx_height_m: TX_HEIGHT_RANGE_M,
            tx_mast_m: 3.0,
            max_attempts: 32,
            max_placements: 4000,
        }
    }
}

impl SceneParams {
    pub fn validate(&self) -> Result<()> {
        let (c0, c1) = self.coverage;
        if !(COVERAGE_RANGE.0..=COVERAGE_RANGE.1).contains(&c0)
            || !(COVERAGE_RANGE.0..=COVERAGE_RANGE.1).contains(&c1)
            || c0 > c1
        {
            return Err(Error::invalid(format!("coverage range {c0}..{c1} outside [0.10, 0.60]")));
        }
        if self.building_side.0 == 0 || self.building_side.0 > self.building_side.1 {
            return Err(Error::invalid("building_side must satisfy 1 <= min <= max"));
        }
        let (h0, h1) = self.building_height_m;
        if !(h0 > 0.0 && h0 <= h1 && h1 <= MAX_BUILDING_HEIGHT_M) {
            return Err(Error::invalid("building heights must lie in (0, 150] m"));
        }
        let (t0, t1) = self.tx_height_m;
        if !(TX_HEIGHT_RANGE_M.0 <= t0 && t0 <= t1 && t1 <= TX_HEIGHT_RANGE_M.1) {
            return Err(Error::invalid("tx height range must lie in [30, 50] m"));
        }
        if !(self.tx_mast_m >= 0.0 && self.tx_mast_m < t0) {
            return Err(Error::invalid("tx mast must be shorter than the tx height"));
        }
        if !(self.cell_size_m > 0.0) {
            return Err(Error::invalid("cell size must be positive"));
        }
        if self.max_attempts == 0 || self.max_placements == 0 {
            return Err(Error::invalid("attempt budgets must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scene {
    grid_h: usize,
    grid_w: usize,
    cell_size_m: f32,
    buildings: Vec<Building>,
    tx: Transmitter,
    seed: Option<u64>,
    heights: Vec<f32>,
    owner: Vec<u32>,
}

impl Scene {
    /// Builds a scene from explicit parts. Checks geometry only; the
    /// coverage and transmitter-placement rules of generated scenes are
    /// checked by [`Scene::check_generated`].
    pub fn new(
        grid_h: usize,
        grid_w: usize,
        cell_size_m: f32,
        buildings: Vec<Building>,
        tx: Transmitter,
    ) -> Result<Self> {
        if grid_h == 0 || grid_w == 0 {
            return Err(Error::invalid("empty grid"));
        }
        if !(cell_size_m > 0.0) {
            return Err(Error::invalid("cell size must be positive"));
        }
        let mut heights = vec![0.0f32; grid_h * grid_w];
        let mut owner = vec![NO_BUILDING; grid_h * grid_w];
        for (id, b) in buildings.iter().enumerate() {
            if b.rows == 0 || b.cols == 0 || b.row + b.rows > grid_h || b.col + b.cols > grid_w {
                return Err(Error::invalid(format!("building {id} leaves the grid")));
            }
            if !(b.height_m > 0.0 && b.height_m <= MAX_BUILDING_HEIGHT_M) {
                return Err(Error::invalid(format!(
                    "building {id} height {} outside (0, 150] m",
                    b.height_m
                )));
            }
            for r in b.row..b.row + b.rows {
                for c in b.col..b.col + b.cols {
                    let i = r * grid_w + c;
                    if b.height_m > heights[i] {
                        heights[i] = b.height_m;
                        owner[i] = id as u32;
                    }
                }
            }
        }
        if tx.row >= grid_h || tx.col >= grid_w {
            return Err(Error::invalid("transmitter outside grid"));
        }
        if !(tx.height_m > heights[tx.row * grid_w + tx.col]) {
            return Err(Error::invalid("transmitter must sit above its roof"));
        }
        Ok(Self {
            grid_h,
            grid_w,
            cell_size_m,
            buildings,
            tx,
            seed: None,
            heights,
            owner,
        })
    }

    pub fn grid_h(&self) -> usize {
        self.grid_h
    }

    pub fn grid_w(&self) -> usize {
        self.grid_w
    }

    pub fn cell_size_m(&self) -> f32 {
        self.cell_size_m
    }

    pub fn buildings(&self) -> &[Building] {
        &self.buildings
    }

    pub fn tx(&self) -> Transmitter {
        self.tx
    }

    /// Seed that produced this scene, if it came from [`generate_scene`].
    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    /// Roof height of the tallest building covering a cell, 0 on open ground.
    pub fn height_at(&self, row: usize, col: usize) -> f32 {
        self.heights[row * self.grid_w + col]
    }

    pub fn is_building(&self, row: usize, col: usize) -> bool {
        self.owner[row * self.grid_w + col] != NO_BUILDING
    }

    pub(crate) fn owner_at(&self, row: usize, col: usize) -> Option<usize> {
        match self.owner[row * self.grid_w + col] {
            NO_BUILDING => None,
            id => Some(id as usize),
        }
    }

    /// Index of the building the transmitter stands on.
    pub fn tx_building(&self) -> Option<usize> {
        self.owner_at(self.tx.row, self.tx.col)
    }

    pub fn coverage(&self) -> f32 {
        let covered = self.owner.iter().filter(|&&o| o != NO_BUILDING).count();
        covered as f32 / self.owner.len() as f32
    }

    /// Same scene with one building removed. The transmitter's own building
    /// cannot be removed.
    pub fn without_building(&self, index: usize) -> Result<Scene> {
        if index >= self.buildings.len() {
            return Err(Error::invalid(format!("no building {index}")));
        }
        if self.tx_building() == Some(index) {
            return Err(Error::invalid("cannot remove the transmitter building"));
        }
        let mut buildings = self.buildings.clone();
        buildings.remove(index);
        let mut scene = Scene::new(self.grid_h, self.grid_w, self.cell_size_m, buildings, self.tx)?;
        scene.seed = self.seed;
        Ok(scene)
    }

    /// Checks the invariants every generated scene satisfies: coverage in
    /// [10%, 60%], transmitter height in [30, 50] m, and the transmitter
    /// building in the top decile of building heights.
    pub fn check_generated(&self) -> Result<()> {
        let cov = self.coverage();
        if !(COVERAGE_RANGE.0..=COVERAGE_RANGE.1).contains(&cov) {
            return Err(Error::invalid(format!("coverage {cov:.3} outside [0.10, 0.60]")));
        }
        if !(TX_HEIGHT_RANGE_M.0..=TX_HEIGHT_RANGE_M.1).contains(&self.tx.height_m) {
            return Err(Error::invalid(format!("tx height {} outside [30, 50] m", self.tx.height_m)));
        }
        let Some(tx_b) = self.tx_building() else {
            return Err(Error::invalid("transmitter is not on a building"));
        };
        let tx_h = self.buildings[tx_b].height_m;
        let taller = self.buildings.iter().filter(|b| b.height_m > tx_h).count();
        if taller > self.buildings.len() / 10 {
            return Err(Error::invalid("transmitter building is not in the top height decile"));
        }
        Ok(())
    }
}

/// Draws a random scene. Identical arguments always give an identical scene.
pub fn generate_scene(seed: u64, grid_h: usize, grid_w: usize, params: &SceneParams) -> Result<Scene> {
    if grid_h < MIN_GRID || grid_w < MIN_GRID {
        return Err(Error::invalid(format!("grid {grid_h}x{grid_w} smaller than {MIN_GRID}x{MIN_GRID}")));
    }
    params.validate()?;
    let mut last_reason = String::new();
    for attempt in 0..params.max_attempts {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(attempt as u64);
        match try_generate(&mut rng, grid_h, grid_w, params) {
            Ok(mut scene) => {
                scene.seed = Some(seed);
                return Ok(scene);
            }
            Err(reason) => last_reason = reason,
        }
    }
    Err(Error::InfeasibleScene {
        attempts: params.max_attempts,
        reason: last_reason,
    })
}

fn try_generate(
    rng: &mut ChaCha8Rng,
    grid_h: usize,
    grid_w: usize,
    params: &SceneParams,
) -> std::result::Result<Scene, String> {
    let (side_lo, side_hi) = params.building_side;
    let tx_side_lo = side_lo.max(3).min(grid_h / 4).min(grid_w / 4).max(1);
    let tx_side_hi = side_hi.max(tx_side_lo);

    // Transmitter building near the centre third of the region.
    let rows = rng.random_range(tx_side_lo..=tx_side_hi);
    let cols = rng.random_range(tx_side_lo..=tx_side_hi);
    let centre_r = rng.random_range(grid_h / 3..=(2 * grid_h / 3).max(grid_h / 3));
    let centre_c = rng.random_range(grid_w / 3..=(2 * grid_w / 3).max(grid_w / 3));
    let row = centre_r.saturating_sub(rows / 2).min(grid_h - rows);
    let col = centre_c.saturating_sub(cols / 2).min(grid_w - cols);
    let tx_height = rng.random_range(params.tx_height_m.0..=params.tx_height_m.1);
    let tx_roof = tx_height - params.tx_mast_m;
    let tx_building = Building {
        row,
        col,
        rows,
        cols,
        height_m: tx_roof,
    };
    let tx = Transmitter {
        row: row + rows / 2,
        col: col + cols / 2,
        height_m: tx_height,
    };

    let target = rng.random_range(params.coverage.0..=params.coverage.1);
    let cells = (grid_h * grid_w) as f32;
    let mut covered = tx_building.area();
    let mut buildings = vec![tx_building];
    let (h_lo, h_hi) = params.building_height_m;
    let h_hi = h_hi.min(tx_roof);
    let h_lo = h_lo.min(h_hi);

    for _ in 0..params.max_placements {
        if covered as f32 / cells >= target {
            break;
        }
        let rows = rng.random_range(side_lo..=side_hi).min(grid_h);
        let cols = rng.random_range(side_lo..=side_hi).min(grid_w);
        let cand = Building {
            row: rng.random_range(0..=grid_h - rows),
            col: rng.random_range(0..=grid_w - cols),
            rows,
            cols,
            height_m: rng.random_range(h_lo..=h_hi),
        };
        if buildings.iter().any(|b| b.overlaps_with_gap(&cand, params.street_gap)) {
            continue;
        }
        covered += cand.area();
        buildings.push(cand);
    }

    let scene = Scene::new(grid_h, grid_w, params.cell_size_m, buildings, tx).map_err(|e| e.to_string())?;
    scene.check_generated().map_err(|e| e.to_string())?;
    Ok(scene)
}

/// Renders every receiver cell of a scene into a 7-channel map with channel
/// order `[height, PL, R_p, DS, phi, theta, LOS code]`.
pub fn render_maps(scene: &Scene, noise_seed: u64) -> ChannelMap {
    render_maps_with(scene, noise_seed, &PropagationParams::default())
}

pub fn render_maps_with(scene: &Scene, noise_seed: u64, prop: &PropagationParams) -> ChannelMap {
    let (h, w) = (scene.grid_h(), scene.grid_w());
    let meta = MapMeta {
        scene_id: scene.seed().unwrap_or(0),
        scene_seed: scene.seed().unwrap_or(0),
        noise_seed,
        cell_size_m: scene.cell_size_m(),
        ..MapMeta::default()
    };
    let mut map = ChannelMap::zeros(h, w, meta);
    for r in 0..h {
        for c in 0..w {
            let s = propagation::trace_channel_with(scene, (r, c), noise_seed, prop);
            map.set(Channel::Height, r, c, scene.height_at(r, c));
            map.set(Channel::PathLoss, r, c, s.pl_db);
            map.set(Channel::PowerRatio, r, c, s.rp_db);
            map.set(Channel::DelaySpread, r, c, s.ds_ns);
            map.set(Channel::AzimuthSpread, r, c, s.phi_deg);
            map.set(Channel::ElevationSpread, r, c, s.theta_deg);
            map.set(Channel::LosClass, r, c, s.los.code());
        }
    }
    map
}

/// Counts of LOS, NLOS and NaN cells, handy for generator diagnostics.
pub fn los_census(map: &ChannelMap) -> [usize; 3] {
    let mut counts = [0usize; 3];
    for &v in map.channel(Channel::LosClass) {
        if let Some(state) = LosState::from_code(v) {
            counts[state.class_index()] += 1;
        }
    }
    counts
}
