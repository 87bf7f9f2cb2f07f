use serde::{Deserialize, Serialize};

use crate::dataset::{degrade_on, Channel, ChannelMap, Lattice, LosState, Normalization, REGRESSION_TARGETS};
use crate::error::{Error, Result};
use crate::loss::{build_masks_on, MaskPair};
use crate::model::ModelOutput;

/// A prediction in physical units: five regression planes in target order
/// and a class index (LOS 0, NLOS 1, NaN 2) per cell.
#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub h: usize,
    pub w: usize,
    pub regression: Vec<Vec<f32>>,
    pub class: Vec<u8>,
}

impl Prediction {
    pub fn from_output(out: &ModelOutput, norm: &Normalization) -> Self {
        let [_, _, h, w] = out.class_prob.shape();
        let regression = REGRESSION_TARGETS
            .iter()
            .zip(&out.regression)
            .map(|(&ch, g)| {
                let r = norm.range(ch);
                g.plane(0, 0).iter().map(|&v| r.inverse(v)).collect()
            })
            .collect();
        let p = &out.class_prob;
        let class = (0..h * w)
            .map(|i| {
                let mut best = 0;
                for k in 1..p.c() {
                    if p.plane(0, k)[i] > p.plane(0, best)[i] {
                        best = k;
                    }
                }
                best as u8
            })
            .collect();
        Self {
            h,
            w,
            regression,
            class,
        }
    }

    /// Reads a map's channels as if they were predictions.
    pub fn from_map(map: &ChannelMap) -> Result<Self> {
        let regression = REGRESSION_TARGETS.iter().map(|&c| map.channel(c).to_vec()).collect();
        let class = map
            .channel(Channel::LosClass)
            .iter()
            .map(|&c| {
                LosState::from_code(c)
                    .map(|s| s.class_index() as u8)
                    .ok_or_else(|| Error::invalid(format!("bad LOS code {c}")))
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            h: map.height(),
            w: map.width(),
            regression,
            class,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetMetrics {
    pub target: String,
    pub unit: String,
    pub mae: f64,
    pub stde: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub model_id: String,
    pub scale: usize,
    pub samples: usize,
    pub valid_cells: u64,
    /// PL, Rp, DS, phi, theta.
    pub targets: Vec<TargetMetrics>,
    /// LOS vs NLOS over valid cells.
    pub accuracy: f64,
}

impl MetricsReport {
    pub fn target(&self, ch: Channel) -> Option<&TargetMetrics> {
        self.targets.iter().find(|t| t.target == ch.name())
    }

    pub fn mae(&self, ch: Channel) -> f64 {
        self.target(ch).map_or(f64::NAN, |t| t.mae)
    }

    pub fn stde(&self, ch: Channel) -> f64 {
        self.target(ch).map_or(f64::NAN, |t| t.stde)
    }
}

#[derive(Clone, Copy, Debug, Default)]
struct Welford {
    n: u64,
    mean: f64,
    m2: f64,
    abs_sum: f64,
}

impl Welford {
    fn push(&mut self, e: f64) {
        self.n += 1;
        let d = e - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (e - self.mean);
        self.abs_sum += e.abs();
    }

    fn mae(&self) -> f64 {
        self.abs_sum / self.n as f64
    }

    /// Population standard deviation of the signed error.
    fn stde(&self) -> f64 {
        (self.m2 / self.n as f64).max(0.0).sqrt()
    }
}

/// Pools errors over many samples. Only cells where both masks equal 1 are
/// counted.
#[derive(Clone, Debug, Default)]
pub struct MetricsAccumulator {
    errors: [Welford; 5],
    correct: u64,
    cells: u64,
    samples: usize,
}

impl MetricsAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, pred: &Prediction, hr: &ChannelMap, masks: &MaskPair) -> Result<()> {
        let (h, w) = (hr.height(), hr.width());
        if (pred.h, pred.w) != (h, w) || (masks.h, masks.w) != (h, w) {
            return Err(Error::shape(format!(
                "prediction {}x{}, truth {h}x{w}, masks {}x{}",
                pred.h, pred.w, masks.h, masks.w
            )));
        }
        let truth_class = hr.channel(Channel::LosClass);
        for i in 0..h * w {
            if !masks.is_valid(i) {
                continue;
            }
            for (k, &ch) in REGRESSION_TARGETS.iter().enumerate() {
                self.errors[k].push(pred.regression[k][i] as f64 - hr.channel(ch)[i] as f64);
            }
            let truth = LosState::from_code(truth_class[i])
                .ok_or_else(|| Error::invalid(format!("bad LOS code {}", truth_class[i])))?;
            if pred.class[i] as usize == truth.class_index() {
                self.correct += 1;
            }
            self.cells += 1;
        }
        self.samples += 1;
        Ok(())
    }

    pub fn finish(&self, model_id: &str, scale: usize) -> Result<MetricsReport> {
        if self.cells == 0 {
            return Err(Error::NoValidCells);
        }
        let targets = REGRESSION_TARGETS
            .iter()
            .zip(&self.errors)
            .map(|(&ch, e)| TargetMetrics {
                target: ch.name().into(),
                unit: ch.unit().into(),
                mae: e.mae(),
                stde: e.stde(),
            })
            .collect();
        Ok(MetricsReport {
            model_id: model_id.into(),
            scale,
            samples: self.samples,
            valid_cells: self.cells,
            targets,
            accuracy: self.correct as f64 / self.cells as f64,
        })
    }
}

pub fn compute_metrics(pred: &Prediction, hr: &ChannelMap, masks: &MaskPair, model_id: &str) -> Result<MetricsReport> {
    let mut acc = MetricsAccumulator::new();
    acc.add(pred, hr, masks)?;
    acc.finish(model_id, masks.scale)
}

/// The degraded map itself scored against the high-resolution map.
pub fn bilinear_baseline(hr: &ChannelMap, scale: usize) -> Result<MetricsReport> {
    bilinear_baseline_set(std::slice::from_ref(hr), scale)
}

/// Baseline pooled over a set of maps.
///
/// At scale 1 every cell is an anchor and nothing is reconstructed, so the
/// anchor exclusion is dropped and the score covers all outdoor cells.
pub fn bilinear_baseline_set(maps: &[ChannelMap], scale: usize) -> Result<MetricsReport> {
    let lattice = Lattice::new(scale)?;
    let mut acc = MetricsAccumulator::new();
    for hr in maps {
        let lr = degrade_on(hr, lattice)?;
        let mut masks = build_masks_on(hr, lattice)?;
        if scale == 1 {
            masks.m_gt.fill(1.0);
        }
        acc.add(&Prediction::from_map(&lr.map)?, hr, &masks)?;
    }
    acc.finish("bilinear", scale)
}
