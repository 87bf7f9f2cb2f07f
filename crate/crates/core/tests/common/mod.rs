//! Naive loop oracles and random fixtures shared by the integration tests and
//! the acceptance binary. Nothing here calls the library's numerical kernels.
#![allow(dead_code)]

use chansr::dataset::{Channel, ChannelMap, LosState, MapMeta, REGRESSION_TARGETS};
use chansr::diffcore::Grid4;
use chansr::eval::{compute_metrics, Prediction};
use chansr::loss::{build_masks, ce_task_loss, l1_task_loss, mtl_loss, MaskPair};
use chansr::dataset::degrade;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const ORACLE_TOL: f64 = 1e-6;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A map with random in-range values and roughly `nan_p` in-building cells.
pub fn random_map(rng: &mut ChaCha8Rng, h: usize, w: usize, nan_p: f64) -> ChannelMap {
    let mut map = ChannelMap::zeros(h, w, MapMeta::default());
    for r in 0..h {
        for c in 0..w {
            if rng.random_bool(nan_p) {
                map.set(Channel::Height, r, c, rng.random_range(3.0..60.0));
                for ch in REGRESSION_TARGETS {
                    map.set(ch, r, c, ch.sentinel());
                }
                map.set(Channel::LosClass, r, c, LosState::Nan.code());
            } else {
                map.set(Channel::PathLoss, r, c, rng.random_range(-160.0..-40.0));
                map.set(Channel::PowerRatio, r, c, rng.random_range(-30.0..0.0));
                map.set(Channel::DelaySpread, r, c, rng.random_range(1.0..499.0));
                map.set(Channel::AzimuthSpread, r, c, rng.random_range(0.0..359.0));
                map.set(Channel::ElevationSpread, r, c, rng.random_range(0.0..179.0));
                let los = if rng.random_bool(0.5) { LosState::Los } else { LosState::Nlos };
                map.set(Channel::LosClass, r, c, los.code());
            }
        }
    }
    map
}

fn naive_weights(hr: &ChannelMap, s: usize) -> Vec<f64> {
    let (h, w) = (hr.height(), hr.width());
    let mut out = vec![1.0; h * w];
    for r in 0..h {
        for c in 0..w {
            let mut k = 1.0f64;
            if hr.get(Channel::LosClass, r, c) == 1.0 {
                k *= 0.01f32 as f64;
            }
            if r % s == 0 && c % s == 0 {
                k *= 0.01f32 as f64;
            }
            out[r * w + c] = k;
        }
    }
    out
}

fn naive_valid(hr: &ChannelMap, s: usize) -> Vec<bool> {
    let w = hr.width();
    (0..hr.plane_len())
        .map(|i| hr.channel(Channel::LosClass)[i] != 1.0 && !((i / w) % s == 0 && (i % w) % s == 0))
        .collect()
}

pub fn naive_l1(pred: &[f64], target: &[f64], weights: &[f64], n: usize, hw: usize) -> f64 {
    let mut sum = 0.0;
    for i in 0..pred.len() {
        sum += (weights[i] * pred[i] - weights[i] * target[i]).abs();
    }
    n as f64 / (hw as f64 * hw as f64) * sum
}

/// `prob` and `onehot` are class-major `[k][cell]`.
pub fn naive_ce(prob: &[Vec<f64>], onehot: &[Vec<f64>], weights: &[f64], n: usize, hw: usize) -> f64 {
    let mut sum = 0.0;
    for k in 0..prob.len() {
        for i in 0..hw {
            sum += weights[i] * onehot[k][i] * prob[k][i].max(1e-12).ln();
        }
    }
    -(n as f64) / (hw as f64 * hw as f64) * sum
}

pub fn naive_mtl(losses: &[f64], s: &[f64]) -> f64 {
    let mut total = 0.0;
    for m in 0..losses.len() {
        let sigma = s[m].exp();
        total += losses[m] / (2.0 * sigma * sigma) + sigma.ln();
    }
    total
}

/// Bilinear value at `(r, c)` from anchors on multiples of `s`, clamped to
/// the last anchor row/column. Returns the value and the largest operand
/// magnitude involved.
fn naive_bilinear(plane: &[f32], h: usize, w: usize, s: usize, r: usize, c: usize) -> (f64, f64) {
    let last_r = (h - 1) / s * s;
    let last_c = (w - 1) / s * s;
    let bracket = |p: usize, last: usize| -> (usize, usize, f64) {
        if p >= last {
            (last, last, 0.0)
        } else {
            let lo = p / s * s;
            (lo, lo + s, (p - lo) as f64 / s as f64)
        }
    };
    let (r0, r1, fr) = bracket(r, last_r);
    let (c0, c1, fc) = bracket(c, last_c);
    let v = |rr: usize, cc: usize| plane[rr * w + cc] as f64;
    let corners = [v(r0, c0), v(r0, c1), v(r1, c0), v(r1, c1)];
    let value = (1.0 - fr) * (1.0 - fc) * corners[0]
        + (1.0 - fr) * fc * corners[1]
        + fr * (1.0 - fc) * corners[2]
        + fr * fc * corners[3];
    (value, corners.iter().fold(1.0f64, |m, x| m.max(x.abs())))
}

/// LOS code of the anchor nearest along both axes, with cells past the last
/// anchor clamped to it; exact midpoint ties resolve to the largest code.
fn naive_nearest_code(plane: &[f32], h: usize, w: usize, s: usize, r: usize, c: usize) -> f32 {
    let mut best = (f64::INFINITY, f32::NEG_INFINITY);
    for ar in (0..h).step_by(s) {
        for ac in (0..w).step_by(s) {
            let code = plane[ar * w + ac];
            let key = axis_rank(r, ar, h, s) + axis_rank(c, ac, w, s);
            if key < best.0 || (key == best.0 && code > best.1) {
                best = (key, code);
            }
        }
    }
    best.1
}

/// 0 for the nearest anchor along one axis, 0 for both on an exact midpoint
/// tie, 1 otherwise.
fn axis_rank(p: usize, a: usize, n: usize, s: usize) -> f64 {
    let last = (n - 1) / s * s;
    let p = p.min(last);
    let lo = p / s * s;
    let hi = (lo + s).min(last);
    let dlo = p - lo;
    let dhi = hi.saturating_sub(p);
    let near: Vec<usize> = if hi == lo || dlo < dhi {
        vec![lo]
    } else if dlo > dhi {
        vec![hi]
    } else {
        vec![lo, hi]
    };
    if near.contains(&a) {
        0.0
    } else {
        1.0
    }
}

#[derive(Debug, Default, Clone, Copy)]
pub struct OracleGap {
    pub l1: f64,
    pub ce: f64,
    pub mtl: f64,
    pub degrade: f64,
    pub metrics: f64,
}

impl OracleGap {
    pub fn max(&self) -> f64 {
        [self.l1, self.ce, self.mtl, self.degrade, self.metrics].into_iter().fold(0.0, f64::max)
    }

    pub fn merge(self, o: OracleGap) -> OracleGap {
        OracleGap {
            l1: self.l1.max(o.l1),
            ce: self.ce.max(o.ce),
            mtl: self.mtl.max(o.mtl),
            degrade: self.degrade.max(o.degrade),
            metrics: self.metrics.max(o.metrics),
        }
    }
}

fn rel(a: f64, b: f64, scale: f64) -> f64 {
    (a - b).abs() / scale.max(1.0).max(b.abs())
}

/// Compares each library routine with its naive oracle on one random
/// instance and returns the relative gaps.
pub fn oracle_instance(seed: u64) -> OracleGap {
    let mut rng = rng(seed);
    let s = [1usize, 2, 4][rng.random_range(0..3)];
    let h = s * rng.random_range(2..5);
    let w = s * rng.random_range(2..5);
    let hr = random_map(&mut rng, h, w, 0.2);
    let masks = build_masks(&hr, s).unwrap();
    let weights = naive_weights(&hr, s);
    let valid = naive_valid(&hr, s);
    let n = valid.iter().filter(|&&v| v).count().max(1);
    let hw = h * w;
    let mut gap = OracleGap::default();

    let pred: Vec<f64> = (0..hw).map(|_| rng.random_range(-1.0..1.0)).collect();
    let target: Vec<f64> = (0..hw).map(|_| rng.random_range(-1.0..1.0)).collect();
    let got = l1_task_loss(
        &Grid4::new([1, 1, h, w], pred.clone()).unwrap(),
        &Grid4::new([1, 1, h, w], target.clone()).unwrap(),
        &masks,
        n,
    )
    .unwrap();
    let want = naive_l1(&pred, &target, &weights, n, hw);
    gap.l1 = rel(got, want, 0.0);

    let logits: Vec<Vec<f64>> = (0..3).map(|_| (0..hw).map(|_| rng.random_range(-3.0..3.0)).collect()).collect();
    let mut prob = vec![vec![0.0; hw]; 3];
    for i in 0..hw {
        let z: f64 = (0..3).map(|k| logits[k][i].exp()).sum();
        for k in 0..3 {
            prob[k][i] = logits[k][i].exp() / z;
        }
    }
    let mut onehot = vec![vec![0.0; hw]; 3];
    for i in 0..hw {
        let k = match hr.channel(Channel::LosClass)[i] {
            c if c == -1.0 => 0,
            c if c == 0.0 => 1,
            _ => 2,
        };
        onehot[k][i] = 1.0;
    }
    let flat = |v: &[Vec<f64>]| v.iter().flatten().copied().collect::<Vec<f64>>();
    let got = ce_task_loss(
        &Grid4::new([1, 3, h, w], flat(&prob)).unwrap(),
        &Grid4::new([1, 3, h, w], flat(&onehot)).unwrap(),
        &masks,
        n,
    )
    .unwrap();
    gap.ce = rel(got, naive_ce(&prob, &onehot, &weights, n, hw), 0.0);

    let losses: Vec<f64> = (0..6).map(|_| rng.random_range(0.0..5.0)).collect();
    let sig: Vec<f64> = (0..6).map(|_| rng.random_range(-2.0..2.0)).collect();
    gap.mtl = rel(mtl_loss(&losses, &sig).unwrap().value, naive_mtl(&losses, &sig), 0.0);

    let lr = degrade(&hr, s).unwrap().map;
    let mut worst = 0.0f64;
    for ch in Channel::ALL {
        let src = hr.channel(ch);
        for r in 0..h {
            for c in 0..w {
                let got = lr.get(ch, r, c) as f64;
                if ch == Channel::LosClass {
                    let want = naive_nearest_code(src, h, w, s, r, c) as f64;
                    worst = worst.max((got - want).abs());
                } else {
                    let (want, mag) = naive_bilinear(src, h, w, s, r, c);
                    worst = worst.max((got - want).abs() / mag);
                }
            }
        }
    }
    gap.degrade = worst;

    // Predictions carry garbage at excluded cells; the oracle never reads them.
    let mut pred_map = hr.clone();
    for i in 0..hw {
        for ch in REGRESSION_TARGETS {
            let v = pred_map.channel(ch)[i];
            pred_map.channel_mut(ch)[i] = if valid[i] { v + rng.random_range(-20.0..20.0) } else { 1e6 };
        }
        if rng.random_bool(0.3) {
            let v = &mut pred_map.channel_mut(Channel::LosClass)[i];
            *v = if *v == -1.0 { 0.0 } else { -1.0 };
        }
    }
    let prediction = Prediction::from_map(&pred_map).unwrap();
    if valid.iter().any(|&v| v) {
        let report = compute_metrics(&prediction, &hr, &masks, "oracle").unwrap();
        for (k, ch) in REGRESSION_TARGETS.iter().enumerate() {
            let errs: Vec<f64> = (0..hw)
                .filter(|&i| valid[i])
                .map(|i| prediction.regression[k][i] as f64 - hr.channel(*ch)[i] as f64)
                .collect();
            let m = errs.len() as f64;
            let mae = errs.iter().map(|e| e.abs()).sum::<f64>() / m;
            let mean = errs.iter().sum::<f64>() / m;
            let stde = (errs.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / m).sqrt();
            gap.metrics = gap.metrics.max(rel(report.mae(*ch), mae, 0.0)).max(rel(report.stde(*ch), stde, 0.0));
        }
        let correct = (0..hw)
            .filter(|&i| valid[i])
            .filter(|&i| pred_map.channel(Channel::LosClass)[i] == hr.channel(Channel::LosClass)[i])
            .count();
        let acc = correct as f64 / valid.iter().filter(|&&v| v).count() as f64;
        gap.metrics = gap.metrics.max((report.accuracy - acc).abs());
    }
    gap
}

pub fn masks_of(hr: &ChannelMap, s: usize) -> MaskPair {
    build_masks(hr, s).unwrap()
}
