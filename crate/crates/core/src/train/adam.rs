use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{count_params, GroupKind, ModelParams};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// First and second moments in the canonical parameter order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub step: u64,
    pub m: Vec<f32>,
    pub v: Vec<f32>,
}

impl AdamState {
    pub fn new(params: &ModelParams) -> Self {
        let n = count_params(params);
        Self {
            step: 0,
            m: vec![0.0; n],
            v: vec![0.0; n],
        }
    }
}

/// One bias-corrected Adam update of the groups selected by `trainable`.
///
/// The step counter advances even when a gradient is zero. Frozen groups are
/// neither read nor written.
pub fn adam_step(
    params: &mut ModelParams,
    grads: &ModelParams,
    state: &mut AdamState,
    lr: f64,
    trainable: impl Fn(GroupKind) -> bool,
) -> Result<()> {
    let n = count_params(params);
    if count_params(grads) != n || state.m.len() != n || state.v.len() != n {
        return Err(Error::shape("parameters, gradients and optimizer state disagree in size"));
    }
    for (name, kind, g) in grads.groups() {
        if trainable(kind) && g.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("gradient of parameter group {name}")));
        }
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - BETA1.powi(t);
    let c2 = 1.0 - BETA2.powi(t);
    let mut off = 0;
    for ((_, kind, p), (_, _, g)) in params.groups_mut().into_iter().zip(grads.groups()) {
        let len = p.len();
        if trainable(kind) {
            let m = &mut state.m[off..off + len];
            let v = &mut state.v[off..off + len];
            for i in 0..len {
                let gi = g[i] as f64;
                let mi = BETA1 * m[i] as f64 + (1.0 - BETA1) * gi;
                let vi = BETA2 * v[i] as f64 + (1.0 - BETA2) * gi * gi;
                m[i] = mi as f32;
                v[i] = vi as f32;
                let update = lr * (mi / c1) / ((vi / c2).sqrt() + EPSILON);
                p[i] = (p[i] as f64 - update) as f32;
            }
        }
        off += len;
    }
    Ok(())
}
