//! Weight masks, per-task losses and the uncertainty-weighted combination.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::{Channel, ChannelMap, Lattice, LosState, Normalization};
use crate::diffcore::{ops, GradCheckOp, Grid4, Real};
use crate::error::{Error, Result};
use crate::model::{backward, build_model, forward_train, ArchConfig, GradScope, ModelOutput, ModelParams, Task, Upstream};

/// Weight given to masked-out cells.
pub const MASK_WEIGHT: f32 = 0.01;
/// Probabilities are clamped to this before taking logs.
pub const PROB_FLOOR: f64 = 1e-12;

/// Down-weighting masks for building interiors (`m_na`) and decimation
/// anchors (`m_gt`), row-major `H×W`.
#[derive(Clone, Debug, PartialEq)]
pub struct MaskPair {
    pub h: usize,
    pub w: usize,
    /// Decimation factor the anchors were placed for.
    pub scale: usize,
    pub m_na: Vec<f32>,
    pub m_gt: Vec<f32>,
}

impl MaskPair {
    /// Cell is neither NaN nor an anchor.
    pub fn is_valid(&self, i: usize) -> bool {
        self.m_na[i] == 1.0 && self.m_gt[i] == 1.0
    }

    pub fn valid_count(&self) -> usize {
        (0..self.m_na.len()).filter(|&i| self.is_valid(i)).count()
    }

    /// `m_na ∘ m_gt` as a `(1, 1, H, W)` grid.
    pub fn weight_grid<T: Real>(&self) -> Grid4<T> {
        Grid4::from_fn([1, 1, self.h, self.w], |i| T::lit((self.m_na[i] * self.m_gt[i]) as f64))
    }
}

pub fn build_masks(hr: &ChannelMap, scale: usize) -> Result<MaskPair> {
    build_masks_on(hr, Lattice::new(scale)?)
}

/// Masks for an input degraded on `lattice`. NaN cells come from the LOS
/// code of the high-resolution map.
pub fn build_masks_on(hr: &ChannelMap, lattice: Lattice) -> Result<MaskPair> {
    let (h, w) = (hr.height(), hr.width());
    lattice.check_dims(h, w)?;
    let nan = LosState::Nan.code();
    let m_na = hr
        .channel(Channel::LosClass)
        .iter()
        .map(|&c| if c == nan { MASK_WEIGHT } else { 1.0 })
        .collect();
    let m_gt = (0..h * w)
        .map(|i| if lattice.is_anchor(i / w, i % w) { MASK_WEIGHT } else { 1.0 })
        .collect();
    Ok(MaskPair {
        h,
        w,
        scale: lattice.scale,
        m_na,
        m_gt,
    })
}

/// Hadamard product of every channel of `grid` with both masks.
pub fn apply_weights<T: Real>(grid: &Grid4<T>, masks: &MaskPair) -> Result<Grid4<T>> {
    if grid.h() != masks.h || grid.w() != masks.w {
        return Err(Error::shape(format!(
            "grid is {}x{}, masks are {}x{}",
            grid.h(),
            grid.w(),
            masks.h,
            masks.w
        )));
    }
    let wg = masks.weight_grid::<T>();
    let wp = wg.plane(0, 0);
    let mut out = grid.clone();
    for n in 0..grid.n() {
        for c in 0..grid.c() {
            for (v, &k) in out.plane_mut(n, c).iter_mut().zip(wp) {
                *v *= k;
            }
        }
    }
    Ok(out)
}

fn coefficient<T: Real>(masks: &MaskPair, n: usize) -> Result<T> {
    if n == 0 {
        return Err(Error::NoValidCells);
    }
    let hw = (masks.h * masks.w) as f64;
    Ok(T::lit(n as f64 / (hw * hw)))
}

fn broadcast_weights<T: Real>(masks: &MaskPair, batch: usize) -> Grid4<T> {
    let one = masks.weight_grid::<T>();
    let mut out = Grid4::zeros([batch, 1, masks.h, masks.w]);
    for b in 0..batch {
        out.plane_mut(b, 0).copy_from_slice(one.plane(0, 0));
    }
    out
}

/// `(n / (h w)^2) * sum |w*pred - w*target|`.
pub fn l1_task_loss<T: Real>(pred: &Grid4<T>, target: &Grid4<T>, masks: &MaskPair, n: usize) -> Result<T> {
    let coef = coefficient(masks, n)?;
    ops::reduce_masked_l1(pred, target, &broadcast_weights(masks, pred.n()), coef)
}

pub fn l1_task_grad<T: Real>(pred: &Grid4<T>, target: &Grid4<T>, masks: &MaskPair, n: usize) -> Result<Grid4<T>> {
    let coef = coefficient(masks, n)?;
    ops::reduce_masked_l1_backward(pred, target, &broadcast_weights(masks, pred.n()), coef)
}

/// `-(n / (h w)^2) * sum w*onehot * ln(max(prob, floor))`. Only the target
/// one-hot carries the mask weights.
pub fn ce_task_loss<T: Real>(prob: &Grid4<T>, onehot: &Grid4<T>, masks: &MaskPair, n: usize) -> Result<T> {
    let coef = coefficient(masks, n)?;
    ops::reduce_masked_ce(prob, onehot, &broadcast_weights(masks, prob.n()), coef, T::lit(PROB_FLOOR))
}

pub fn ce_task_grad<T: Real>(prob: &Grid4<T>, onehot: &Grid4<T>, masks: &MaskPair, n: usize) -> Result<Grid4<T>> {
    let coef = coefficient(masks, n)?;
    ops::reduce_masked_ce_backward(prob, onehot, &broadcast_weights(masks, prob.n()), coef, T::lit(PROB_FLOOR))
}

/// One-hot `(1, 3, H, W)` encoding of the LOS channel.
pub fn onehot_targets<T: Real>(hr: &ChannelMap) -> Result<Grid4<T>> {
    let (h, w) = (hr.height(), hr.width());
    let mut out = Grid4::zeros([1, 3, h, w]);
    for (i, &code) in hr.channel(Channel::LosClass).iter().enumerate() {
        let state = LosState::from_code(code).ok_or_else(|| Error::invalid(format!("bad LOS code {code}")))?;
        out.plane_mut(0, state.class_index())[i] = T::one();
    }
    Ok(out)
}

/// Combined loss and its partial derivatives.
#[derive(Clone, Debug, PartialEq)]
pub struct MtlLoss {
    pub value: f64,
    /// `d value / d L_m`
    pub d_loss: Vec<f64>,
    /// `d value / d s_m`
    pub d_log_sigma: Vec<f64>,
}

/// `sum L_m / (2 sigma_m^2) + sum ln sigma_m` with `sigma_m = exp(s_m)`.
pub fn mtl_loss(losses: &[f64], log_sigmas: &[f64]) -> Result<MtlLoss> {
    if losses.len() != log_sigmas.len() {
        return Err(Error::shape(format!(
            "{} task losses but {} log-sigmas",
            losses.len(),
            log_sigmas.len()
        )));
    }
    if losses.iter().chain(log_sigmas).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("multi-task loss inputs".into()));
    }
    let mut value = 0.0;
    let mut d_loss = Vec::with_capacity(losses.len());
    let mut d_log_sigma = Vec::with_capacity(losses.len());
    for (&l, &s) in losses.iter().zip(log_sigmas) {
        let inv_var = (-2.0 * s).exp();
        value += 0.5 * l * inv_var + s;
        d_loss.push(0.5 * inv_var);
        d_log_sigma.push(1.0 - l * inv_var);
    }
    Ok(MtlLoss {
        value,
        d_loss,
        d_log_sigma,
    })
}

/// Everything a loss needs about one high-resolution map.
#[derive(Clone, Debug)]
pub struct SampleTargets<T = f32> {
    /// Normalized `(1, 1, H, W)` targets, one per regression task.
    pub regression: Vec<Grid4<T>>,
    pub onehot: Grid4<T>,
    pub masks: MaskPair,
    pub n: usize,
}

impl<T: Real> SampleTargets<T> {
    pub fn new(hr: &ChannelMap, lattice: Lattice, norm: &Normalization) -> Result<Self> {
        let masks = build_masks_on(hr, lattice)?;
        let n = masks.valid_count();
        let (h, w) = (hr.height(), hr.width());
        let regression = Task::ALL
            .iter()
            .filter(|t| t.is_regression())
            .map(|t| {
                let r = norm.range(t.channel());
                let data = hr.channel(t.channel()).iter().map(|&v| T::lit(r.forward(v) as f64)).collect();
                Grid4::new([1, 1, h, w], data).expect("plane sized")
            })
            .collect();
        Ok(Self {
            regression,
            onehot: onehot_targets(hr)?,
            masks,
            n,
        })
    }
}

/// Loss of one task and its gradient with respect to that task's output.
pub fn task_loss<T: Real>(task: Task, output: &ModelOutput<T>, targets: &SampleTargets<T>) -> Result<(T, Grid4<T>)> {
    let pred = output.task(task);
    if task.is_regression() {
        let t = &targets.regression[task.index()];
        Ok((
            l1_task_loss(pred, t, &targets.masks, targets.n)?,
            l1_task_grad(pred, t, &targets.masks, targets.n)?,
        ))
    } else {
        Ok((
            ce_task_loss(pred, &targets.onehot, &targets.masks, targets.n)?,
            ce_task_grad(pred, &targets.onehot, &targets.masks, targets.n)?,
        ))
    }
}

/// Multi-task objective over `tasks` for one sample: the combined value, the
/// per-task losses and the upstream gradients for [`crate::model::backward`].
pub fn mtl_objective<T: Real>(
    tasks: &[Task],
    output: &ModelOutput<T>,
    targets: &SampleTargets<T>,
    log_sigma: &[T],
) -> Result<(MtlLoss, Vec<f64>, Upstream<T>)> {
    let mut losses = Vec::with_capacity(tasks.len());
    let mut grads = Vec::with_capacity(tasks.len());
    for &t in tasks {
        let (l, g) = task_loss(t, output, targets)?;
        losses.push(l.as_f64());
        grads.push(g);
    }
    let s: Vec<f64> = tasks.iter().map(|t| log_sigma[t.index()].as_f64()).collect();
    let mtl = mtl_loss(&losses, &s)?;
    let mut up = Upstream::none();
    for (k, (&t, g)) in tasks.iter().zip(grads).enumerate() {
        let scale = T::lit(mtl.d_loss[k]);
        up.outputs[t.index()] = Some(g.map(|v| v * scale));
        up.log_sigma[t.index()] = T::lit(mtl.d_log_sigma[k]);
    }
    Ok((mtl, losses, up))
}

/// End-to-end network plus multi-task loss, differentiated with respect to
/// every parameter including the log-sigmas.
#[derive(Clone, Debug)]
pub struct ModelLossCheck {
    pub config: ArchConfig,
    pub h: usize,
    pub w: usize,
    pub scale: usize,
    pub seed: u64,
}

impl ModelLossCheck {
    fn fixture(&self) -> (ModelParams<f64>, Grid4<f64>, SampleTargets<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ 0xE2E);
        let params = build_model(&self.config, self.seed).expect("valid config").cast::<f64>();
        let input = Grid4::from_fn([1, self.config.in_channels, self.h, self.w], |_| rng.random_range(0.0..1.0));
        let plane = self.h * self.w;
        let mut onehot = Grid4::zeros([1, 3, self.h, self.w]);
        let mut m_na = vec![1.0; plane];
        for i in 0..plane {
            let k = rng.random_range(0..3);
            onehot.plane_mut(0, k)[i] = 1.0;
            if k == 2 {
                m_na[i] = MASK_WEIGHT;
            }
        }
        let lattice = Lattice::new(self.scale).expect("positive scale");
        let m_gt = (0..plane)
            .map(|i| if lattice.is_anchor(i / self.w, i % self.w) { MASK_WEIGHT } else { 1.0 })
            .collect();
        let masks = MaskPair {
            h: self.h,
            w: self.w,
            scale: self.scale,
            m_na,
            m_gt,
        };
        let n = masks.valid_count().max(1);
        let regression = (0..5)
            .map(|_| Grid4::from_fn([1, 1, self.h, self.w], |_| rng.random_range(0.0..1.0)))
            .collect();
        let targets = SampleTargets {
            regression,
            onehot,
            masks,
            n,
        };
        (params, input, targets)
    }
}

impl GradCheckOp for ModelLossCheck {
    fn name(&self) -> String {
        "model+mtl".into()
    }

    fn inputs(&self) -> Vec<(String, usize)> {
        ModelParams::<f64>::zeros(&self.config)
            .expect("valid config")
            .groups()
            .into_iter()
            .map(|(name, _, s)| (name, s.len()))
            .collect()
    }

    /// Random initial weights with log-sigmas spread around zero.
    fn sample_input(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let (mut params, _, _) = self.fixture();
        for s in params.log_sigma.iter_mut() {
            *s = rng.random_range(-0.5..0.5);
        }
        for h in params.heads.iter_mut().chain(params.blocks.iter_mut()) {
            for b in h.conv1.bias.iter_mut().chain(h.conv2.bias.iter_mut()) {
                *b = rng.random_range(-0.1..0.1);
            }
        }
        params.flatten()
    }

    fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        let (mut params, input, targets) = self.fixture();
        params.load_flat(x)?;
        let cache = forward_train(&params, &input)?;
        let (mtl, _, _) = mtl_objective(&Task::ALL, cache.output(), &targets, &params.log_sigma)?;
        Ok(vec![mtl.value])
    }

    fn backward(&self, x: &[f64], grad_out: &[f64]) -> Result<Vec<f64>> {
        let (mut params, input, targets) = self.fixture();
        params.load_flat(x)?;
        let cache = forward_train(&params, &input)?;
        let (_, _, up) = mtl_objective(&Task::ALL, cache.output(), &targets, &params.log_sigma)?;
        let g = backward(&params, &cache, &up, GradScope::All)?;
        Ok(g.flatten().into_iter().map(|v| v * grad_out[0]).collect())
    }
}
