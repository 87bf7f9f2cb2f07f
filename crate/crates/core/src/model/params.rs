use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::arch::{ArchConfig, Task, NUM_TASKS};
use crate::diffcore::{ConvKernel, Real};
use crate::error::{Error, Result};

/// conv → ReLU → conv, used for both backbone blocks and heads.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvPair<T = f32> {
    pub conv1: ConvKernel<T>,
    pub conv2: ConvKernel<T>,
}

impl<T: Real> ConvPair<T> {
    fn zeros(c_in: usize, c_mid: usize, c_out: usize) -> Self {
        Self {
            conv1: ConvKernel::zeros(c_mid, c_in),
            conv2: ConvKernel::zeros(c_out, c_mid),
        }
    }
}

/// Which part of the network a parameter group belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GroupKind {
    Backbone,
    Head(Task),
    LogSigma,
}

/// All trainable values. The same layout doubles as the container for
/// gradients and optimizer moments.
///
/// Canonical order: each block's `conv1.w, conv1.b, conv2.w, conv2.b`, then
/// each head in task order with the same four groups, then the six
/// log-sigmas.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams<T = f32> {
    pub config: ArchConfig,
    pub blocks: Vec<ConvPair<T>>,
    pub heads: Vec<ConvPair<T>>,
    pub log_sigma: [T; NUM_TASKS],
}

impl<T: Real> ModelParams<T> {
    pub fn zeros(config: &ArchConfig) -> Result<Self> {
        config.validate()?;
        let c = config.in_channels;
        Ok(Self {
            config: config.clone(),
            blocks: (0..config.n_blocks)
                .map(|_| ConvPair::zeros(c, config.block_mid, c))
                .collect(),
            heads: Task::ALL
                .iter()
                .map(|&t| ConvPair::zeros(c, config.head_mid, config.head_out(t)))
                .collect(),
            log_sigma: [T::zero(); NUM_TASKS],
        })
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(&self.config).expect("config was validated on construction")
    }

    pub fn head(&self, task: Task) -> &ConvPair<T> {
        &self.heads[task.index()]
    }

    /// Named parameter groups in canonical order.
    pub fn groups(&self) -> Vec<(String, GroupKind, &[T])> {
        let mut out = Vec::new();
        for (i, b) in self.blocks.iter().enumerate() {
            push_pair(&mut out, format!("block{i}"), GroupKind::Backbone, b);
        }
        for (t, h) in Task::ALL.iter().zip(&self.heads) {
            push_pair(&mut out, format!("head_{}", t.name()), GroupKind::Head(*t), h);
        }
        out.push(("log_sigma".into(), GroupKind::LogSigma, &self.log_sigma[..]));
        out
    }

    pub fn groups_mut(&mut self) -> Vec<(String, GroupKind, &mut [T])> {
        let mut out = Vec::new();
        for (i, b) in self.blocks.iter_mut().enumerate() {
            push_pair_mut(&mut out, format!("block{i}"), GroupKind::Backbone, b);
        }
        for (t, h) in Task::ALL.iter().zip(self.heads.iter_mut()) {
            push_pair_mut(&mut out, format!("head_{}", t.name()), GroupKind::Head(*t), h);
        }
        out.push(("log_sigma".into(), GroupKind::LogSigma, &mut self.log_sigma[..]));
        out
    }

    pub fn flatten(&self) -> Vec<T> {
        self.groups().into_iter().flat_map(|(_, _, s)| s.iter().copied()).collect()
    }

    pub fn load_flat(&mut self, values: &[T]) -> Result<()> {
        let expected = count_params(self);
        if values.len() != expected {
            return Err(Error::shape(format!(
                "parameter payload holds {} values, model needs {expected}",
                values.len()
            )));
        }
        let mut off = 0;
        for (_, _, s) in self.groups_mut() {
            s.copy_from_slice(&values[off..off + s.len()]);
            off += s.len();
        }
        Ok(())
    }

    /// Concatenation of the backbone groups, for freezing checks.
    pub fn backbone_values(&self) -> Vec<T> {
        self.groups()
            .into_iter()
            .filter(|(_, k, _)| *k == GroupKind::Backbone)
            .flat_map(|(_, _, s)| s.iter().copied())
            .collect()
    }

    pub fn cast<U: Real>(&self) -> ModelParams<U> {
        let mut out = ModelParams::<U>::zeros(&self.config).expect("validated config");
        let flat: Vec<U> = self.flatten().into_iter().map(|v| U::lit(v.as_f64())).collect();
        out.load_flat(&flat).expect("same layout");
        out
    }

    pub fn check_finite(&self) -> Result<()> {
        for (name, _, s) in self.groups() {
            if s.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("parameter group {name}")));
            }
        }
        Ok(())
    }
}

fn push_pair<'a, T: Real>(out: &mut Vec<(String, GroupKind, &'a [T])>, prefix: String, kind: GroupKind, p: &'a ConvPair<T>) {
    out.push((format!("{prefix}.conv1.w"), kind, p.conv1.weight.data()));
    out.push((format!("{prefix}.conv1.b"), kind, &p.conv1.bias[..]));
    out.push((format!("{prefix}.conv2.w"), kind, p.conv2.weight.data()));
    out.push((format!("{prefix}.conv2.b"), kind, &p.conv2.bias[..]));
}

fn push_pair_mut<'a, T: Real>(
    out: &mut Vec<(String, GroupKind, &'a mut [T])>,
    prefix: String,
    kind: GroupKind,
    p: &'a mut ConvPair<T>,
) {
    out.push((format!("{prefix}.conv1.w"), kind, p.conv1.weight.data_mut()));
    out.push((format!("{prefix}.conv1.b"), kind, &mut p.conv1.bias[..]));
    out.push((format!("{prefix}.conv2.w"), kind, p.conv2.weight.data_mut()));
    out.push((format!("{prefix}.conv2.b"), kind, &mut p.conv2.bias[..]));
}

/// Fan-in uniform initialization with zero biases and zero log-sigmas.
///
/// The second convolution of each residual block starts at a reduced gain so
/// every block begins close to the identity.
pub fn build_model(config: &ArchConfig, init_seed: u64) -> Result<ModelParams> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(init_seed);
    let c = config.in_channels;
    let relu_gain = std::f64::consts::SQRT_2 / 3f64.sqrt();
    let block_out_gain = if config.residual { 0.1 } else { relu_gain };
    let blocks = (0..config.n_blocks)
        .map(|_| ConvPair {
            conv1: ConvKernel::fan_in_uniform(config.block_mid, c, relu_gain, &mut rng),
            conv2: ConvKernel::fan_in_uniform(c, config.block_mid, block_out_gain, &mut rng),
        })
        .collect();
    let heads = Task::ALL
        .iter()
        .map(|&t| ConvPair {
            conv1: ConvKernel::fan_in_uniform(config.head_mid, c, relu_gain, &mut rng),
            conv2: ConvKernel::fan_in_uniform(config.head_out(t), config.head_mid, relu_gain, &mut rng),
        })
        .collect();
    let params = ModelParams {
        config: config.clone(),
        blocks,
        heads,
        log_sigma: [0.0; NUM_TASKS],
    };
    debug_assert_eq!(count_params(&params), config.param_count());
    Ok(params)
}

/// Number of trainable scalars, including the log-sigmas.
pub fn count_params<T: Real>(params: &ModelParams<T>) -> usize {
    params.groups().iter().map(|(_, _, s)| s.len()).sum()
}
