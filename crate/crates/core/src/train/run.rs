use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamState};
use super::log::{EpochRecord, Stage, TestSnapshot, TrainLog};
use crate::dataset::{augment, degrade, ChannelMap, Normalization};
use crate::diffcore::Grid4;
use crate::error::{Error, Result};
use crate::eval::{MetricsAccumulator, MetricsReport, Prediction};
use crate::loss::{mtl_objective, task_loss, SampleTargets};
use crate::model::{
    backward, build_model, forward, forward_train, model_input, ArchConfig, Checkpoint, GradScope, GroupKind,
    ModelParams, Task, Upstream,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub pretrain_epochs: usize,
    pub finetune_epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub scale: usize,
    pub init_seed: u64,
    pub shuffle_seed: u64,
    pub augment: bool,
    /// Tasks whose losses drive training; a single `PL` entry gives the
    /// single-task setting.
    pub tasks: Vec<Task>,
    pub arch: ArchConfig,
    /// Evaluate on the test split every this many epochs; 0 disables it.
    pub eval_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            pretrain_epochs: 100,
            finetune_epochs: 100,
            learning_rate: 1e-5,
            batch_size: 1,
            scale: 2,
            init_seed: 1,
            shuffle_seed: 1,
            augment: false,
            tasks: Task::ALL.to_vec(),
            arch: ArchConfig::default(),
            eval_every: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("learning rate must be finite and non-negative"));
        }
        if self.batch_size != 1 {
            return Err(Error::invalid("only per-sample steps (batch size 1) are supported"));
        }
        if self.scale == 0 {
            return Err(Error::invalid("scale factor must be positive"));
        }
        if self.tasks.is_empty() {
            return Err(Error::invalid("at least one task must be trained"));
        }
        let mut seen = [false; 6];
        for t in &self.tasks {
            if std::mem::replace(&mut seen[t.index()], true) {
                return Err(Error::invalid(format!("task {} listed twice", t.name())));
            }
        }
        self.arch.validate()
    }
}

/// Network input and loss targets for one map, computed once.
#[derive(Clone, Debug)]
pub struct PreparedSample {
    pub hr: ChannelMap,
    pub input: Grid4,
    pub targets: SampleTargets,
}

impl PreparedSample {
    pub fn new(hr: ChannelMap, scale: usize, norm: &Normalization) -> Result<Self> {
        let lr = degrade(&hr, scale)?;
        let input = model_input(&lr.map, norm);
        let targets = SampleTargets::new(&hr, lr.lattice, norm)?;
        Ok(Self { hr, input, targets })
    }
}

/// Degrades every map at `scale`, optionally after the six-fold
/// augmentation of the high-resolution maps.
pub fn prepare(maps: &[ChannelMap], scale: usize, with_augmentation: bool, norm: &Normalization) -> Result<Vec<PreparedSample>> {
    let source = if with_augmentation { augment(maps) } else { maps.to_vec() };
    source.into_iter().map(|m| PreparedSample::new(m, scale, norm)).collect()
}

/// Pooled test metrics of `params` on prepared samples.
pub fn evaluate_prepared(params: &ModelParams, samples: &[PreparedSample], norm: &Normalization, model_id: &str) -> Result<MetricsReport> {
    let mut acc = MetricsAccumulator::new();
    let mut scale = 1;
    for s in samples {
        let out = forward(params, &s.input)?;
        acc.add(&Prediction::from_output(&out, norm), &s.hr, &s.targets.masks)?;
        scale = s.targets.masks.scale;
    }
    acc.finish(model_id, scale)
}

fn epoch_order(seed: u64, stage: Stage, epoch: usize, n: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((stage as u64) << 32) | epoch as u64);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    order
}

/// Inputs shared by both stages.
pub struct StageData<'a> {
    pub train: &'a [PreparedSample],
    pub test: &'a [PreparedSample],
    pub norm: &'a Normalization,
}

fn run_stage(
    stage: Stage,
    params: &mut ModelParams,
    data: &StageData<'_>,
    cfg: &TrainConfig,
    log: &mut TrainLog,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<AdamState> {
    if data.train.is_empty() {
        return Err(Error::invalid("training split is empty"));
    }
    for s in data.train.iter().chain(data.test) {
        if s.targets.masks.scale != cfg.scale {
            return Err(Error::invalid(format!(
                "samples were degraded at scale {}, training asks for {}",
                s.targets.masks.scale, cfg.scale
            )));
        }
    }
    let epochs = match stage {
        Stage::Pretrain => cfg.pretrain_epochs,
        Stage::Finetune => cfg.finetune_epochs,
    };
    let active: Vec<Task> = cfg.tasks.clone();
    let trainable = |k: GroupKind| match (stage, k) {
        (Stage::Pretrain, GroupKind::Head(t)) | (Stage::Finetune, GroupKind::Head(t)) => active.contains(&t),
        (Stage::Pretrain, GroupKind::LogSigma) => true,
        (Stage::Pretrain, GroupKind::Backbone) => true,
        (Stage::Finetune, _) => false,
    };
    let mut state = AdamState::new(params);
    let started = Instant::now();

    for epoch in 0..epochs {
        let mut task_sums = [0.0f64; 6];
        let mut objective = 0.0;
        for &i in &epoch_order(cfg.shuffle_seed, stage, epoch, data.train.len()) {
            let s = &data.train[i];
            let cache = forward_train(params, &s.input)?;
            let (up, value, losses) = match stage {
                Stage::Pretrain => {
                    let (mtl, losses, up) = mtl_objective(&active, cache.output(), &s.targets, &params.log_sigma)?;
                    (up, mtl.value, losses)
                }
                Stage::Finetune => {
                    let mut up = Upstream::none();
                    let mut losses = Vec::with_capacity(active.len());
                    for &t in &active {
                        let (l, g) = task_loss(t, cache.output(), &s.targets)?;
                        up.outputs[t.index()] = Some(g);
                        losses.push(l as f64);
                    }
                    let total = losses.iter().sum();
                    (up, total, losses)
                }
            };
            if !value.is_finite() {
                return Err(Error::NonFinite(format!("{} loss at epoch {epoch}", stage.name())));
            }
            objective += value;
            for (t, l) in active.iter().zip(&losses) {
                task_sums[t.index()] += l;
            }
            let scope = match stage {
                Stage::Pretrain => GradScope::All,
                Stage::Finetune => GradScope::HeadsOnly,
            };
            let grads = backward(params, &cache, &up, scope)?;
            adam_step(params, &grads, &mut state, cfg.learning_rate, &trainable)?;
        }
        let n = data.train.len() as f64;
        let test = if cfg.eval_every > 0 && ((epoch + 1) % cfg.eval_every == 0 || epoch + 1 == epochs) && !data.test.is_empty() {
            Some(TestSnapshot::from(&evaluate_prepared(params, data.test, data.norm, "model")?))
        } else {
            None
        };
        let record = EpochRecord {
            stage,
            epoch,
            objective: objective / n,
            task_losses: active.iter().map(|t| (t.name().to_string(), task_sums[t.index()] / n)).collect(),
            sigma: params.log_sigma.iter().map(|s| (*s as f64).exp()).collect(),
            test,
            steps: state.step,
            wall_clock_s: started.elapsed().as_secs_f64(),
        };
        on_epoch(&record);
        log.records.push(record);
    }
    Ok(state)
}

/// Trains every parameter on the multi-task objective.
pub fn pretrain_stage(
    params: ModelParams,
    data: &StageData<'_>,
    cfg: &TrainConfig,
    log: &mut TrainLog,
    on_epoch: impl FnMut(&EpochRecord),
) -> Result<Checkpoint> {
    cfg.validate()?;
    let mut params = params;
    let state = run_stage(Stage::Pretrain, &mut params, data, cfg, log, on_epoch)?;
    Ok(Checkpoint {
        params,
        optimizer: Some(state),
    })
}

/// Trains only the heads, each on its own single-task loss, starting from
/// a fresh optimizer state. Backbone and log-sigmas are never written.
pub fn finetune_stage(
    checkpoint: Checkpoint,
    data: &StageData<'_>,
    cfg: &TrainConfig,
    log: &mut TrainLog,
    on_epoch: impl FnMut(&EpochRecord),
) -> Result<Checkpoint> {
    cfg.validate()?;
    let mut params = checkpoint.params;
    let state = run_stage(Stage::Finetune, &mut params, data, cfg, log, on_epoch)?;
    Ok(Checkpoint {
        params,
        optimizer: Some(state),
    })
}

/// Outcome of both stages.
#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub pretrained: Checkpoint,
    pub finetuned: Checkpoint,
    pub log: TrainLog,
}

/// Builds the model from `cfg` and runs pre-training then fine-tuning.
pub fn train_two_stage(data: &StageData<'_>, cfg: &TrainConfig, mut on_epoch: impl FnMut(&EpochRecord)) -> Result<TrainOutcome> {
    cfg.validate()?;
    let params = build_model(&cfg.arch, cfg.init_seed)?;
    let mut log = TrainLog::default();
    let pretrained = pretrain_stage(params, data, cfg, &mut log, &mut on_epoch)?;
    let finetuned = finetune_stage(pretrained.clone(), data, cfg, &mut log, &mut on_epoch)?;
    Ok(TrainOutcome {
        pretrained,
        finetuned,
        log,
    })
}
