//! Two-stage training: every parameter on the multi-task objective, then
//! the heads alone on their own losses.

mod adam;
mod log;
mod run;

pub use adam::{adam_step, AdamState, BETA1, BETA2, EPSILON};
pub use log::{EpochRecord, Stage, TestSnapshot, TrainLog};
pub use run::{
    evaluate_prepared, finetune_stage, prepare, pretrain_stage, train_two_stage, PreparedSample, StageData,
    TrainConfig, TrainOutcome,
};
