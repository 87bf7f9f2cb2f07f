//! The residual multi-task network: a backbone of conv-ReLU-conv blocks
//! shared by six small heads, five regressing channel characteristics and
//! one classifying the propagation condition.

mod arch;
mod checkpoint;
mod forward;
mod params;

pub use arch::{ArchConfig, Task, NUM_TASKS};
pub use checkpoint::{
    config_hash, decode_checkpoint, encode_checkpoint, load_checkpoint, load_checkpoint_for, save_checkpoint,
    Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};
pub use forward::{backward, forward, forward_train, ForwardCache, GradScope, ModelOutput, Upstream};
pub use params::{build_model, count_params, ConvPair, GroupKind, ModelParams};

use crate::dataset::{ChannelMap, Normalization};
use crate::diffcore::{Grid4, Real};

/// A map in physical units as a normalized `(1, 7, H, W)` network input.
pub fn model_input<T: Real>(map: &ChannelMap, norm: &Normalization) -> Grid4<T> {
    let data = norm.normalize(map.data(), map.plane_len());
    Grid4::new(
        [1, data.len() / map.plane_len(), map.height(), map.width()],
        data.into_iter().map(|v| T::lit(v as f64)).collect(),
    )
    .expect("length follows from the map")
}
